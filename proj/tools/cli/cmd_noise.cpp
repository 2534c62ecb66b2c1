#include <ostream>

#include "common.hpp"
#include "mmtlab/corpus.hpp"
#include "mmtlab/noiser.hpp"

namespace mmtlab::cli {
namespace {

struct NoiseOptions {
  std::string preset = "low";
  std::optional<double> p_article, p_vowel, p_dupe;
  std::string secondary = "on";
  std::uint64_t seed = 0;
  std::string in, out, trace, format = "auto";
  unsigned threads = 1;
};

noise::NoiseConfig resolve(const NoiseOptions& o) {
  const bool any_p = o.p_article || o.p_vowel || o.p_dupe;
  if (o.preset == "custom") {
    if (!o.p_article || !o.p_vowel || !o.p_dupe)
      throw UsageError("--config custom needs --p-article, --p-vowel and --p-dupe");
    noise::NoiseConfig c{*o.p_article, *o.p_vowel, *o.p_dupe, o.secondary == "on", o.seed};
    noise::validate(c);
    return c;
  }
  if (any_p) throw UsageError("--p-* flags conflict with --config " + o.preset + " (use --config custom)");
  return o.preset == "low" ? noise::NoiseConfig::low(o.seed) : noise::NoiseConfig::high(o.seed);
}

int run_noise(Context& ctx, const NoiseOptions& o) {
  const noise::NoiseConfig config = resolve(o);
  std::string format = o.format;
  if (format == "auto") {
    const auto ext = std::filesystem::path(o.in).extension().string();
    format = ext == ".tsv" ? "tsv" : (ext == ".jsonl" || ext == ".json") ? "jsonl" : "text";
  }

  corpus::CorpusSplit split;
  if (format == "text") {
    const auto lines = corpus::load_sentences(o.in);
    for (std::size_t i = 0; i < lines.size(); ++i)
      split.records.push_back({static_cast<corpus::RecordId>(i + 1), lines[i], lines[i], "", std::nullopt, ""});
  } else {
    split = corpus::load_corpus(o.in, format == "tsv" ? corpus::CorpusFormat::tsv : corpus::CorpusFormat::jsonl);
  }

  const noise::CorruptedCorpus result = noise::corrupt_corpus(split, config, std::max(1u, o.threads));

  if (format == "text") {
    std::string body;
    for (const auto& t : result.traces) body += t.corrupted + "\n";
    write_text(o.out, body);
  } else {
    corpus::save_corpus(result.split, o.out,
                        format == "tsv" ? corpus::CorpusFormat::tsv : corpus::CorpusFormat::jsonl);
  }
  std::vector<std::string> outputs = {o.out};
  if (!o.trace.empty()) {
    std::string body;
    for (const auto& t : result.traces) body += noise::trace_to_json(t) + "\n";
    write_text(o.trace, body);
    outputs.push_back(o.trace);
  }

  std::size_t counts[3] = {0, 0, 0};
  for (const auto& t : result.traces)
    for (const auto& e : t.edits) ++counts[static_cast<int>(e.kind)];
  ctx.out << "noised " << result.traces.size() << " sentences: " << counts[0] << " article, " << counts[1]
          << " vowel, " << counts[2] << " duplicate drops\n";

  const json cfg = {{"config", o.preset},
                    {"p_article", config.p_article},
                    {"p_vowel", config.p_vowel},
                    {"p_dupe", config.p_dupe},
                    {"vowel_secondary_pass", config.vowel_secondary_pass},
                    {"format", format},
                    {"threads", o.threads}};
  write_manifest(ctx, o.out, "noise", cfg, o.seed, {o.in}, outputs);
  return 0;
}

}  // namespace

Command add_noise(CLI::App& app) {
  auto o = std::make_shared<NoiseOptions>();
  CLI::App* sub = app.add_subcommand("noise", "Corrupt source sentences (article, vowel and duplicate-letter drops)");
  sub->add_option("--config", o->preset, "Preset")->check(CLI::IsMember({"low", "high", "custom"}));
  sub->add_option("--p-article", o->p_article, "Article drop probability (custom)")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--p-vowel", o->p_vowel, "Vowel drop probability (custom)")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--p-dupe", o->p_dupe, "Duplicate-letter drop probability (custom)")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--vowel-secondary-pass", o->secondary, "Edit surviving articles too (custom)")
      ->check(CLI::IsMember({"on", "off"}));
  sub->add_option("--seed", o->seed, "Random seed");
  sub->add_option("--in", o->in, "Input: .tsv/.jsonl corpus or one sentence per line")->required();
  sub->add_option("--out", o->out, "Output file (same layout as input)")->required();
  sub->add_option("--trace", o->trace, "Edit trace, one JSON object per sentence");
  sub->add_option("--format", o->format, "Input layout")->check(CLI::IsMember({"auto", "tsv", "jsonl", "text"}));
  sub->add_option("--threads", o->threads, "Worker threads (output does not depend on it)")->check(CLI::Range(1u, 256u));
  return {sub, [o](Context& ctx) { return run_noise(ctx, *o); }};
}

}  // namespace mmtlab::cli
