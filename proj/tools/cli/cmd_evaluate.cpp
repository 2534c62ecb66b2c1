#include <cstdio>
#include <ostream>
#include <sstream>

#include "common.hpp"
#include "mmtlab/corpus.hpp"
#include "mmtlab/error.hpp"
#include "mmtlab/metrics.hpp"

namespace mmtlab::cli {
namespace {

struct EvaluateOptions {
  std::string hyp, ref, metrics = "bleu,chrf2,ter", per_segment, tokenizer = "whitespace", column = "source";
  bool lowercase = false;
  bool smooth = false;
};

std::vector<std::string> read_segments(const std::string& path, const std::string& column) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext != ".tsv" && ext != ".jsonl" && ext != ".json") return corpus::load_sentences(path);
  const auto split =
      corpus::load_corpus(path, ext == ".tsv" ? corpus::CorpusFormat::tsv : corpus::CorpusFormat::jsonl);
  std::vector<std::string> out;
  for (const auto& r : split.records) out.push_back(column == "source" ? r.source : r.target);
  return out;
}

std::string two_decimals(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

int run_evaluate(Context& ctx, const EvaluateOptions& o) {
  bool want[3] = {false, false, false};
  {
    std::stringstream ss(o.metrics);
    std::string m;
    while (std::getline(ss, m, ',')) {
      if (m == "bleu") want[0] = true;
      else if (m == "chrf2") want[1] = true;
      else if (m == "ter") want[2] = true;
      else throw UsageError("unknown metric '" + m + "' (expected bleu, chrf2, ter)");
    }
    if (!want[0] && !want[1] && !want[2]) throw UsageError("--metric selects nothing");
  }
  metrics::MetricOptions mo;
  mo.tokenizer = metrics::parse_tokenizer(o.tokenizer);
  mo.lowercase = o.lowercase;
  mo.bleu_smoothing = o.smooth;

  const auto hyps = read_segments(o.hyp, o.column);
  const auto refs = read_segments(o.ref, o.column);
  if (hyps.size() != refs.size())
    throw Error(Errc::data, "hypothesis has " + std::to_string(hyps.size()) + " segments, reference has " +
                                std::to_string(refs.size()));
  const metrics::MetricReport report = metrics::evaluate(hyps, refs, mo, !o.per_segment.empty());

  std::string line;
  if (want[0]) line += two_decimals(report.bleu) + "\t";
  if (want[1]) line += two_decimals(report.chrf2) + "\t";
  if (want[2]) line += two_decimals(report.ter) + "\t";
  ctx.out << line << report.segment_count << '\n';

  if (!o.per_segment.empty()) {
    std::string body;
    for (std::size_t i = 0; i < report.per_segment->size(); ++i) {
      const auto& s = (*report.per_segment)[i];
      body += json{{"index", i}, {"bleu", s.bleu}, {"chrf2", s.chrf2}, {"ter", s.ter}}.dump() + "\n";
    }
    write_text(o.per_segment, body);
    const json cfg = {{"metric", o.metrics},     {"tokenizer", o.tokenizer}, {"lowercase", o.lowercase},
                      {"smooth", o.smooth},      {"column", o.column},       {"bleu", report.bleu},
                      {"chrf2", report.chrf2},   {"ter", report.ter}};
    write_manifest(ctx, o.per_segment, "evaluate", cfg, 0, {o.hyp, o.ref}, {o.per_segment});
  }
  return 0;
}

}  // namespace

Command add_evaluate(CLI::App& app) {
  auto o = std::make_shared<EvaluateOptions>();
  CLI::App* sub = app.add_subcommand("evaluate", "Corpus BLEU, chrF2 and TER; prints 'bleu chrf2 ter n_segments'");
  sub->add_option("--hyp", o->hyp, "Hypotheses (one per line, or a .tsv/.jsonl corpus)")->required();
  sub->add_option("--ref", o->ref, "References (same layout)")->required();
  sub->add_option("--metric", o->metrics, "Comma-separated subset of bleu,chrf2,ter");
  sub->add_option("--per-segment", o->per_segment, "Write per-segment scores as JSONL");
  sub->add_flag("--lowercase", o->lowercase, "Lowercase before scoring");
  sub->add_option("--tokenizer", o->tokenizer, "Word tokenizer for BLEU/TER")->check(CLI::IsMember({"whitespace", "intl"}));
  sub->add_flag("--smooth", o->smooth, "Smooth zero BLEU n-gram matches");
  sub->add_option("--column", o->column, "Corpus field scored for .tsv/.jsonl inputs")->check(CLI::IsMember({"source", "target"}));
  return {sub, [o](Context& ctx) { return run_evaluate(ctx, *o); }};
}

}  // namespace mmtlab::cli
