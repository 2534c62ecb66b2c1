#include <ostream>

#include "common.hpp"
#include "mmtlab/corpus.hpp"
#include "mmtlab/features.hpp"
#include "mmtlab/probing.hpp"

namespace mmtlab::cli {
namespace {

struct SubstituteOptions {
  std::string mode = "uniform", corpus, features, out, features_out, feature_kind = "crop", noise = "none";
  std::uint64_t seed = 0;
};

struct TableOptions {
  std::string a, b, out, csv;
};

int run_substitute(Context& ctx, const SubstituteOptions& o) {
  probing::ProbeConfig cfg;
  cfg.substitution = probing::parse_substitution(o.mode);
  cfg.seed = o.seed;
  cfg.feature_kind = probing::parse_feature_kind(o.feature_kind);
  cfg.noise_level = probing::parse_noise_level(o.noise);

  const auto format = corpus::format_from_path(o.corpus);
  const corpus::CorpusSplit split = corpus::load_corpus(o.corpus, format);
  const corpus::FeatureMap features = corpus::load_features(o.features);
  const auto assignment = probing::assign_images(split, features, cfg);
  corpus::save_corpus(probing::apply_assignment(split, assignment), o.out, corpus::format_from_path(o.out));
  std::vector<std::string> outputs = {o.out};

  if (!o.features_out.empty()) {
    std::vector<corpus::FeatureMatrix> entries;
    for (const auto& [id, image] : assignment) {
      corpus::FeatureMatrix m = features.find(image)->second;
      m.image_id = std::to_string(id);
      entries.push_back(std::move(m));
    }
    corpus::save_features(o.features_out, entries);
    outputs.push_back(o.features_out);
  }

  std::size_t changed = 0;
  for (const auto& r : split.records) changed += assignment.at(r.id) != r.image_id ? 1 : 0;
  ctx.out << "assigned " << split.size() << " records, " << changed << " with a different image\n";

  write_manifest(ctx, o.out, "probe substitute",
                 {{"mode", probing::to_string(cfg.substitution)},
                  {"feature_kind", probing::to_string(cfg.feature_kind)},
                  {"noise_level", probing::to_string(cfg.noise_level)}},
                 o.seed, {o.corpus, o.features}, outputs);
  return 0;
}

int run_table(Context& ctx, const TableOptions& o) {
  const auto cells = probing::run_probe(probing::load_scores(o.a), probing::load_scores(o.b));
  const std::string md = probing::render_markdown(cells);
  write_text(o.out, md);
  std::vector<std::string> outputs = {o.out};
  if (!o.csv.empty()) {
    write_text(o.csv, probing::render_csv(cells));
    outputs.push_back(o.csv);
  }
  ctx.out << md;
  write_manifest(ctx, o.out, "probe table", json::object(), 0, {o.a, o.b}, outputs);
  return 0;
}

}  // namespace

std::vector<Command> add_probe(CLI::App& app) {
  CLI::App* probe = app.add_subcommand("probe", "Random-image substitution and comparison tables");
  probe->require_subcommand(1);

  auto s = std::make_shared<SubstituteOptions>();
  CLI::App* sub = probe->add_subcommand("substitute", "Reassign image ids (actual, uniform or derangement)");
  sub->add_option("--mode", s->mode, "Substitution")->check(
      CLI::IsMember({"actual", "uniform", "derangement", "random_uniform", "random_derangement"}));
  sub->add_option("--seed", s->seed, "Random seed");
  sub->add_option("--corpus", s->corpus, "Corpus (.tsv or .jsonl)")->required();
  sub->add_option("--features", s->features, "Feature container")->required();
  sub->add_option("--out", s->out, "Corpus with substituted image ids")->required();
  sub->add_option("--features-out", s->features_out, "Per-record feature container (keyed by record id)");
  sub->add_option("--feature-kind", s->feature_kind, "Recorded in the manifest")->check(CLI::IsMember({"crop", "full"}));
  sub->add_option("--noise", s->noise, "Recorded in the manifest")->check(CLI::IsMember({"none", "low", "high"}));

  auto t = std::make_shared<TableOptions>();
  CLI::App* table = probe->add_subcommand("table", "Markdown table of b minus a BLEU deltas");
  table->add_option("--a", t->a, "Baseline scores TSV (system, language, subset, bleu)")->required();
  table->add_option("--b", t->b, "Compared scores TSV")->required();
  table->add_option("--out", t->out, "Markdown output")->required();
  table->add_option("--csv", t->csv, "Also write the cells as CSV");

  return {{sub, [s](Context& ctx) { return run_substitute(ctx, *s); }},
          {table, [t](Context& ctx) { return run_table(ctx, *t); }}};
}

}  // namespace mmtlab::cli
