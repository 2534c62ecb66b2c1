#include <ostream>

#include "common.hpp"
#include "mmtlab/fusion/check.hpp"

namespace mmtlab::cli {
namespace {

struct FuseOptions {
  std::uint64_t seed = 1;
  std::string dims = "32,4,48,5,9";
  std::size_t entries = 48;
  std::size_t draws = 1000;
  std::string out;
};

int run_fuse(Context& ctx, const FuseOptions& o) {
  fusion::CheckConfig cfg;
  cfg.seed = o.seed;
  cfg.dims = fusion::parse_dims(o.dims);
  cfg.max_entries = o.entries;
  cfg.convexity_draws = o.draws;
  const auto results = fusion::run_fusion_checks(cfg);
  const std::string table = fusion::format_check_table(results);
  ctx.out << table;
  bool ok = true;
  for (const auto& r : results) ok = ok && r.passed;
  if (!o.out.empty()) {
    write_text(o.out, table);
    write_manifest(ctx, o.out, "fuse-check",
                   {{"dims", o.dims}, {"entries", o.entries}, {"draws", o.draws}, {"passed", ok}}, o.seed, {},
                   {o.out});
  }
  if (!ok) {
    ctx.err << "error\tinternal\tfusion checks failed\n";
    return 4;
  }
  return 0;
}

}  // namespace

Command add_fuse_check(CLI::App& app) {
  auto o = std::make_shared<FuseOptions>();
  CLI::App* sub = app.add_subcommand("fuse-check", "Run the fusion invariant and gradient checks");
  sub->add_option("--seed", o->seed, "Seed for weights and inputs");
  sub->add_option("--dims", o->dims, "d,heads,dimg,m,n");
  sub->add_option("--entries", o->entries, "Finite-difference entries per parameter (0 = all)");
  sub->add_option("--draws", o->draws, "Random draws for the convexity check")->check(CLI::PositiveNumber);
  sub->add_option("--out", o->out, "Also write the table here");
  return {sub, [o](Context& ctx) { return run_fuse(ctx, *o); }};
}

}  // namespace mmtlab::cli
