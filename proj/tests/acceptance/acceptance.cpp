// Acceptance suite: one PASS/FAIL/SKIP line per primary criterion.

#include <unistd.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mmtlab/annotate/store.hpp"
#include "mmtlab/corpus.hpp"
#include "mmtlab/error.hpp"
#include "mmtlab/fusion/check.hpp"
#include "mmtlab/fusion/fusion.hpp"
#include "mmtlab/metrics.hpp"
#include "mmtlab/noiser.hpp"
#include "mmtlab/probing.hpp"
#include "mmtlab/text.hpp"
#include "mmtlab/tuning.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using namespace mmtlab;

namespace {

enum class Outcome { pass, fail, skip };

struct Result {
  Outcome outcome;
  std::string detail;
};

Result pass(std::string d) { return {Outcome::pass, std::move(d)}; }
Result fail(std::string d) { return {Outcome::fail, std::move(d)}; }
Result skip(std::string d) { return {Outcome::skip, std::move(d)}; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string join(const oracle::Tokens& t) {
  std::string s;
  for (const auto& w : t) s += (s.empty() ? "" : " ") + w;
  return s;
}

corpus::CorpusSplit split_of(const std::vector<std::string>& sentences) {
  corpus::CorpusSplit s;
  for (std::size_t i = 0; i < sentences.size(); ++i)
    s.records.push_back({static_cast<corpus::RecordId>(i + 1), sentences[i], "-", "img", std::nullopt, "hi"});
  return s;
}

std::vector<std::string> sources(const corpus::CorpusSplit& s) {
  std::vector<std::string> out;
  for (const auto& r : s.records) out.push_back(r.source);
  return out;
}

// ---- 1 ------------------------------------------------------------------

Result metric_oracle_equivalence() {
  std::vector<oracle::Tokens> seqs{{}};
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    if (seqs[i].size() == 5) continue;
    for (const char* w : {"a", "b", "c"}) {
      auto next = seqs[i];
      next.push_back(w);
      seqs.push_back(std::move(next));
    }
  }
  const auto start = std::chrono::steady_clock::now();
  std::size_t pairs = 0, ter_bad = 0, bleu_bad = 0, chrf_bad = 0;
  double worst_bleu = 0, worst_chrf = 0;
  std::string example;
  for (const auto& h : seqs) {
    const std::string hs = join(h);
    for (const auto& r : seqs) {
      const std::string rs = join(r);
      ++pairs;
      const auto got = metrics::ter_segment(h, r).total();
      if (got != oracle::greedy_ter_edits(h, r)) {
        if (ter_bad++ == 0) example = "TER '" + hs + "' vs '" + rs + "'";
      }
      const std::vector<std::string> H{hs}, R{rs};
      const double db = std::abs(metrics::bleu(H, R) - oracle::bleu(H, R));
      const double dc = std::abs(metrics::chrf2(H, R) - oracle::chrf2(H, R));
      worst_bleu = std::max(worst_bleu, db);
      worst_chrf = std::max(worst_chrf, dc);
      bleu_bad += db > 1e-9;
      chrf_bad += dc > 1e-9;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::string d = fmt("%zu pairs, TER mismatches %zu, max |dBLEU| %.1e, max |dchrF2| %.1e, %.1f s", pairs, ter_bad,
                            worst_bleu, worst_chrf, secs);
  if (ter_bad || bleu_bad || chrf_bad) return fail(d + (example.empty() ? "" : ", first: " + example));
  if (secs >= 120.0) return fail(d + ", over the 2 minute budget");
  return pass(d);
}

// ---- 2 ------------------------------------------------------------------

Result reflexivity_and_ranges() {
  std::mt19937_64 rng(2024);
  std::size_t bad_reflexive = 0, bad_range = 0;
  for (std::uint64_t c = 0; c < 1000; ++c) {
    auto corpus = c % 2 ? oracle::random_sentences(1 + rng() % 25, c) : oracle::synthetic_sentences(1 + rng() % 25, c);
    const auto self = metrics::evaluate(corpus, corpus);
    if (std::abs(self.bleu - 100.0) > 1e-9 || std::abs(self.chrf2 - 100.0) > 1e-9 || self.ter != 0.0) ++bad_reflexive;

    auto other = oracle::random_sentences(corpus.size(), c + 100000);
    if (c % 7 == 0) other[0].clear();
    const auto cross = metrics::evaluate(other, corpus, {}, true);
    auto in_range = [](const auto& s) {
      return s.bleu >= 0 && s.bleu <= 100 && s.chrf2 >= 0 && s.chrf2 <= 100 && s.ter >= 0;
    };
    bool ok = in_range(cross);
    for (const auto& seg : *cross.per_segment) ok = ok && in_range(seg);
    bad_range += !ok;
  }
  const std::string d = fmt("1000 corpora, reflexivity failures %zu, range violations %zu", bad_reflexive, bad_range);
  return bad_reflexive || bad_range ? fail(d) : pass(d);
}

// ---- 3 ------------------------------------------------------------------

Result noise_properties() {
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::string> problems;

  const auto sentences = oracle::random_sentences(10000, 31);
  for (const auto& s : sentences) {
    const auto t = noise::corrupt_sentence(s, {0, 0, 0, true, 5});
    if (t.corrupted != s || !t.edits.empty()) {
      problems.push_back("zero config changed '" + s + "'");
      break;
    }
  }

  const std::pair<std::string, std::string> forced[] = {{"the ball", "ball"}, {"feed", "fed"}, {"red", "rd"}};
  const noise::NoiseConfig configs[] = {{1, 0, 0, true, 0}, {0, 0, 1, true, 0}, {0, 1, 0, true, 0}};
  for (int i = 0; i < 3; ++i) {
    const auto got = noise::corrupt_sentence(forced[i].first, configs[i]).corrupted;
    if (got != forced[i].second) problems.push_back("'" + forced[i].first + "' gave '" + got + "'");
  }

  std::size_t replay_failures = 0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto t = noise::corrupt_sentence(sentences[i], {0.3, 0.3, 0.3, i % 2 == 0, 9}, noise::NoiseStream(9, i));
    replay_failures += noise::replay(t.original, t.edits) != t.corrupted;
  }
  if (replay_failures) problems.push_back(std::to_string(replay_failures) + " replay failures");

  const auto split = split_of(oracle::synthetic_sentences(10000, 32));
  const auto a = noise::corrupt_corpus(split, noise::NoiseConfig::low(42), 1);
  const auto b = noise::corrupt_corpus(split, noise::NoiseConfig::low(42), 1);
  const auto c = noise::corrupt_corpus(split, noise::NoiseConfig::low(42), 8);
  if (corpus::to_tsv(a.split) != corpus::to_tsv(b.split) || corpus::to_tsv(a.split) != corpus::to_tsv(c.split))
    problems.push_back("reruns differ");

  std::size_t articles = 0, dropped = 0;
  for (const auto& t : a.traces) {
    for (const auto& w : text::split_whitespace(t.original)) articles += noise::is_article(w);
    for (const auto& e : t.edits) dropped += e.kind == noise::EditKind::drop_article;
  }
  const double rate = double(dropped) / double(articles);
  if (articles < 10000) problems.push_back("only " + std::to_string(articles) + " articles");
  if (std::abs(rate - 0.2) > 0.02) problems.push_back(fmt("article drop rate %.4f", rate));

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs >= 60.0) problems.push_back(fmt("%.1f s exceeds 1 minute", secs));
  std::string d = fmt("10000 replays, article drop rate %.4f over %zu articles, %.1f s", rate, articles, secs);
  for (const auto& p : problems) d += "; " + p;
  return problems.empty() ? pass(d) : fail(d);
}

// ---- 4 ------------------------------------------------------------------

Result regime_ordering() {
  const auto split = split_of(oracle::synthetic_sentences(5000, 44));
  const auto original = sources(split);
  const auto low = sources(noise::corrupt_corpus(split, noise::NoiseConfig::low(7)).split);
  const auto high = sources(noise::corrupt_corpus(split, noise::NoiseConfig::high(7)).split);
  const auto rl = metrics::evaluate(low, original);
  const auto rh = metrics::evaluate(high, original);
  const std::string d = fmt("low BLEU %.2f TER %.2f, high BLEU %.2f TER %.2f", rl.bleu, rl.ter, rh.bleu, rh.ter);
  return rh.bleu < rl.bleu && rh.ter > rl.ter ? pass(d) : fail(d);
}

// ---- 5 ------------------------------------------------------------------

Result dataset_characterization() {
  const char* path = std::getenv("MMTLAB_HINDI_VG_TRAIN");
  if (!path || !*path) return skip("MMTLAB_HINDI_VG_TRAIN not set");
  if (!fs::exists(path)) return skip(std::string(path) + " not found");
  const auto original = corpus::load_sentences(path);
  const auto split = split_of(original);
  const auto low = metrics::evaluate(sources(noise::corrupt_corpus(split, noise::NoiseConfig::low(1), 8).split), original);
  const auto high =
      metrics::evaluate(sources(noise::corrupt_corpus(split, noise::NoiseConfig::high(1), 8).split), original);
  const std::string d = fmt("%zu sentences; low BLEU %.2f chrF2 %.2f TER %.2f; high BLEU %.2f TER %.2f",
                            original.size(), low.bleu, low.chrf2, low.ter, high.bleu, high.ter);
  const bool ok = std::abs(low.bleu - 67.5) <= 2.0 && std::abs(low.ter - 16.2) <= 2.0 &&
                  std::abs(high.bleu - 38.1) <= 2.0 && std::abs(high.ter - 34.9) <= 2.0;
  return ok ? pass(d) : fail(d);
}

// ---- 6 ------------------------------------------------------------------

Result fusion_numerics() {
  using namespace mmtlab::fusion;
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::string> failed;
  double worst = 0.0;
  std::size_t checks = 0;
  for (const Dims& dims : {Dims{4, 2, 4, 3, 3}, Dims{8, 2, 8, 4, 5}}) {
    CheckConfig config;
    config.dims = dims;
    config.max_entries = 0;
    config.convexity_draws = 1000;
    for (const auto& r : run_fusion_checks(config)) {
      ++checks;
      if (!r.passed) failed.push_back(fmt("%zux%zu %s: %s", dims.m, dims.d, r.name.c_str(), r.detail.c_str()));
    }
    // the probe above reports pass/fail; track the worst gradient error too
    const auto ep = EncoderParams::random(dims, 5);
    auto op = record_encoder_block(Tensor2::uniform(dims.m, dims.d, 1, -1, 1), ep,
                                   Tensor2::uniform(dims.n, dims.d_img, 2, -1, 1), EncoderMode::selective, {true, false});
    const auto up = Tensor2::uniform(dims.m, dims.d, 3, -1, 1);
    for (const auto& e : gradient_errors(op, up, 1e-5, 0, 1)) worst = std::max(worst, e.error);
  }
  if (worst >= 1e-4) failed.push_back(fmt("encoder gradient error %.2e", worst));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs >= 60.0) failed.push_back(fmt("%.1f s exceeds 1 minute", secs));
  std::string d = fmt("%zu checks on 3x4 and 4x8, worst encoder FD error %.1e, %.1f s", checks, worst, secs);
  for (const auto& f : failed) d += "; " + f;
  return failed.empty() ? pass(d) : fail(d);
}

// ---- 7 ------------------------------------------------------------------

Result probe_derangement_and_table() {
  std::size_t checked = 0, fixed = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (std::size_t n = 2; n <= 100; ++n) {
      corpus::CorpusSplit split;
      corpus::FeatureMap features;
      for (std::size_t i = 0; i < n; ++i) {
        const std::string id = fmt("img%03zu", i);
        split.records.push_back({corpus::RecordId(i + 1), "s", "t", id, std::nullopt, "hi"});
        features[id] = {id, 1, 1, {float(i)}};
      }
      const auto assigned =
          probing::assign_images(split, features, {probing::Substitution::random_derangement, seed});
      for (const auto& r : split.records) {
        ++checked;
        fixed += assigned.at(r.id) == r.image_id;
      }
    }
  }
  const std::string data = MMTLAB_TEST_DATA;
  const auto cells = probing::run_probe(probing::load_scores(data + "/text_baseline_scores.tsv"),
                                        probing::load_scores(data + "/selattn_crop_scores.tsv"));
  std::string hindi_test = "missing";
  for (const auto& c : cells)
    if (c.language == "hindi" && c.subset == probing::Subset::test) hindi_test = probing::format_delta(c.delta);
  const bool rendered = probing::render_markdown(cells).find("+0.25") != std::string::npos;
  const std::string d = fmt("%zu assignments over pools 2-100 x 10 seeds, fixed points %zu; hindi test delta %s",
                            checked, fixed, hindi_test.c_str());
  return fixed == 0 && hindi_test == "+0.25" && rendered ? pass(d) : fail(d);
}

// ---- 8 ------------------------------------------------------------------

Result annotation_aggregation() {
  using namespace mmtlab::annotate;
  const fs::path dir = fs::temp_directory_path() / fmt("mmtlab_acceptance_store_%d", int(::getpid()));
  fs::remove_all(dir);
  std::vector<std::string> problems;
  QualityReport before;
  std::vector<annotate::Verdict> verdicts_before;
  std::vector<AnnotationTask> tasks_before;
  const QualityFilter challenge{std::string("challenge"), std::nullopt};
  {
    Store store(dir);
    BatchRequest req;
    req.kind = TaskKind::quality;
    for (int i = 0; i < 50; ++i) req.quality.push_back({"src", "tgt", fmt("%d", 2000 + i), "challenge", "hi"});
    const auto batch = store.create_batch(req);
    for (int i = 0; i < 50; ++i) {
      annotate::Verdict v;
      v.task_id = batch.tasks[i].task_id;
      v.annotator_id = "synthetic";
      v.adequacy = Grade::good;
      v.fluency = Grade::good;
      v.image_need = i < 3 ? ImageNeed::yes : i < 5 ? ImageNeed::maybe : i < 47 ? ImageNeed::no : ImageNeed::not_reflected;
      store.submit_verdict(v);
    }
    before = store.aggregate_quality(challenge);
    verdicts_before = store.verdicts();
    tasks_before = store.tasks();
  }
  const std::array<double, 4> expected{6, 4, 84, 6};
  if (before.image_need != expected)
    problems.push_back(fmt("got %.2f/%.2f/%.2f/%.2f", before.image_need[0], before.image_need[1], before.image_need[2],
                           before.image_need[3]));

  // Crash mid-append: keep every prefix of one more verdict line.
  const fs::path log = dir / "events.jsonl";
  const std::string extra =
      R"({"type":"verdict","verdict":{"task_id":"T000001","annotator_id":"late","adequacy":"bad","fluency":"bad","image_need":"yes","timestamp":1}})";
  std::size_t replays = 0;
  for (std::size_t cut = 1; cut < extra.size(); cut += 7) {
    {
      std::ofstream out(log, std::ios::app | std::ios::binary);
      out << extra.substr(0, cut);
    }
    const Store reopened(dir);
    ++replays;
    const auto after = reopened.aggregate_quality(challenge);
    if (after.image_need != before.image_need || after.adequacy != before.adequacy ||
        reopened.verdicts() != verdicts_before || reopened.tasks() != tasks_before) {
      problems.push_back(fmt("replay differs after a %zu-byte torn line", cut));
      break;
    }
  }
  fs::remove_all(dir);
  std::string d = fmt("image need %.0f/%.0f/%.0f/%.0f %%, %zu torn-tail replays", before.image_need[0],
                      before.image_need[1], before.image_need[2], before.image_need[3], replays);
  for (const auto& p : problems) d += "; " + p;
  return problems.empty() ? pass(d) : fail(d);
}

// ---- 9 ------------------------------------------------------------------

Result tuning_loop() {
  const auto pool = oracle::synthetic_sentences(100, 90);
  std::vector<std::string> problems;
  auto rounds = [&](const std::vector<std::vector<int>>& script) {
    noise::TuningState s;
    s.config.seed = 3;
    s = noise::start_tuning(s, pool);
    std::vector<noise::NoiseConfig> seen{s.config};
    for (const auto& r : script) {
      if (s.converged) break;
      s = noise::tune_probabilities(s, r, pool);
      seen.push_back(s.config);
    }
    return std::make_pair(s, seen);
  };
  auto ratings = [](int low, int high, std::size_t lows) {
    std::vector<int> r(20, high);
    std::fill(r.begin(), r.begin() + lows, low);
    return r;
  };
  // mean 1.0, then 4.45, then exactly 4.5
  const auto [s, seen] = rounds({ratings(1, 1, 20), ratings(4, 5, 11), ratings(4, 5, 10), ratings(5, 5, 0)});
  const double expect[] = {0.3, 0.2, 0.1, 0.1};
  if (seen.size() != 4) problems.push_back(fmt("%zu configs visited", seen.size()));
  for (std::size_t i = 0; i < seen.size() && i < 4; ++i)
    if (seen[i].p_article != expect[i] || seen[i].p_vowel != expect[i] || seen[i].p_dupe != expect[i])
      problems.push_back(fmt("round %zu config %.3f/%.3f/%.3f", i, seen[i].p_article, seen[i].p_vowel, seen[i].p_dupe));
  if (!s.converged || s.round != 2) problems.push_back("did not halt at the 4.5 round");

  noise::TuningState boundary;
  boundary = noise::start_tuning(boundary, pool);
  if (!noise::tune_with_mean(boundary, 4.5, pool).converged) problems.push_back("aggregated mean 4.5 did not converge");
  if (noise::tune_with_mean(boundary, std::nextafter(4.5, 0.0), pool).converged)
    problems.push_back("mean below 4.5 converged");

  std::string d = "0.3 -> 0.2 -> 0.1, halted on mean 4.50 after 2 decrements";
  for (const auto& p : problems) d += "; " + p;
  return problems.empty() ? pass(d) : fail(d);
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Result()> run;
  };
  const Criterion criteria[] = {
      {"metric-oracle-equivalence", metric_oracle_equivalence},
      {"metric-reflexivity-ranges", reflexivity_and_ranges},
      {"noise-properties", noise_properties},
      {"regime-ordering", regime_ordering},
      {"dataset-noise-characterization", dataset_characterization},
      {"fusion-numerics", fusion_numerics},
      {"probe-derangement-table", probe_derangement_and_table},
      {"annotation-aggregation-replay", annotation_aggregation},
      {"tuning-loop", tuning_loop},
  };
  int failures = 0, index = 0;
  for (const auto& c : criteria) {
    ++index;
    Result v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = fail(std::string("exception: ") + e.what());
    }
    const char* tag = v.outcome == Outcome::pass ? "PASS" : v.outcome == Outcome::fail ? "FAIL" : "SKIP";
    failures += v.outcome == Outcome::fail;
    std::printf("%s  %d %-32s %s\n", tag, index, c.name, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria failed\n", failures, index);
  return failures ? 1 : 0;
}
