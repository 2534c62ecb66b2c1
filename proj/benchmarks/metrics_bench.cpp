#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "mmtlab/metrics.hpp"

namespace {

std::vector<std::string> sentences(std::size_t n, std::size_t words, unsigned seed) {
  static const char* vocab[] = {"a", "man", "the", "dog", "red", "bike", "on", "street", "near", "tree", "with", "hat"};
  std::mt19937 rng(seed);
  std::vector<std::string> out(n);
  for (auto& s : out)
    for (std::size_t w = 0; w < words; ++w) s += std::string(w ? " " : "") + vocab[rng() % 12];
  return out;
}

void BM_Bleu(benchmark::State& state) {
  const auto h = sentences(1000, 10, 1), r = sentences(1000, 10, 2);
  for (auto _ : state) benchmark::DoNotOptimize(mmtlab::metrics::bleu(h, r));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_Bleu);

void BM_Chrf(benchmark::State& state) {
  const auto h = sentences(1000, 10, 1), r = sentences(1000, 10, 2);
  for (auto _ : state) benchmark::DoNotOptimize(mmtlab::metrics::chrf2(h, r));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_Chrf);

// Hypotheses derived from their reference: some words replaced, one block moved.
std::pair<std::vector<std::string>, std::vector<std::string>> translations(std::size_t n, std::size_t words,
                                                                          unsigned seed) {
  std::mt19937 rng(seed);
  std::vector<std::string> hyps(n), refs(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> ref(words), hyp;
    for (auto& w : ref) w = "w" + std::to_string(rng() % 400);
    hyp = ref;
    for (auto& w : hyp)
      if (rng() % 5 == 0) w = "w" + std::to_string(rng() % 400);
    const std::size_t len = 1 + rng() % std::min<std::size_t>(4, words);
    const std::size_t from = rng() % (words - len + 1);
    std::vector<std::string> block(hyp.begin() + from, hyp.begin() + from + len);
    hyp.erase(hyp.begin() + from, hyp.begin() + from + len);
    hyp.insert(hyp.begin() + rng() % (hyp.size() + 1), block.begin(), block.end());
    for (std::size_t w = 0; w < words; ++w) {
      refs[i] += (w ? " " : "") + ref[w];
      hyps[i] += (w ? " " : "") + hyp[w];
    }
  }
  return {hyps, refs};
}

void BM_TerSegment(benchmark::State& state) {
  const auto [h, r] = translations(50, static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(mmtlab::metrics::ter(h, r));
  state.SetItemsProcessed(state.iterations() * 50);
}
BENCHMARK(BM_TerSegment)->Arg(5)->Arg(10)->Arg(20)->Arg(40);

// Unrelated sentences over 12 words: nearly every shift ties, worst case for the search.
void BM_TerSegmentRepetitive(benchmark::State& state) {
  const auto words = static_cast<std::size_t>(state.range(0));
  const auto h = sentences(20, words, 3), r = sentences(20, words, 4);
  for (auto _ : state) benchmark::DoNotOptimize(mmtlab::metrics::ter(h, r));
  state.SetItemsProcessed(state.iterations() * 20);
}
BENCHMARK(BM_TerSegmentRepetitive)->Arg(5)->Arg(10)->Arg(15);

}  // namespace
