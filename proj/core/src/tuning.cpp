#include "mmtlab/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmtlab/error.hpp"

namespace mmtlab::noise {
namespace {

// Probabilities live on a 1e-9 grid so repeated 0.1 steps land on 0.2, 0.1, 0.
double step_down(double p, double by) {
  const double next = std::round((p - by) * 1e9) / 1e9;
  return std::max(0.0, next);
}

void check_decrement(double d, const char* name) {
  if (!(d > 0.0)) throw Error(Errc::invalid_argument, std::string(name) + " must be > 0");
}

void draw_sample(TuningState& state, std::span<const std::string> pool) {
  const auto picks = sample_indices(pool.size(), state.sample_size, state.config.seed, state.round);
  const std::uint64_t round_seed = KeyedRng::mix(state.config.seed ^ (0xA5A5A5A5ULL + state.round));
  state.sample.clear();
  state.ratings.clear();
  for (std::size_t idx : picks) {
    const auto trace = corrupt_sentence(pool[idx], state.config,
                                        NoiseStream(round_seed, static_cast<std::int64_t>(idx)));
    state.sample.emplace_back(trace.original, trace.corrupted);
  }
}

}  // namespace

double mean_rating(std::span<const int> ratings) {
  if (ratings.empty()) throw Error(Errc::invalid_argument, "no ratings");
  const long long sum = std::accumulate(ratings.begin(), ratings.end(), 0LL);
  return static_cast<double>(sum) / static_cast<double>(ratings.size());
}

std::vector<std::size_t> sample_indices(std::size_t pool_size, std::size_t count,
                                        std::uint64_t seed, std::size_t round) {
  if (count > pool_size)
    throw Error(Errc::invalid_argument, "sample of " + std::to_string(count) + " from a pool of " +
                                            std::to_string(pool_size));
  std::vector<std::size_t> idx(pool_size);
  std::iota(idx.begin(), idx.end(), 0);
  const KeyedRng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.below(pool_size - i, round, i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

TuningState start_tuning(TuningState initial, std::span<const std::string> pool) {
  validate(initial.config);
  check_decrement(initial.decrement, "decrement");
  if (initial.sample_size == 0) throw Error(Errc::invalid_argument, "sample_size must be > 0");
  initial.converged = false;
  draw_sample(initial, pool);
  return initial;
}

namespace {

TuningState advance(const TuningState& state, double mean, std::span<const int> ratings,
                    std::span<const std::string> pool) {
  TuningState next = state;
  next.ratings.assign(ratings.begin(), ratings.end());
  if (mean >= state.target_mean) {
    next.converged = true;
    return next;
  }
  next.config.p_article = step_down(state.config.p_article, state.per_type.article.value_or(state.decrement));
  next.config.p_vowel = step_down(state.config.p_vowel, state.per_type.vowel.value_or(state.decrement));
  next.config.p_dupe = step_down(state.config.p_dupe, state.per_type.dupe.value_or(state.decrement));
  next.round = state.round + 1;
  draw_sample(next, pool);
  return next;
}

void check_round(const TuningState& state) {
  if (state.converged) throw Error(Errc::state, "tuning already converged");
  check_decrement(state.decrement, "decrement");
  for (const auto& d : {state.per_type.article, state.per_type.vowel, state.per_type.dupe}) {
    if (d) check_decrement(*d, "per-type decrement");
  }
}

}  // namespace

TuningState tune_probabilities(const TuningState& state, std::span<const int> new_ratings,
                               std::span<const std::string> pool) {
  check_round(state);
  if (new_ratings.size() != state.sample_size)
    throw Error(Errc::invalid_argument, "expected " + std::to_string(state.sample_size) +
                                            " ratings, got " + std::to_string(new_ratings.size()));
  for (int r : new_ratings) {
    if (r < 1 || r > 5) throw Error(Errc::invalid_argument, "rating " + std::to_string(r) + " outside 1..5");
  }
  return advance(state, mean_rating(new_ratings), new_ratings, pool);
}

TuningState tune_with_mean(const TuningState& state, double mean, std::span<const std::string> pool) {
  check_round(state);
  if (!(mean >= 1.0 && mean <= 5.0)) throw Error(Errc::invalid_argument, "mean rating outside 1..5");
  return advance(state, mean, {}, pool);
}

}  // namespace mmtlab::noise
