#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmtlab/noiser.hpp"

namespace mmtlab::noise {

/// Optional per-edit decrements; unset entries fall back to the uniform one.
struct PerTypeDecrement {
  std::optional<double> article;
  std::optional<double> vowel;
  std::optional<double> dupe;
};

/// Human-in-the-loop schedule: rate a sample of corrupted sentences, and lower
/// the corruption probabilities until the mean rating reaches the target.
struct TuningState {
  std::size_t round = 0;
  NoiseConfig config = {0.3, 0.3, 0.3, true, 0};
  std::vector<std::pair<std::string, std::string>> sample;  // (original, corrupted)
  std::vector<int> ratings;
  double target_mean = 4.5;
  double decrement = 0.1;
  std::size_t sample_size = 20;
  PerTypeDecrement per_type;
  bool converged = false;
};

/// Draws the round-0 sample from `pool` and corrupts it with `state.config`.
TuningState start_tuning(TuningState initial, std::span<const std::string> pool);

/// Feeds one round of ratings (each in 1..5, exactly sample_size of them).
/// Converges when the mean is >= target_mean; otherwise decrements every
/// probability (floored at 0), advances the round and draws a fresh sample.
TuningState tune_probabilities(const TuningState& state, std::span<const int> new_ratings,
                               std::span<const std::string> pool);

/// Same step, driven by an already aggregated mean (several annotators per
/// sentence); `ratings` of the result is left empty.
TuningState tune_with_mean(const TuningState& state, double mean, std::span<const std::string> pool);

double mean_rating(std::span<const int> ratings);

/// Deterministic choice of `count` distinct pool indices for a tuning round.
std::vector<std::size_t> sample_indices(std::size_t pool_size, std::size_t count,
                                        std::uint64_t seed, std::size_t round);

}  // namespace mmtlab::noise
