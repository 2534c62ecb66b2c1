#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmtlab/corpus.hpp"
#include "mmtlab/features.hpp"

namespace mmtlab::probing {

enum class Substitution { actual, random_uniform, random_derangement };
enum class FeatureKind { crop, full };
enum class NoiseLevel { none, low, high };

const char* to_string(Substitution s) noexcept;
const char* to_string(FeatureKind k) noexcept;
const char* to_string(NoiseLevel n) noexcept;
/// Accepts "actual", "uniform"/"random_uniform", "derangement"/"random_derangement".
Substitution parse_substitution(std::string_view name);
FeatureKind parse_feature_kind(std::string_view name);
NoiseLevel parse_noise_level(std::string_view name);

struct ProbeConfig {
  Substitution substitution = Substitution::random_uniform;
  std::uint64_t seed = 0;
  FeatureKind feature_kind = FeatureKind::crop;
  NoiseLevel noise_level = NoiseLevel::none;
};

/// Seeded permutation of 0..n-1 without fixed points; n must be >= 2.
std::vector<std::size_t> derangement(std::size_t n, std::uint64_t seed);

/// Record id -> image id whose features the record receives. The pool is the
/// sorted set of distinct image ids in `split`.
std::map<corpus::RecordId, std::string> assign_images(const corpus::CorpusSplit& split,
                                                      const corpus::FeatureMap& features, const ProbeConfig& config);

std::map<corpus::RecordId, corpus::FeatureMatrix> substitute_features(const corpus::CorpusSplit& split,
                                                                      const corpus::FeatureMap& features,
                                                                      const ProbeConfig& config);

/// The split with each image_id replaced by its assignment; text untouched.
corpus::CorpusSplit apply_assignment(const corpus::CorpusSplit& split,
                                     const std::map<corpus::RecordId, std::string>& assignment);

// ---- comparison tables --------------------------------------------------

enum class Subset { test, challenge };
const char* to_string(Subset s) noexcept;
/// "test"/"eval" or "challenge"/"chal".
Subset parse_subset(std::string_view name);

struct Score {
  std::string system;
  std::string language;
  Subset subset = Subset::test;
  double bleu = 0.0;
};

/// Rows in file order.
struct ScoreSet {
  std::vector<Score> scores;
};

/// TSV with header columns system, language, subset, bleu (any order).
ScoreSet parse_scores(std::string_view contents);
ScoreSet load_scores(const std::filesystem::path& path);

struct ComparisonCell {
  std::string system_a;
  std::string system_b;
  Subset subset = Subset::test;
  std::string language;
  double delta = 0.0;  // b - a
};

/// One cell per (system of b, language, subset). When `a` holds a single
/// system it is the baseline for every system in `b`; otherwise systems are
/// paired by name. Throws Error(Errc::data) when the grids differ.
std::vector<ComparisonCell> run_probe(const ScoreSet& a, const ScoreSet& b);

/// Markdown table, one row per compared system, signed two-decimal deltas and
/// per-subset averages (mean of the row's cells).
std::string render_markdown(const std::vector<ComparisonCell>& cells);
std::string render_csv(const std::vector<ComparisonCell>& cells);
/// "%+.2f", with values that round to zero printed as "0.00".
std::string format_delta(double delta);

}  // namespace mmtlab::probing
