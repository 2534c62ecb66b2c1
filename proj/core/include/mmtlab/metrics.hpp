#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmtlab::metrics {

enum class Tokenizer {
  whitespace,  // split on Unicode whitespace only
  intl,        // additionally split punctuation into separate tokens
};

Tokenizer parse_tokenizer(std::string_view name);

struct MetricOptions {
  Tokenizer tokenizer = Tokenizer::whitespace;
  bool lowercase = false;
  /// Replaces zero BLEU match counts with 0.1.
  bool bleu_smoothing = false;
  /// Upper bound on distinct hypotheses kept per shift depth in TER.
  std::size_t ter_beam = 256;
};

std::vector<std::string> tokenize(std::string_view s, const MetricOptions& options);

// ---- BLEU ---------------------------------------------------------------

inline constexpr std::size_t kBleuOrder = 4;

struct BleuStats {
  std::array<std::uint64_t, kBleuOrder> matches{};  // clipped
  std::array<std::uint64_t, kBleuOrder> totals{};   // hypothesis n-grams
  std::uint64_t hyp_len = 0;
  std::uint64_t ref_len = 0;

  BleuStats& operator+=(const BleuStats& o);
};

BleuStats bleu_stats(std::span<const std::string> hyp, std::span<const std::string> ref);

/// Geometric mean of clipped n-gram precisions (n = 1..4) times the brevity
/// penalty, scaled to [0, 100]. An order with no hypothesis n-grams at all is
/// left out of the mean; any included order with zero matches gives 0 unless
/// smoothing is on.
double bleu_from_stats(const BleuStats& stats, bool smoothing = false);

double bleu(std::span<const std::string> hypotheses, std::span<const std::string> references,
            const MetricOptions& options = {});

// ---- chrF2 --------------------------------------------------------------

inline constexpr std::size_t kChrfOrder = 6;
inline constexpr double kChrfBeta = 2.0;

struct ChrfStats {
  std::array<std::uint64_t, kChrfOrder> matches{};
  std::array<std::uint64_t, kChrfOrder> hyp_totals{};
  std::array<std::uint64_t, kChrfOrder> ref_totals{};

  ChrfStats& operator+=(const ChrfStats& o);
};

/// Character n-gram statistics over code points with whitespace removed.
ChrfStats chrf_stats(std::string_view hyp, std::string_view ref);

double chrf_from_stats(const ChrfStats& stats);

double chrf2(std::span<const std::string> hypotheses, std::span<const std::string> references,
             const MetricOptions& options = {});

// ---- TER ----------------------------------------------------------------

inline constexpr std::size_t kTerMaxShiftSpan = 10;
inline constexpr std::size_t kTerMaxShifts = 20;

struct TerResult {
  std::size_t shifts = 0;
  std::size_t edits = 0;  // Levenshtein edits after the shifts
  std::size_t ref_len = 0;

  std::size_t total() const noexcept { return shifts + edits; }
};

std::size_t levenshtein(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

/// Minimum of shifts + word edit distance over greedy shift sequences: at each
/// depth every block shift (span <= 10 words, any destination) with the
/// largest strict reduction in edit distance is explored. At most 20 shifts.
TerResult ter_segment(std::span<const std::string> hyp, std::span<const std::string> ref,
                      std::size_t beam = 256);

/// Corpus TER: total edits / total reference words * 100.
double ter(std::span<const std::string> hypotheses, std::span<const std::string> references,
           const MetricOptions& options = {});

// ---- reports ------------------------------------------------------------

struct SegmentScore {
  double bleu = 0.0;
  double chrf2 = 0.0;
  double ter = 0.0;
};

struct MetricReport {
  double bleu = 0.0;
  double chrf2 = 0.0;
  double ter = 0.0;
  std::size_t segment_count = 0;
  bool bleu_smoothed = false;
  std::optional<std::vector<SegmentScore>> per_segment;
};

/// All three corpus metrics in one pass; per-segment scores on request.
MetricReport evaluate(std::span<const std::string> hypotheses, std::span<const std::string> references,
                      const MetricOptions& options = {}, bool per_segment = false);

/// One TSV line: "bleu chrf2 ter n_segments" (tab separated, two decimals).
std::string format_report_line(const MetricReport& report);

}  // namespace mmtlab::metrics
