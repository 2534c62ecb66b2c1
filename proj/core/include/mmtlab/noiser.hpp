#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mmtlab/corpus.hpp"
#include "mmtlab/keyed_rng.hpp"

namespace mmtlab::noise {

struct NoiseConfig {
  double p_article = 0.0;
  double p_vowel = 0.0;
  double p_dupe = 0.0;
  /// Whether an article that survives removal still gets vowel/duplicate edits.
  bool vowel_secondary_pass = true;
  std::uint64_t seed = 0;

  /// Articles 0.2, vowels 0.1, duplicates 0.2; surviving articles are edited.
  static NoiseConfig low(std::uint64_t seed = 0) { return {0.2, 0.1, 0.2, true, seed}; }
  /// 0.3 for every edit; surviving articles are left alone.
  static NoiseConfig high(std::uint64_t seed = 0) { return {0.3, 0.3, 0.3, false, seed}; }

  friend bool operator==(const NoiseConfig&, const NoiseConfig&) = default;
};

/// Throws Error(Errc::invalid_argument) unless every probability is in [0, 1].
void validate(const NoiseConfig& config);

enum class EditKind { drop_article, drop_vowel, drop_dupe };

const char* to_string(EditKind kind) noexcept;
EditKind parse_edit_kind(std::string_view name);

/// One deletion. `char_index` is the byte offset in the word as it stood when
/// the edit was applied; article drops remove the whole word and carry none.
struct Edit {
  std::size_t word_index = 0;
  EditKind kind = EditKind::drop_article;
  std::optional<std::size_t> char_index;

  friend bool operator==(const Edit&, const Edit&) = default;
};

struct CorruptionTrace {
  std::string original;
  std::string corrupted;
  std::vector<Edit> edits;

  friend bool operator==(const CorruptionTrace&, const CorruptionTrace&) = default;
};

/// Draw stream for one sentence, keyed by (seed, record id).
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::int64_t record_id) noexcept
      : rng_(seed), record_(static_cast<std::uint64_t>(record_id)) {}

  double draw(std::size_t word, EditKind kind, std::size_t position) const noexcept {
    return rng_.uniform({record_, word, static_cast<std::uint64_t>(kind), position});
  }

 private:
  KeyedRng rng_;
  std::uint64_t record_;
};

bool is_article(std::string_view word) noexcept;
bool is_vowel(char c) noexcept;

/// Corrupts whitespace-delimited words in order: article removal, then
/// per-character vowel removal, then a single duplicate-letter pass over the
/// edited word. Words reduced to nothing disappear together with the
/// whitespace that preceded them.
CorruptionTrace corrupt_sentence(std::string_view sentence, const NoiseConfig& config,
                                 const NoiseStream& stream);
CorruptionTrace corrupt_sentence(std::string_view sentence, const NoiseConfig& config);

/// Re-applies `edits` to `original`; the inverse check of corrupt_sentence.
std::string replay(std::string_view original, const std::vector<Edit>& edits);

struct CorruptedCorpus {
  corpus::CorpusSplit split;
  std::vector<CorruptionTrace> traces;
};

/// Corrupts every record's source. Each record draws from NoiseStream(seed, id),
/// so the result for a record is independent of its position and of `threads`.
CorruptedCorpus corrupt_corpus(const corpus::CorpusSplit& split, const NoiseConfig& config,
                               unsigned threads = 1);

std::string trace_to_json(const CorruptionTrace& trace);
CorruptionTrace trace_from_json(std::string_view line);

}  // namespace mmtlab::noise
