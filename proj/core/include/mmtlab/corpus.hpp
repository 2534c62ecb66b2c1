#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmtlab::corpus {

using RecordId = std::int64_t;

/// Pixel-space box around the image region a caption describes.
struct BoundingBox {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t width = 0;
  std::int64_t height = 0;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct TranslationRecord {
  RecordId id = 0;
  std::string source;
  std::string target;
  std::string image_id;
  std::optional<BoundingBox> bbox;
  std::string lang;

  friend bool operator==(const TranslationRecord&, const TranslationRecord&) = default;
};

enum class SplitName { train, valid, test, challenge };

const char* to_string(SplitName name) noexcept;
SplitName parse_split_name(std::string_view name);

struct CorpusSplit {
  SplitName name = SplitName::train;
  std::vector<TranslationRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }

  friend bool operator==(const CorpusSplit&, const CorpusSplit&) = default;
};

enum class CorpusFormat { tsv, jsonl };

/// Picks jsonl for ".jsonl"/".json" extensions, tsv otherwise.
CorpusFormat format_from_path(const std::filesystem::path& path);

struct LoadOptions {
  CorpusFormat format = CorpusFormat::tsv;
  SplitName split = SplitName::train;
  /// Language tag used when a row carries no `lang` column/key.
  std::string default_lang;
};

/// Reads a corpus in file order. TSV files need a header row naming at least
/// `source` and `target`; `id`, `image_id`, `x`, `y`, `w`, `h` and `lang` are
/// optional columns. A missing `id` column numbers records from 1.
///
/// Any malformed row throws Error(Errc::data) naming its 1-based line number.
CorpusSplit load_corpus(const std::filesystem::path& path, const LoadOptions& options);
CorpusSplit load_corpus(const std::filesystem::path& path, CorpusFormat format);

CorpusSplit parse_tsv(std::string_view contents, const LoadOptions& options);
CorpusSplit parse_jsonl(std::string_view contents, const LoadOptions& options);

std::string to_tsv(const CorpusSplit& split);
std::string to_jsonl(const CorpusSplit& split);
void save_corpus(const CorpusSplit& split, const std::filesystem::path& path, CorpusFormat format);

/// One sentence per line. A file whose lines all have the 7-column layout of
/// the Visual Genome releases (image id, x, y, w, h, English, translation)
/// yields the English column.
std::vector<std::string> parse_sentences(std::string_view contents);
std::vector<std::string> load_sentences(const std::filesystem::path& path);

/// Checks the record-level invariants; throws Error(Errc::data).
void validate_record(const TranslationRecord& record);

struct AlignmentReport {
  std::size_t length = 0;
  /// Positions where source or image_id differ between any two splits.
  std::vector<std::size_t> mismatches;
};

/// Compares same-named splits (e.g. one per target language) position by
/// position. Throws Error(Errc::invalid_argument) on differing names or
/// lengths.
AlignmentReport check_alignment(std::span<const CorpusSplit> splits);

}  // namespace mmtlab::corpus
