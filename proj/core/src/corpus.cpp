#include "mmtlab/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "mmtlab/error.hpp"
#include "mmtlab/text.hpp"

namespace mmtlab::corpus {
namespace {

using nlohmann::json;

[[noreturn]] void fail_at(std::size_t line, const std::string& what) {
  throw Error(Errc::data, "line " + std::to_string(line) + ": " + what);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(Errc::io, "read failed: " + path.string());
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  out << contents;
  out.flush();
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

// Splits into lines, dropping a trailing "\r" and a single final empty line.
std::vector<std::string_view> split_lines(std::string_view contents) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= contents.size()) {
    std::size_t end = contents.find('\n', start);
    if (end == std::string_view::npos) end = contents.size();
    std::string_view line = contents.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = line.find('\t', start);
    if (end == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, end - start));
    start = end + 1;
  }
}

std::optional<std::int64_t> parse_int(std::string_view s, bool allow_negative) {
  if (s.empty()) return std::nullopt;
  if (!allow_negative && s.front() == '-') return std::nullopt;
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<BoundingBox> make_bbox(const std::array<std::optional<std::string>, 4>& raw,
                                     std::size_t line) {
  const auto present = std::count_if(raw.begin(), raw.end(), [](const auto& f) {
    return f.has_value() && !f->empty();
  });
  if (present == 0) return std::nullopt;
  if (present != 4) fail_at(line, "bounding box must have all of x, y, w, h or none");
  static constexpr const char* kNames[] = {"x", "y", "w", "h"};
  std::array<std::int64_t, 4> v{};
  for (std::size_t i = 0; i < 4; ++i) {
    const auto parsed = parse_int(*raw[i], false);
    if (!parsed) fail_at(line, std::string("bounding box field ") + kNames[i] +
                                   " is not a non-negative integer: '" + *raw[i] + "'");
    v[i] = *parsed;
  }
  return BoundingBox{v[0], v[1], v[2], v[3]};
}

void check_record(const TranslationRecord& r, std::size_t line) {
  try {
    validate_record(r);
  } catch (const Error& e) {
    fail_at(line, e.what());
  }
}

void check_unique(std::unordered_set<RecordId>& seen, RecordId id, std::size_t line) {
  if (!seen.insert(id).second) fail_at(line, "duplicate id " + std::to_string(id));
}

void check_tsv_safe(const std::string& field, RecordId id) {
  if (field.find_first_of("\t\n\r") != std::string::npos)
    throw Error(Errc::data, "record " + std::to_string(id) +
                                ": field contains a tab or newline and cannot be written as TSV");
}

}  // namespace

const char* to_string(SplitName name) noexcept {
  switch (name) {
    case SplitName::train: return "train";
    case SplitName::valid: return "valid";
    case SplitName::test: return "test";
    case SplitName::challenge: return "challenge";
  }
  return "train";
}

SplitName parse_split_name(std::string_view name) {
  if (name == "train") return SplitName::train;
  if (name == "valid") return SplitName::valid;
  if (name == "test") return SplitName::test;
  if (name == "challenge") return SplitName::challenge;
  throw Error(Errc::invalid_argument, "unknown split name '" + std::string(name) + "'");
}

CorpusFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".jsonl" || ext == ".json") ? CorpusFormat::jsonl : CorpusFormat::tsv;
}

std::vector<std::string> parse_sentences(std::string_view contents) {
  const auto lines = split_lines(contents);
  bool vg = !lines.empty();
  for (auto line : lines) vg = vg && (line.empty() || split_tabs(line).size() == 7);
  std::vector<std::string> out;
  out.reserve(lines.size());
  for (auto line : lines) out.emplace_back(vg && !line.empty() ? split_tabs(line)[5] : line);
  return out;
}

std::vector<std::string> load_sentences(const std::filesystem::path& path) {
  return parse_sentences(read_file(path));
}

void validate_record(const TranslationRecord& record) {
  if (text::trim(record.source).empty()) throw Error(Errc::data, "empty source");
  if (text::trim(record.target).empty()) throw Error(Errc::data, "empty target");
  if (record.bbox && (record.bbox->width <= 0 || record.bbox->height <= 0))
    throw Error(Errc::data, "bounding box width and height must be positive");
  if (record.bbox && (record.bbox->x < 0 || record.bbox->y < 0))
    throw Error(Errc::data, "bounding box coordinates must be non-negative");
}

CorpusSplit parse_tsv(std::string_view contents, const LoadOptions& options) {
  const auto lines = split_lines(contents);
  if (lines.empty()) throw Error(Errc::data, "line 1: missing header row");

  std::map<std::string, std::size_t, std::less<>> columns;
  const auto header = split_tabs(lines[0]);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!columns.emplace(std::string(header[i]), i).second)
      fail_at(1, "duplicate column '" + std::string(header[i]) + "'");
  }
  for (const char* required : {"source", "target"}) {
    if (!columns.contains(required)) fail_at(1, std::string("header lacks a '") + required + "' column");
  }
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    const auto it = columns.find(name);
    return it == columns.end() ? std::nullopt : std::optional<std::size_t>(it->second);
  };
  const auto col_id = column("id"), col_src = column("source"), col_tgt = column("target"),
             col_img = column("image_id"), col_lang = column("lang");
  const std::array<std::optional<std::size_t>, 4> col_box = {column("x"), column("y"),
                                                             column("w"), column("h")};

  CorpusSplit split{options.split, {}};
  split.records.reserve(lines.size() - 1);
  std::unordered_set<RecordId> seen;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    const auto fields = split_tabs(lines[li]);
    if (fields.size() != header.size())
      fail_at(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()));
    TranslationRecord r;
    if (col_id) {
      const auto id = parse_int(fields[*col_id], true);
      if (!id) fail_at(line_no, "id is not an integer: '" + std::string(fields[*col_id]) + "'");
      r.id = *id;
    } else {
      r.id = static_cast<RecordId>(li);
    }
    r.source = std::string(fields[*col_src]);
    r.target = std::string(fields[*col_tgt]);
    if (col_img) r.image_id = std::string(fields[*col_img]);
    r.lang = col_lang ? std::string(fields[*col_lang]) : options.default_lang;
    if (r.lang.empty()) r.lang = options.default_lang;
    std::array<std::optional<std::string>, 4> raw_box;
    for (std::size_t i = 0; i < 4; ++i) {
      if (col_box[i]) raw_box[i] = std::string(fields[*col_box[i]]);
    }
    r.bbox = make_bbox(raw_box, line_no);
    check_record(r, line_no);
    check_unique(seen, r.id, line_no);
    split.records.push_back(std::move(r));
  }
  return split;
}

CorpusSplit parse_jsonl(std::string_view contents, const LoadOptions& options) {
  const auto lines = split_lines(contents);
  CorpusSplit split{options.split, {}};
  std::unordered_set<RecordId> seen;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    json row;
    try {
      row = json::parse(lines[li]);
    } catch (const json::parse_error& e) {
      fail_at(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!row.is_object()) fail_at(line_no, "expected a JSON object");
    auto get_string = [&](const char* key, bool required) -> std::string {
      const auto it = row.find(key);
      if (it == row.end() || it->is_null()) {
        if (required) fail_at(line_no, std::string("missing '") + key + "'");
        return {};
      }
      if (!it->is_string()) fail_at(line_no, std::string("'") + key + "' must be a string");
      return it->get<std::string>();
    };
    TranslationRecord r;
    if (const auto it = row.find("id"); it != row.end()) {
      if (!it->is_number_integer()) fail_at(line_no, "'id' must be an integer");
      r.id = it->get<RecordId>();
    } else {
      r.id = static_cast<RecordId>(line_no);
    }
    r.source = get_string("source", true);
    r.target = get_string("target", true);
    r.image_id = get_string("image_id", false);
    r.lang = get_string("lang", false);
    if (r.lang.empty()) r.lang = options.default_lang;
    std::array<std::optional<std::string>, 4> raw_box;
    static constexpr const char* kBox[] = {"x", "y", "w", "h"};
    for (std::size_t i = 0; i < 4; ++i) {
      const auto it = row.find(kBox[i]);
      if (it == row.end() || it->is_null()) continue;
      raw_box[i] = it->is_string() ? it->get<std::string>() : it->dump();
    }
    r.bbox = make_bbox(raw_box, line_no);
    check_record(r, line_no);
    check_unique(seen, r.id, line_no);
    split.records.push_back(std::move(r));
  }
  return split;
}

CorpusSplit load_corpus(const std::filesystem::path& path, const LoadOptions& options) {
  const std::string contents = read_file(path);
  return options.format == CorpusFormat::tsv ? parse_tsv(contents, options)
                                             : parse_jsonl(contents, options);
}

CorpusSplit load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  LoadOptions options;
  options.format = format;
  return load_corpus(path, options);
}

std::string to_tsv(const CorpusSplit& split) {
  const bool with_lang = std::any_of(split.records.begin(), split.records.end(),
                                     [](const TranslationRecord& r) { return !r.lang.empty(); });
  std::string out = "id\tsource\ttarget\timage_id\tx\ty\tw\th";
  if (with_lang) out += "\tlang";
  out += '\n';
  for (const TranslationRecord& r : split.records) {
    for (const std::string* field : {&r.source, &r.target, &r.image_id, &r.lang})
      check_tsv_safe(*field, r.id);
    out += std::to_string(r.id);
    out += '\t' + r.source + '\t' + r.target + '\t' + r.image_id;
    if (r.bbox) {
      out += '\t' + std::to_string(r.bbox->x) + '\t' + std::to_string(r.bbox->y) + '\t' +
             std::to_string(r.bbox->width) + '\t' + std::to_string(r.bbox->height);
    } else {
      out += "\t\t\t\t";
    }
    if (with_lang) out += '\t' + r.lang;
    out += '\n';
  }
  return out;
}

std::string to_jsonl(const CorpusSplit& split) {
  std::string out;
  for (const TranslationRecord& r : split.records) {
    json row = {{"id", r.id}, {"source", r.source}, {"target", r.target}, {"image_id", r.image_id}};
    if (r.bbox) {
      row["x"] = r.bbox->x;
      row["y"] = r.bbox->y;
      row["w"] = r.bbox->width;
      row["h"] = r.bbox->height;
    }
    if (!r.lang.empty()) row["lang"] = r.lang;
    out += row.dump();
    out += '\n';
  }
  return out;
}

void save_corpus(const CorpusSplit& split, const std::filesystem::path& path, CorpusFormat format) {
  write_file(path, format == CorpusFormat::tsv ? to_tsv(split) : to_jsonl(split));
}

AlignmentReport check_alignment(std::span<const CorpusSplit> splits) {
  AlignmentReport report;
  if (splits.empty()) return report;
  const CorpusSplit& first = splits.front();
  for (const CorpusSplit& s : splits) {
    if (s.name != first.name)
      throw Error(Errc::invalid_argument, std::string("cannot align split '") + to_string(s.name) +
                                              "' with '" + to_string(first.name) + "'");
    if (s.size() != first.size())
      throw Error(Errc::invalid_argument, "split lengths differ: " + std::to_string(first.size()) +
                                              " vs " + std::to_string(s.size()));
  }
  report.length = first.size();
  for (std::size_t i = 0; i < first.size(); ++i) {
    const TranslationRecord& ref = first.records[i];
    const bool differs = std::any_of(splits.begin() + 1, splits.end(), [&](const CorpusSplit& s) {
      return s.records[i].source != ref.source || s.records[i].image_id != ref.image_id;
    });
    if (differs) report.mismatches.push_back(i);
  }
  return report;
}

}  // namespace mmtlab::corpus
