#include "mmtlab/features.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "mmtlab/corpus.hpp"
#include "mmtlab/error.hpp"

namespace mmtlab::corpus {
namespace {

static_assert(std::endian::native == std::endian::little,
              "feature container I/O assumes a little-endian host");
static_assert(sizeof(float) == 4);

constexpr char kMagic[4] = {'F', 'M', 'A', 'T'};

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    const auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n)
      throw Error(Errc::data, std::string("truncated feature container while reading ") + what +
                                  " at byte " + std::to_string(pos_));
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_features(std::span<const FeatureMatrix> entries) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kFeatureFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const FeatureMatrix& m : entries) {
    if (m.image_id.size() > UINT16_MAX)
      throw Error(Errc::invalid_argument, "image_id longer than 65535 bytes");
    if (std::size_t(m.rows) * m.cols != m.data.size())
      throw Error(Errc::invalid_argument, "feature matrix '" + m.image_id + "' shape does not match data");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(m.image_id.size()));
    out += m.image_id;
    put<std::uint32_t>(out, m.rows);
    put<std::uint32_t>(out, m.cols);
    const auto* raw = reinterpret_cast<const char*>(m.data.data());
    out.append(raw, m.data.size() * sizeof(float));
  }
  return out;
}

FeatureMap decode_features(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(4, "magic") != std::string_view(kMagic, 4))
    throw Error(Errc::data, "feature container magic mismatch (expected FMAT)");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kFeatureFormatVersion)
    throw Error(Errc::data, "unsupported feature container version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>("entry count");

  FeatureMap map;
  for (std::uint32_t e = 0; e < count; ++e) {
    FeatureMatrix m;
    const auto id_len = in.get<std::uint16_t>("image_id length");
    m.image_id = std::string(in.take(id_len, "image_id"));
    m.rows = in.get<std::uint32_t>("rows");
    m.cols = in.get<std::uint32_t>("cols");
    const std::uint64_t n = std::uint64_t(m.rows) * m.cols;
    if (n * sizeof(float) > in.remaining())
      throw Error(Errc::data, "truncated feature container: '" + m.image_id + "' declares " +
                                  std::to_string(m.rows) + "x" + std::to_string(m.cols) +
                                  " but only " + std::to_string(in.remaining()) + " bytes remain");
    const auto payload = in.take(n * sizeof(float), "payload");
    m.data.resize(n);
    std::memcpy(m.data.data(), payload.data(), payload.size());
    for (std::uint64_t i = 0; i < n; ++i) {
      if (!std::isfinite(m.data[i]))
        throw Error(Errc::data, "non-finite value in '" + m.image_id + "' at element " + std::to_string(i));
    }
    const std::string id = m.image_id;
    if (!map.emplace(id, std::move(m)).second)
      throw Error(Errc::data, "duplicate image_id '" + id + "' in feature container");
  }
  if (in.remaining() != 0)
    throw Error(Errc::data, std::to_string(in.remaining()) + " trailing bytes after last entry");
  return map;
}

FeatureMap load_features(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_features(ss.str());
}

void save_features(const std::filesystem::path& path, std::span<const FeatureMatrix> entries,
                   bool write_index) {
  const std::string bytes = encode_features(entries);
  {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error(Errc::io, "write failed: " + path.string());
  }
  if (!write_index) return;
  std::ofstream idx(path.string() + ".idx", std::ios::trunc);
  std::uint64_t offset = 12;
  for (const FeatureMatrix& m : entries) {
    idx << m.image_id << '\t' << offset << '\n';
    offset += 2 + m.image_id.size() + 8 + m.data.size() * sizeof(float);
  }
  if (!idx) throw Error(Errc::io, "write failed: " + path.string() + ".idx");
}

void require_features(const CorpusSplit& split, const FeatureMap& features) {
  std::set<std::string> missing;
  for (const TranslationRecord& r : split.records) {
    if (!features.contains(r.image_id)) missing.insert(r.image_id);
  }
  if (missing.empty()) return;
  std::string list;
  for (const auto& id : missing) list += (list.empty() ? "" : ", ") + ("'" + id + "'");
  throw Error(Errc::not_found, std::to_string(missing.size()) + " image id(s) have no features: " + list);
}

}  // namespace mmtlab::corpus
