#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmtlab::corpus {

struct CorpusSplit;

/// Precomputed image-patch features, n patches by d_img dimensions.
struct FeatureMatrix {
  std::string image_id;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> data;  // row-major

  float at(std::uint32_t r, std::uint32_t c) const { return data[std::size_t(r) * cols + c]; }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

using FeatureMap = std::map<std::string, FeatureMatrix, std::less<>>;

inline constexpr std::uint32_t kFeatureFormatVersion = 1;

/// Binary layout (little-endian): "FMAT", u32 version, u32 count, then per
/// entry u16 id length, id bytes, u32 rows, u32 cols, rows*cols f32.
std::string encode_features(std::span<const FeatureMatrix> entries);
FeatureMap decode_features(std::string_view bytes);

FeatureMap load_features(const std::filesystem::path& path);

/// Writes the container; with `write_index` also writes `<path>.idx`
/// (image_id TAB byte-offset per line).
void save_features(const std::filesystem::path& path, std::span<const FeatureMatrix> entries,
                   bool write_index = false);

/// Throws Error(Errc::not_found) listing every image_id of `split` that has
/// no entry in `features`.
void require_features(const CorpusSplit& split, const FeatureMap& features);

}  // namespace mmtlab::corpus
