#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace neurotube {

struct Dims3 {
  std::size_t x = 0, y = 0, z = 0;

  std::size_t count() const { return x * y * z; }
  bool operator==(const Dims3&) const = default;
  bool fits_in(const Dims3& outer) const { return x <= outer.x && y <= outer.y && z <= outer.z; }
  std::string str() const;
};

struct Spacing {
  float x = 1.0f, y = 1.0f, z = 1.0f;
  bool operator==(const Spacing&) const = default;
};

enum class VolumeKind { raw, mask, prediction };

/// Dense scalar field stored x-fastest: index = x + X * (y + Y * z).
struct Volume {
  Dims3 dims;
  Spacing spacing;
  std::vector<float> data;
  VolumeKind kind = VolumeKind::raw;

  Volume() = default;
  Volume(Dims3 d, float fill = 0.0f, VolumeKind k = VolumeKind::raw);

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + dims.x * (y + dims.y * z);
  }
  float& at(std::size_t x, std::size_t y, std::size_t z) { return data[index(x, y, z)]; }
  float at(std::size_t x, std::size_t y, std::size_t z) const { return data[index(x, y, z)]; }

  /// Intensity sum accumulated in double.
  double sum() const;
  /// Throws DimensionError if data length and dims disagree, ArgumentError if
  /// mask/prediction values break their kind's range.
  void validate() const;
};

// ---- VOL1 binary format -------------------------------------------------
//   0..3   magic "VOL1"
//   4..15  X, Y, Z        u32 little-endian
//   16     dtype code      0 = float32
//   17..28 sx, sy, sz      f32 little-endian
//   29..   payload         f32 little-endian, x-fastest
inline constexpr std::size_t kVol1HeaderBytes = 29;

void write_volume(const Volume& volume, const std::filesystem::path& path);
std::vector<unsigned char> encode_volume(const Volume& volume);

/// Reads a VOL1 file. A file without the magic is accepted as raw float32
/// when a sidecar `<path>.hdr` with `dims = X Y Z` (and optionally
/// `spacing = sx sy sz`) lines exists.
Volume read_volume(const std::filesystem::path& path, VolumeKind kind = VolumeKind::raw);
Volume decode_volume(const std::vector<unsigned char>& bytes, VolumeKind kind = VolumeKind::raw);

// ---- preprocessing ------------------------------------------------------

/// Percentile with linear interpolation between sorted values.
double percentile(std::vector<float> values, double pct);

/// Clamps to the order statistics at floor(low% * (n-1)) and
/// ceil(high% * (n-1)); idempotent.
Volume clip_percentiles(const Volume& volume, double low_pct = 1.0, double high_pct = 99.0);

/// Median over the (2r+1)^3 neighborhood with edge replication.
Volume median_filter3d(const Volume& volume, int radius = 1);

/// (v - min) / (max - min); a constant volume maps to all zeros.
Volume minmax_normalize(const Volume& volume);

struct PreprocessOptions {
  double clip_low_pct = 1.0;
  double clip_high_pct = 99.0;
  int median_radius = 1;
};

/// clip -> median -> min-max, yielding values in [0, 1].
Volume preprocess(const Volume& volume, const PreprocessOptions& options = {});

}  // namespace neurotube
