#include "neurotube/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "neurotube/error.hpp"

namespace neurotube {

std::string Dims3::str() const {
  return std::to_string(x) + "x" + std::to_string(y) + "x" + std::to_string(z);
}

Volume::Volume(Dims3 d, float fill, VolumeKind k) : dims(d), data(d.count(), fill), kind(k) {}

double Volume::sum() const {
  double s = 0;
  for (float v : data) s += v;
  return s;
}

void Volume::validate() const {
  if (data.size() != dims.count())
    throw DimensionError("volume " + dims.str() + " holds " + std::to_string(data.size()) +
                         " values");
  if (kind == VolumeKind::mask) {
    for (float v : data)
      if (v != 0.0f && v != 1.0f) throw ArgumentError("mask volume contains non-binary value");
  } else if (kind == VolumeKind::prediction) {
    for (float v : data)
      if (!(v >= 0.0f && v <= 1.0f)) throw ArgumentError("prediction volume value outside [0,1]");
  }
}

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f32(std::vector<unsigned char>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t checked_dim(std::size_t d) {
  if (d == 0 || d > std::numeric_limits<std::uint32_t>::max())
    throw DimensionError("volume dimension out of range: " + std::to_string(d));
  return static_cast<std::uint32_t>(d);
}

Volume read_raw_with_sidecar(const std::vector<unsigned char>& bytes,
                             const std::filesystem::path& sidecar, VolumeKind kind) {
  std::ifstream in(sidecar);
  if (!in) throw IoError("cannot open " + sidecar.string());
  Volume v;
  v.kind = kind;
  bool have_dims = false;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    std::istringstream val(line.substr(eq + 1));
    if (key == "dims") {
      if (!(val >> v.dims.x >> v.dims.y >> v.dims.z))
        throw FormatError(sidecar.string() + ": malformed dims line");
      have_dims = true;
    } else if (key == "spacing") {
      if (!(val >> v.spacing.x >> v.spacing.y >> v.spacing.z))
        throw FormatError(sidecar.string() + ": malformed spacing line");
    }
  }
  if (!have_dims) throw FormatError(sidecar.string() + ": missing dims");
  const std::size_t expected = 4 * v.dims.count();
  if (bytes.size() != expected)
    throw FormatError("raw volume: expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(bytes.size()));
  v.data.resize(v.dims.count());
  for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = get_f32(bytes.data() + 4 * i);
  return v;
}

}  // namespace

std::vector<unsigned char> encode_volume(const Volume& volume) {
  if (volume.data.size() != volume.dims.count())
    throw DimensionError("volume " + volume.dims.str() + " holds " +
                         std::to_string(volume.data.size()) + " values");
  std::vector<unsigned char> out;
  out.reserve(kVol1HeaderBytes + 4 * volume.data.size());
  for (char c : {'V', 'O', 'L', '1'}) out.push_back(static_cast<unsigned char>(c));
  put_u32(out, checked_dim(volume.dims.x));
  put_u32(out, checked_dim(volume.dims.y));
  put_u32(out, checked_dim(volume.dims.z));
  out.push_back(0);
  put_f32(out, volume.spacing.x);
  put_f32(out, volume.spacing.y);
  put_f32(out, volume.spacing.z);
  for (float f : volume.data) put_f32(out, f);
  return out;
}

Volume decode_volume(const std::vector<unsigned char>& bytes, VolumeKind kind) {
  if (bytes.size() < kVol1HeaderBytes || std::memcmp(bytes.data(), "VOL1", 4) != 0)
    throw FormatError("bad magic: not a VOL1 volume");
  Volume v;
  v.kind = kind;
  v.dims = {get_u32(&bytes[4]), get_u32(&bytes[8]), get_u32(&bytes[12])};
  if (v.dims.count() == 0) throw FormatError("VOL1 header has a zero dimension");
  if (bytes[16] != 0)
    throw UnsupportedDtypeError("unsupported dtype code " + std::to_string(int(bytes[16])));
  v.spacing = {get_f32(&bytes[17]), get_f32(&bytes[21]), get_f32(&bytes[25])};
  const std::size_t expected = kVol1HeaderBytes + 4 * v.dims.count();
  if (bytes.size() != expected)
    throw FormatError("VOL1 length mismatch: expected " + std::to_string(expected) +
                      " bytes, got " + std::to_string(bytes.size()));
  v.data.resize(v.dims.count());
  const unsigned char* p = bytes.data() + kVol1HeaderBytes;
  for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = get_f32(p + 4 * i);
  return v;
}

void write_volume(const Volume& volume, const std::filesystem::path& path) {
  const auto bytes = encode_volume(volume);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Volume read_volume(const std::filesystem::path& path, VolumeKind kind) {
  const auto bytes = slurp(path);
  const bool has_magic = bytes.size() >= 4 && std::memcmp(bytes.data(), "VOL1", 4) == 0;
  if (!has_magic) {
    auto sidecar = path;
    sidecar += ".hdr";
    if (std::filesystem::exists(sidecar)) return read_raw_with_sidecar(bytes, sidecar, kind);
  }
  try {
    return decode_volume(bytes, kind);
  } catch (const FormatError& e) {
    if (dynamic_cast<const UnsupportedDtypeError*>(&e))
      throw UnsupportedDtypeError(path.string() + ": " + e.what());
    throw FormatError(path.string() + ": " + e.what());
  }
}

double percentile(std::vector<float> values, double pct) {
  if (values.empty()) throw ArgumentError("percentile of empty data");
  std::sort(values.begin(), values.end());
  const double rank = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (static_cast<double>(values[hi]) - values[lo]);
}

Volume clip_percentiles(const Volume& volume, double low_pct, double high_pct) {
  if (volume.data.empty()) throw ArgumentError("clip_percentiles: empty volume");
  if (!(low_pct >= 0 && low_pct < high_pct && high_pct <= 100))
    throw ArgumentError("clip_percentiles: need 0 <= low < high <= 100");
  // Outward order statistics: an interpolated bound would move on a second
  // pass, and clipping must be idempotent.
  std::vector<float> sorted = volume.data;
  std::sort(sorted.begin(), sorted.end());
  const double last = static_cast<double>(sorted.size() - 1);
  const float lo = sorted[static_cast<std::size_t>(std::floor(low_pct / 100.0 * last))];
  const float hi = sorted[static_cast<std::size_t>(std::ceil(high_pct / 100.0 * last))];
  Volume out = volume;
  for (auto& v : out.data) v = std::clamp(v, lo, hi);
  return out;
}

Volume median_filter3d(const Volume& volume, int radius) {
  if (radius < 1) throw ArgumentError("median_filter3d: radius must be >= 1");
  const auto& d = volume.dims;
  Volume out = volume;
  const std::size_t side = 2 * static_cast<std::size_t>(radius) + 1;
  std::vector<float> hood(side * side * side);
  const std::size_t mid = hood.size() / 2;
  auto clampi = [](long v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(n) - 1));
  };
  for (std::size_t z = 0; z < d.z; ++z)
    for (std::size_t y = 0; y < d.y; ++y)
      for (std::size_t x = 0; x < d.x; ++x) {
        std::size_t k = 0;
        for (int dz = -radius; dz <= radius; ++dz) {
          const std::size_t zz = clampi(static_cast<long>(z) + dz, d.z);
          for (int dy = -radius; dy <= radius; ++dy) {
            const std::size_t yy = clampi(static_cast<long>(y) + dy, d.y);
            for (int dx = -radius; dx <= radius; ++dx)
              hood[k++] = volume.at(clampi(static_cast<long>(x) + dx, d.x), yy, zz);
          }
        }
        std::nth_element(hood.begin(), hood.begin() + static_cast<std::ptrdiff_t>(mid), hood.end());
        out.at(x, y, z) = hood[mid];
      }
  return out;
}

Volume minmax_normalize(const Volume& volume) {
  Volume out = volume;
  if (volume.data.empty()) return out;
  const auto [mn, mx] = std::minmax_element(volume.data.begin(), volume.data.end());
  const double lo = *mn, range = static_cast<double>(*mx) - lo;
  for (auto& v : out.data)
    v = range > 0 ? static_cast<float>((v - lo) / range) : 0.0f;
  return out;
}

Volume preprocess(const Volume& volume, const PreprocessOptions& options) {
  return minmax_normalize(median_filter3d(
      clip_percentiles(volume, options.clip_low_pct, options.clip_high_pct), options.median_radius));
}

}  // namespace neurotube
