#include "neurotube/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "neurotube/error.hpp"
#include "neurotube/rng.hpp"

namespace neurotube {

void PhantomConfig::validate() const {
  if (dims.count() == 0) throw ArgumentError("phantom: dims must be positive");
  if (!(spacing.x > 0 && spacing.y > 0 && spacing.z > 0))
    throw ArgumentError("phantom: spacing must be positive");
  if (!(radius_min_um > 0 && radius_min_um <= radius_max_um))
    throw ArgumentError("phantom: need 0 < radius_min <= radius_max");
  const double min_extent_um =
      std::min({dims.x * double(spacing.x), dims.y * double(spacing.y), dims.z * double(spacing.z)});
  if (radius_max_um >= min_extent_um / 2)
    throw ArgumentError("phantom: radius " + std::to_string(radius_max_um) +
                        " um is not below half the smallest extent (" +
                        std::to_string(min_extent_um / 2) + " um)");
  if (!(noise_ceiling >= 0 && intensity_min > noise_ceiling && intensity_min <= intensity_max &&
        intensity_max <= 1.0))
    throw ArgumentError("phantom: need noise_ceiling < intensity_min <= intensity_max <= 1");
  if (wander < 0 || drift_max < 0) throw ArgumentError("phantom: wander and drift must be >= 0");
}

namespace {

struct Point {
  double x, y, z;  // voxel coordinates
};

// Squared distance in micrometers from p to segment ab.
double segment_dist2_um(const Point& p, const Point& a, const Point& b, const Spacing& s) {
  const double abx = (b.x - a.x) * s.x, aby = (b.y - a.y) * s.y, abz = (b.z - a.z) * s.z;
  const double apx = (p.x - a.x) * s.x, apy = (p.y - a.y) * s.y, apz = (p.z - a.z) * s.z;
  const double len2 = abx * abx + aby * aby + abz * abz;
  double t = len2 > 0 ? (apx * abx + apy * aby + apz * abz) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = apx - t * abx, dy = apy - t * aby, dz = apz - t * abz;
  return dx * dx + dy * dy + dz * dz;
}

void draw_tube(const PhantomConfig& c, std::size_t tube, Volume& raw, Volume& mask) {
  Rng rng(derive_seed(c.seed, {1, tube}));
  const double radius = rng.uniform(c.radius_min_um, c.radius_max_um);
  const double intensity = rng.uniform(c.intensity_min, c.intensity_max);
  const double rx = radius / c.spacing.x, ry = radius / c.spacing.y, rz = radius / c.spacing.z;
  const auto& d = c.dims;
  double x = rng.uniform(std::min(rx, d.x / 2.0), std::max(d.x - rx, d.x / 2.0));
  double y = rng.uniform(std::min(ry, d.y / 2.0), std::max(d.y - ry, d.y / 2.0));
  double vx = rng.uniform(-c.drift_max, c.drift_max);
  double vy = rng.uniform(-c.drift_max, c.drift_max);

  // Centerline sampled once per z step, extended one step past each face.
  std::vector<Point> line;
  for (long z = -1; z <= static_cast<long>(d.z); ++z) {
    line.push_back({x, y, static_cast<double>(z)});
    vx = std::clamp(vx + c.wander * rng.normal(), -c.drift_max, c.drift_max);
    vy = std::clamp(vy + c.wander * rng.normal(), -c.drift_max, c.drift_max);
    x += vx;
    y += vy;
  }

  const double r2 = radius * radius;
  auto lo = [](double v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp(std::floor(v), 0.0, double(n) - 1));
  };
  auto hi = [](double v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp(std::ceil(v), 0.0, double(n) - 1));
  };
  for (std::size_t s = 0; s + 1 < line.size(); ++s) {
    const Point& a = line[s];
    const Point& b = line[s + 1];
    const double bx0 = std::min(a.x, b.x) - rx, bx1 = std::max(a.x, b.x) + rx;
    const double by0 = std::min(a.y, b.y) - ry, by1 = std::max(a.y, b.y) + ry;
    const double bz0 = std::min(a.z, b.z) - rz, bz1 = std::max(a.z, b.z) + rz;
    if (bx1 < 0 || by1 < 0 || bz1 < 0 || bx0 > d.x - 1.0 || by0 > d.y - 1.0 || bz0 > d.z - 1.0)
      continue;
    for (std::size_t vz = lo(bz0, d.z); vz <= hi(bz1, d.z); ++vz)
      for (std::size_t vy2 = lo(by0, d.y); vy2 <= hi(by1, d.y); ++vy2)
        for (std::size_t vx2 = lo(bx0, d.x); vx2 <= hi(bx1, d.x); ++vx2) {
          const Point p{double(vx2), double(vy2), double(vz)};
          if (segment_dist2_um(p, a, b, c.spacing) <= r2) {
            mask.at(vx2, vy2, vz) = 1.0f;
            float& r = raw.at(vx2, vy2, vz);
            r = std::max(r, static_cast<float>(intensity));
          }
        }
  }
}

}  // namespace

Phantom generate_phantom(const PhantomConfig& config) {
  config.validate();
  Phantom p{Volume(config.dims, 0.0f, VolumeKind::raw), Volume(config.dims, 0.0f, VolumeKind::mask)};
  p.raw.spacing = p.mask.spacing = config.spacing;
  Rng noise(derive_seed(config.seed, {0}));
  for (auto& v : p.raw.data) v = static_cast<float>(noise.uniform(0.0, config.noise_ceiling));
  for (std::size_t t = 0; t < config.n_tubes; ++t) draw_tube(config, t, p.raw, p.mask);
  return p;
}

double mask_fraction(const Volume& mask) {
  if (mask.data.empty()) return 0.0;
  std::size_t n = 0;
  for (float v : mask.data) n += v >= 0.5f;
  return static_cast<double>(n) / static_cast<double>(mask.data.size());
}

std::uint64_t dataset_volume_seed(std::uint64_t base_seed, std::size_t index) {
  return derive_seed(base_seed, {0x766f6c756d65ULL, index});
}

std::vector<ManifestEntry> generate_dataset(const PhantomConfig& config, std::size_t n_volumes,
                                            const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<ManifestEntry> manifest;
  for (std::size_t i = 0; i < n_volumes; ++i) {
    PhantomConfig c = config;
    c.seed = dataset_volume_seed(config.seed, i);
    const Phantom p = generate_phantom(c);
    char raw_name[32], mask_name[32];
    std::snprintf(raw_name, sizeof raw_name, "raw_%03zu.vol", i);
    std::snprintf(mask_name, sizeof mask_name, "mask_%03zu.vol", i);
    write_volume(p.raw, out_dir / raw_name);
    write_volume(p.mask, out_dir / mask_name);
    manifest.push_back({i, c.seed, raw_name, mask_name, mask_fraction(p.mask)});
  }
  const auto path = out_dir / "manifest.txt";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& e : manifest) {
    char frac[32];
    std::snprintf(frac, sizeof frac, "%.9f", e.mask_fraction);
    out << "index=" << e.index << " seed=" << e.seed << " raw=" << e.raw_file
        << " mask=" << e.mask_file << " mask_fraction=" << frac << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
  return manifest;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string tok;
    ManifestEntry e;
    while (row >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw FormatError(path.string() + ": bad token '" + tok + "'");
      const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      if (key == "index") e.index = std::stoull(val);
      else if (key == "seed") e.seed = std::stoull(val);
      else if (key == "raw") e.raw_file = val;
      else if (key == "mask") e.mask_file = val;
      else if (key == "mask_fraction") e.mask_fraction = std::stod(val);
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace neurotube
