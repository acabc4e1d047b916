#include "neurotube/sampling.hpp"

#include "neurotube/error.hpp"
#include "neurotube/rng.hpp"

namespace neurotube {

Volume crop(const Volume& volume, const SubvolumeSpec& spec) {
  const Dims3 end{spec.origin.x + spec.size.x, spec.origin.y + spec.size.y,
                  spec.origin.z + spec.size.z};
  if (!end.fits_in(volume.dims))
    throw ArgumentError("crop: block " + spec.size.str() + " at origin " + spec.origin.str() +
                        " exceeds volume " + volume.dims.str());
  Volume out(spec.size, 0.0f, volume.kind);
  out.spacing = volume.spacing;
  for (std::size_t z = 0; z < spec.size.z; ++z)
    for (std::size_t y = 0; y < spec.size.y; ++y) {
      const float* src = &volume.data[volume.index(spec.origin.x, spec.origin.y + y, spec.origin.z + z)];
      std::copy(src, src + spec.size.x, &out.data[out.index(0, y, z)]);
    }
  return out;
}

SubvolumeSpec random_subvolume_spec(const Dims3& dims, const Dims3& size, std::uint64_t seed,
                                    std::string source_id) {
  if (!size.fits_in(dims) || size.count() == 0)
    throw ArgumentError("random_subvolume: size " + size.str() + " exceeds volume " + dims.str());
  Rng rng(seed);
  SubvolumeSpec spec;
  spec.size = size;
  spec.source_id = std::move(source_id);
  spec.origin.x = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(dims.x - size.x)));
  spec.origin.y = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(dims.y - size.y)));
  spec.origin.z = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(dims.z - size.z)));
  return spec;
}

std::pair<SubvolumeSpec, Volume> random_subvolume(const Volume& volume, const Dims3& size,
                                                  std::uint64_t seed, std::string source_id) {
  auto spec = random_subvolume_spec(volume.dims, size, seed, std::move(source_id));
  return {spec, crop(volume, spec)};
}

namespace {

std::vector<std::size_t> axis_positions(std::size_t dim, std::size_t window) {
  std::vector<std::size_t> pos;
  for (std::size_t p = 0; p + window <= dim; p += window) pos.push_back(p);
  if (pos.back() + window < dim) pos.push_back(dim - window);
  return pos;
}

}  // namespace

std::vector<SubvolumeSpec> sliding_window_tiles(const Dims3& dims, const Dims3& window) {
  if (!window.fits_in(dims) || window.count() == 0)
    throw ArgumentError("sliding_window_tiles: window " + window.str() + " exceeds volume " +
                        dims.str());
  const auto xs = axis_positions(dims.x, window.x);
  const auto ys = axis_positions(dims.y, window.y);
  const auto zs = axis_positions(dims.z, window.z);
  std::vector<SubvolumeSpec> tiles;
  tiles.reserve(xs.size() * ys.size() * zs.size());
  for (auto z : zs)
    for (auto y : ys)
      for (auto x : xs) tiles.push_back({{x, y, z}, window, {}});
  return tiles;
}

Volume rotate90(const Volume& volume, Axis axis, int k) {
  k = ((k % 4) + 4) % 4;
  if (k == 0) return volume;
  const Dims3& d = volume.dims;
  if (k % 2 == 1) {
    const bool square = (axis == Axis::x && d.y == d.z) || (axis == Axis::y && d.x == d.z) ||
                        (axis == Axis::z && d.x == d.y);
    if (!square) throw ArgumentError("rotate90: quarter turn would change shape " + d.str());
  }
  if (k == 2) {
    Volume out = volume;
    for (std::size_t z = 0; z < d.z; ++z)
      for (std::size_t y = 0; y < d.y; ++y)
        for (std::size_t x = 0; x < d.x; ++x) {
          std::size_t nx = x, ny = y, nz = z;
          switch (axis) {
            case Axis::z: nx = d.x - 1 - x; ny = d.y - 1 - y; break;
            case Axis::x: ny = d.y - 1 - y; nz = d.z - 1 - z; break;
            case Axis::y: nx = d.x - 1 - x; nz = d.z - 1 - z; break;
          }
          out.at(nx, ny, nz) = volume.at(x, y, z);
        }
    return out;
  }
  Volume cur = volume;
  for (int step = 0; step < k; ++step) {
    Volume next = cur;
    // One quarter turn maps (a, b) -> (n_b - 1 - b, a) in the rotation plane.
    for (std::size_t z = 0; z < d.z; ++z)
      for (std::size_t y = 0; y < d.y; ++y)
        for (std::size_t x = 0; x < d.x; ++x) {
          std::size_t nx = x, ny = y, nz = z;
          switch (axis) {
            case Axis::z: nx = d.y - 1 - y; ny = x; break;
            case Axis::x: ny = d.z - 1 - z; nz = y; break;
            case Axis::y: nz = d.x - 1 - x; nx = z; break;
          }
          next.at(nx, ny, nz) = cur.at(x, y, z);
        }
    cur = std::move(next);
  }
  return cur;
}

RotationPlan draw_rotation_plan(const Dims3& dims, std::uint64_t seed) {
  Rng rng(seed);
  const bool square[3] = {dims.y == dims.z, dims.x == dims.z, dims.x == dims.y};
  RotationPlan plan{};
  for (int a = 0; a < 3; ++a)
    plan[a] = square[a] ? static_cast<int>(rng.uniform_int(0, 3))
                        : 2 * static_cast<int>(rng.uniform_int(0, 1));
  return plan;
}

Volume apply_rotation_plan(const Volume& volume, const RotationPlan& plan) {
  return rotate90(rotate90(rotate90(volume, Axis::x, plan[0]), Axis::y, plan[1]), Axis::z, plan[2]);
}

std::pair<Volume, Volume> rotate90_augment(const Volume& sample, const Volume& label,
                                           std::uint64_t seed) {
  if (!(sample.dims == label.dims))
    throw ArgumentError("rotate90_augment: sample " + sample.dims.str() + " vs label " +
                        label.dims.str());
  const auto plan = draw_rotation_plan(sample.dims, seed);
  return {apply_rotation_plan(sample, plan), apply_rotation_plan(label, plan)};
}

}  // namespace neurotube
