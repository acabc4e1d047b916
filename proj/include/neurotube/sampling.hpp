#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "neurotube/volume.hpp"

namespace neurotube {

struct SubvolumeSpec {
  Dims3 origin;
  Dims3 size;
  std::string source_id;

  bool operator==(const SubvolumeSpec&) const = default;
};

/// Copies the block described by `spec` out of `volume`.
Volume crop(const Volume& volume, const SubvolumeSpec& spec);

/// Origin drawn uniformly over all valid positions for `size`.
SubvolumeSpec random_subvolume_spec(const Dims3& dims, const Dims3& size, std::uint64_t seed,
                                    std::string source_id = {});

std::pair<SubvolumeSpec, Volume> random_subvolume(const Volume& volume, const Dims3& size,
                                                  std::uint64_t seed, std::string source_id = {});

/// Stride == window per axis, plus one boundary-aligned tile (origin
/// dim - window) when an axis does not divide evenly. Ordered z, then y,
/// then x (x innermost).
std::vector<SubvolumeSpec> sliding_window_tiles(const Dims3& dims, const Dims3& window);

enum class Axis { x, y, z };

/// k quarter-turns about `axis`. An odd k requires the two in-plane
/// extents to match.
Volume rotate90(const Volume& volume, Axis axis, int k);

/// Quarter-turn counts applied about x, then y, then z.
using RotationPlan = std::array<int, 3>;

/// Draws a shape-preserving plan: k uniform in {0..3} when the plane is
/// square, otherwise k uniform in {0, 2}.
RotationPlan draw_rotation_plan(const Dims3& dims, std::uint64_t seed);

Volume apply_rotation_plan(const Volume& volume, const RotationPlan& plan);

/// Same random rotation applied to sample and label.
std::pair<Volume, Volume> rotate90_augment(const Volume& sample, const Volume& label,
                                           std::uint64_t seed);

}  // namespace neurotube
