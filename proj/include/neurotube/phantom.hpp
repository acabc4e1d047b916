#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "neurotube/volume.hpp"

namespace neurotube {

/// Synthetic tube phantom: bright random-walk tubes drifting along z over a
/// uniform noise floor. Radii are in micrometers and converted to voxels
/// with `spacing`.
struct PhantomConfig {
  Dims3 dims{64, 64, 64};
  Spacing spacing{};
  std::size_t n_tubes = 24;
  double radius_min_um = 1.5;
  double radius_max_um = 3.0;
  double intensity_min = 0.5;  // must exceed noise_ceiling
  double intensity_max = 1.0;
  double noise_ceiling = 0.2;
  double wander = 0.3;      // stddev of the centerline's lateral velocity change per z step
  double drift_max = 1.0;   // per-tube initial lateral velocity, |v| <= drift_max per axis
  std::uint64_t seed = 0;

  void validate() const;
};

struct Phantom {
  Volume raw;
  Volume mask;
};

/// Deterministic given config.seed. Tube i depends only on (seed, i), so
/// raising n_tubes adds tubes without moving the existing ones.
Phantom generate_phantom(const PhantomConfig& config);

struct ManifestEntry {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::string raw_file;
  std::string mask_file;
  double mask_fraction = 0;
};

/// Writes raw_NNN.vol / mask_NNN.vol pairs plus manifest.txt into out_dir.
std::vector<ManifestEntry> generate_dataset(const PhantomConfig& config, std::size_t n_volumes,
                                            const std::filesystem::path& out_dir);

/// Seed used for volume `index` of a dataset.
std::uint64_t dataset_volume_seed(std::uint64_t base_seed, std::size_t index);

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

double mask_fraction(const Volume& mask);

}  // namespace neurotube
