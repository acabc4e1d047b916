#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

#include "neurotube/error.hpp"
#include "neurotube/metrics.hpp"
#include "neurotube/phantom.hpp"

using namespace neurotube;
namespace fs = std::filesystem;

TEST_SUITE("phantom") {
  TEST_CASE("no tubes: empty mask, noise-only raw") {
    PhantomConfig c;
    c.n_tubes = 0;
    c.seed = 3;
    const auto p = generate_phantom(c);
    for (float m : p.mask.data) CHECK(m == 0.0f);
    for (float r : p.raw.data) {
      CHECK(r >= 0.0f);
      CHECK(r <= 0.2f);
    }
  }

  TEST_CASE("straight axial tube matches the cylinder volume") {
    for (double r : {2.0, 3.0, 4.5}) {
      PhantomConfig c;
      c.dims = {40, 40, 48};
      c.n_tubes = 1;
      c.radius_min_um = c.radius_max_um = r;
      c.drift_max = 0;
      c.wander = 0;
      c.seed = 11;
      const auto p = generate_phantom(c);
      const double expected = std::numbers::pi * r * r * 48;
      CHECK(std::abs(p.mask.sum() - expected) / expected < 0.15);
    }
  }

  TEST_CASE("same seed, same volumes") {
    PhantomConfig c;
    c.seed = 5;
    const auto a = generate_phantom(c), b = generate_phantom(c);
    CHECK(a.raw.data == b.raw.data);
    CHECK(a.mask.data == b.mask.data);
  }

  TEST_CASE("tubes are brighter than every noise voxel") {
    PhantomConfig c;
    c.seed = 8;
    const auto p = generate_phantom(c);
    for (std::size_t i = 0; i < p.raw.data.size(); ++i)
      if (p.mask.data[i] == 1.0f) CHECK(p.raw.data[i] >= float(c.intensity_min));
  }

  TEST_CASE("midpoint threshold recovers the mask") {
    for (std::uint64_t seed : {1, 2, 3}) {
      PhantomConfig c;
      c.seed = seed;
      const auto p = generate_phantom(c);
      Volume pred = p.raw;
      pred.kind = VolumeKind::prediction;
      const double t = (c.noise_ceiling + c.intensity_min) / 2;
      CHECK(threshold_metrics(pred, p.mask, t).f1 >= 0.95);
    }
  }

  TEST_CASE("mask fraction grows with the tube count") {
    PhantomConfig c;
    c.seed = 4;
    double prev = 0;
    for (std::size_t n : {0, 1, 4, 8, 16, 32}) {
      c.n_tubes = n;
      const double f = mask_fraction(generate_phantom(c).mask);
      CHECK(f >= prev);
      prev = f;
    }
    CHECK(prev > 0);
  }

  TEST_CASE("infeasible configs") {
    PhantomConfig c;
    c.radius_min_um = c.radius_max_um = 40;
    CHECK_THROWS_AS(generate_phantom(c), ArgumentError);
    c = PhantomConfig{};
    c.intensity_min = 0.1;  // below the noise ceiling
    CHECK_THROWS_AS(generate_phantom(c), ArgumentError);
  }
}

TEST_SUITE("dataset") {
  TEST_CASE("files, manifest and recount") {
    const fs::path dir = fs::temp_directory_path() / "nt_phantom_dataset";
    fs::remove_all(dir);
    PhantomConfig c;
    c.dims = {24, 24, 16};
    c.n_tubes = 6;
    c.seed = 77;
    const auto entries = generate_dataset(c, 3, dir);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir)) files += e.is_regular_file();
    CHECK(files == 7);
    const auto manifest = read_manifest(dir / "manifest.txt");
    REQUIRE(manifest.size() == 3);
    std::set<std::vector<float>> raws;
    for (const auto& e : manifest) {
      const Volume mask = read_volume(dir / e.mask_file, VolumeKind::mask);
      CHECK(std::abs(mask_fraction(mask) - e.mask_fraction) < 1e-6);
      raws.insert(read_volume(dir / e.raw_file).data);
      CHECK(e.seed == dataset_volume_seed(77, e.index));
    }
    CHECK(raws.size() == 3);
    fs::remove_all(dir);
  }

  TEST_CASE("unwritable output directory") {
    PhantomConfig c;
    c.dims = {8, 8, 8};
    c.radius_min_um = c.radius_max_um = 1;
    CHECK_THROWS_AS(generate_dataset(c, 1, "/proc/nt_no_such_dir"), IoError);
  }
}
