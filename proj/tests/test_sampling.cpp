#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "neurotube/error.hpp"
#include "neurotube/sampling.hpp"

using namespace neurotube;

namespace {

Volume ramp(Dims3 d) {
  Volume v(d);
  for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = float(i);
  return v;
}

double chi_square(const std::vector<double>& counts, double expected) {
  double s = 0;
  for (double c : counts) s += (c - expected) * (c - expected) / expected;
  return s;
}

}  // namespace

TEST_SUITE("subvolume") {
  TEST_CASE("full-size window has a single origin") {
    const auto s = random_subvolume_spec({16, 8, 4}, {16, 8, 4}, 99);
    CHECK(s.origin == Dims3{0, 0, 0});
  }

  TEST_CASE("deterministic per seed") {
    const Dims3 big{256, 256, 256};
    CHECK(random_subvolume_spec(big, {32, 32, 32}, 5) == random_subvolume_spec(big, {32, 32, 32}, 5));
    CHECK_FALSE(random_subvolume_spec(big, {32, 32, 32}, 5) ==
                random_subvolume_spec(big, {32, 32, 32}, 6));
  }

  TEST_CASE("oversized request") {
    CHECK_THROWS_AS(random_subvolume_spec({8, 8, 8}, {9, 8, 8}, 0), ArgumentError);
  }

  TEST_CASE("crop copies the addressed block") {
    const Volume v = ramp({6, 5, 4});
    const auto [spec, sub] = random_subvolume(v, {3, 2, 2}, 17, "vol0");
    CHECK(spec.source_id == "vol0");
    CHECK(spec.origin.x + 3 <= 6);
    for (std::size_t z = 0; z < 2; ++z)
      for (std::size_t y = 0; y < 2; ++y)
        for (std::size_t x = 0; x < 3; ++x)
          CHECK(sub.at(x, y, z) == v.at(spec.origin.x + x, spec.origin.y + y, spec.origin.z + z));
  }

  TEST_CASE("origins are uniform over all valid positions") {
    // 64^3 volume, 32^3 window: 33 positions per axis.
    std::vector<double> ax(33), ay(33), az(33), coarse(27);
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      const auto s = random_subvolume_spec({64, 64, 64}, {32, 32, 32}, 1000 + i);
      REQUIRE(s.origin.x <= 32);
      REQUIRE(s.origin.y <= 32);
      REQUIRE(s.origin.z <= 32);
      ax[s.origin.x] += 1;
      ay[s.origin.y] += 1;
      az[s.origin.z] += 1;
      coarse[s.origin.x / 11 + 3 * (s.origin.y / 11) + 9 * (s.origin.z / 11)] += 1;
    }
    // chi-square critical values at alpha = 0.01
    const double crit32 = 53.48577, crit26 = 45.64168;
    CHECK(chi_square(ax, n / 33.0) < crit32);
    CHECK(chi_square(ay, n / 33.0) < crit32);
    CHECK(chi_square(az, n / 33.0) < crit32);
    CHECK(chi_square(coarse, n / 27.0) < crit26);
  }
}

TEST_SUITE("tiles") {
  TEST_CASE("even grid") { CHECK(sliding_window_tiles({64, 64, 64}, {32, 32, 32}).size() == 8); }

  TEST_CASE("boundary-aligned extra tile") {
    const auto t = sliding_window_tiles({65, 64, 64}, {32, 32, 32});
    CHECK(t.size() == 12);
    std::vector<std::size_t> xs;
    for (const auto& s : t) xs.push_back(s.origin.x);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    CHECK(xs == std::vector<std::size_t>{0, 32, 33});
  }

  TEST_CASE("window equal to dims") {
    const auto t = sliding_window_tiles({10, 9, 8}, {10, 9, 8});
    REQUIRE(t.size() == 1);
    CHECK(t[0].origin == Dims3{0, 0, 0});
  }

  TEST_CASE("order is z, then y, then x") {
    const auto t = sliding_window_tiles({4, 4, 4}, {2, 2, 2});
    CHECK(t[1].origin == Dims3{2, 0, 0});
    CHECK(t[2].origin == Dims3{0, 2, 0});
    CHECK(t[4].origin == Dims3{0, 0, 2});
  }

  TEST_CASE("window exceeding dims") {
    CHECK_THROWS_AS(sliding_window_tiles({8, 8, 8}, {8, 16, 8}), ArgumentError);
  }

  TEST_CASE("union of tiles covers every voxel") {
    for (Dims3 d : {Dims3{65, 64, 64}, Dims3{37, 20, 9}, Dims3{5, 7, 3}}) {
      const Dims3 w{std::min<std::size_t>(d.x, 16), std::min<std::size_t>(d.y, 16), 3};
      Volume hits(d);
      for (const auto& s : sliding_window_tiles(d, w)) {
        CHECK(s.size == w);
        CHECK(s.origin.x + w.x <= d.x);
        for (std::size_t z = 0; z < w.z; ++z)
          for (std::size_t y = 0; y < w.y; ++y)
            for (std::size_t x = 0; x < w.x; ++x)
              hits.at(s.origin.x + x, s.origin.y + y, s.origin.z + z) += 1;
      }
      CHECK(*std::min_element(hits.data.begin(), hits.data.end()) >= 1.0f);
    }
  }
}

TEST_SUITE("rotation") {
  TEST_CASE("k = 0 is the identity") {
    const Volume v = ramp({4, 3, 2});
    CHECK(apply_rotation_plan(v, {0, 0, 0}).data == v.data);
  }

  TEST_CASE("four quarter-turns return to the start") {
    const Volume v = ramp({4, 4, 4});
    for (Axis a : {Axis::x, Axis::y, Axis::z}) {
      Volume r = v;
      for (int i = 0; i < 4; ++i) r = rotate90(r, a, 1);
      CHECK(r.data == v.data);
      CHECK(rotate90(v, a, 4).data == v.data);
      CHECK_FALSE(rotate90(v, a, 1).data == v.data);
    }
  }

  TEST_CASE("quarter-turn about z moves voxels in the xy plane") {
    const Volume v = ramp({3, 3, 2});
    const Volume r = rotate90(v, Axis::z, 1);
    // Each z-slice's corner set is preserved.
    std::vector<float> before{v.at(0, 0, 1), v.at(2, 0, 1), v.at(0, 2, 1), v.at(2, 2, 1)};
    std::vector<float> after{r.at(0, 0, 1), r.at(2, 0, 1), r.at(0, 2, 1), r.at(2, 2, 1)};
    std::sort(before.begin(), before.end());
    std::sort(after.begin(), after.end());
    CHECK(before == after);
    CHECK(r.at(1, 1, 0) == v.at(1, 1, 0));
  }

  TEST_CASE("odd turns on a non-square plane are rejected") {
    CHECK_THROWS(rotate90(ramp({4, 2, 2}), Axis::z, 1));
    CHECK(rotate90(ramp({4, 2, 2}), Axis::z, 2).dims == Dims3{4, 2, 2});
  }

  TEST_CASE("multiset of values is preserved") {
    std::mt19937_64 gen(3);
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Dims3 d = s % 2 ? Dims3{8, 8, 4} : Dims3{6, 6, 6};
      Volume v(d);
      for (auto& x : v.data) x = float(gen() % 1000);
      const auto plan = draw_rotation_plan(d, s);
      const Volume r = apply_rotation_plan(v, plan);
      CHECK(r.dims == d);
      auto a = v.data, b = r.data;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      CHECK(a == b);
    }
  }

  TEST_CASE("augmentation moves sample and label together") {
    Volume s = ramp({6, 6, 6});
    Volume m(s.dims, 0.0f, VolumeKind::mask);
    for (std::size_t i = 0; i < m.data.size(); i += 7) m.data[i] = 1.0f;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto [rs, rm] = rotate90_augment(s, m, seed);
      for (std::size_t i = 0; i < rs.data.size(); ++i)
        CHECK(rm.data[i] == (std::size_t(rs.data[i]) % 7 == 0 ? 1.0f : 0.0f));
    }
    CHECK_THROWS_AS(rotate90_augment(s, Volume({6, 6, 5}), 0), ArgumentError);
  }

  TEST_CASE("pure function of input and seed") {
    const Volume s = ramp({6, 6, 6});
    CHECK(rotate90_augment(s, s, 42).first.data == rotate90_augment(s, s, 42).first.data);
  }
}
