#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>
#include <set>

#include "neurotube/error.hpp"
#include "neurotube/permtask.hpp"

using namespace neurotube;

namespace {

// Slice z holds the value z everywhere.
Volume labeled_slices(Dims3 d) {
  Volume v(d);
  for (std::size_t z = 0; z < d.z; ++z)
    for (std::size_t y = 0; y < d.y; ++y)
      for (std::size_t x = 0; x < d.x; ++x) v.at(x, y, z) = float(z);
  return v;
}

Volume random_volume(Dims3 d, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<float> u(0, 1);
  Volume v(d);
  for (auto& x : v.data) x = u(gen);
  return v;
}

void exhaustive_check(const PermutationSet& s, std::size_t z, std::size_t n, std::size_t minh) {
  REQUIRE(s.perms.size() == n);
  for (const auto& p : s.perms) {
    REQUIRE(p.size() == z);
    std::vector<std::size_t> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < z; ++i) CHECK(sorted[i] == i);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      std::size_t d = 0;
      for (std::size_t k = 0; k < z; ++k) d += s.perms[i][k] != s.perms[j][k];
      CHECK(d >= minh);
    }
}

}  // namespace

TEST_SUITE("hamming") {
  TEST_CASE("examples") {
    const Permutation id{0, 1, 2, 3, 4, 5, 6, 7};
    CHECK(hamming_distance(id, id) == 0);
    CHECK(hamming_distance({0, 1, 2}, {1, 0, 2}) == 2);
    CHECK(hamming_distance(id, {5, 2, 1, 7, 0, 4, 6, 3}) == 7);
  }

  TEST_CASE("length mismatch") {
    CHECK_THROWS_AS(hamming_distance({0, 1}, {0, 1, 2}), ArgumentError);
  }

  TEST_CASE("inverse composes to the identity") {
    std::mt19937_64 gen(1);
    for (int t = 0; t < 50; ++t) {
      Permutation p(9);
      std::iota(p.begin(), p.end(), 0);
      std::shuffle(p.begin(), p.end(), gen);
      const auto q = inverse_permutation(p);
      for (std::size_t i = 0; i < p.size(); ++i) CHECK(q[p[i]] == i);
    }
    CHECK_FALSE(is_permutation_of_range({0, 0, 1}));
  }
}

TEST_SUITE("permutation set") {
  TEST_CASE("Z=2 yields both orders") {
    const auto s = generate_permutation_set(2, 2, 2, 4);
    std::set<Permutation> got(s.perms.begin(), s.perms.end());
    CHECK(got == std::set<Permutation>{{0, 1}, {1, 0}});
  }

  TEST_CASE("Z=3, N=6 enumerates every permutation") {
    const auto s = generate_permutation_set(3, 6, 2, 8);
    exhaustive_check(s, 3, 6, 2);
    CHECK(std::set<Permutation>(s.perms.begin(), s.perms.end()).size() == 6);
  }

  TEST_CASE("Z=8, N=10 at the default distance") {
    for (std::uint64_t seed : {0, 1, 2, 3}) {
      const auto s = generate_permutation_set(8, 10, 7, seed);
      exhaustive_check(s, 8, 10, 7);
      CHECK_NOTHROW(s.verify());
    }
  }

  TEST_CASE("ten mutual derangements of 8 slices cannot exist") {
    // Each position can hold each value in at most one permutation.
    for (std::uint64_t seed : {0, 1}) {
      try {
        generate_permutation_set(8, 10, 8, seed);
        FAIL("expected GenerationError");
      } catch (const GenerationError& e) {
        CHECK(e.achieved() <= 8);
      }
    }
  }

  TEST_CASE("deterministic per seed") {
    CHECK(generate_permutation_set(8, 10, 7, 5).perms == generate_permutation_set(8, 10, 7, 5).perms);
  }

  TEST_CASE("verify catches violations") {
    auto s = generate_permutation_set(4, 3, 2, 1);
    s.perms[1] = s.perms[0];
    CHECK_THROWS_AS(s.verify(), ArgumentError);
  }

  TEST_CASE("text round trip") {
    const auto s = generate_permutation_set(8, 10, 7, 11);
    const auto r = parse_permutation_set(format_permutation_set(s));
    CHECK(r.perms == s.perms);
    CHECK(r.min_hamming == 7);
    CHECK(r.seed == 11);
    const auto path = std::filesystem::temp_directory_path() / "nt_perms_test.txt";
    write_permutation_set(s, path);
    CHECK(read_permutation_set(path).perms == s.perms);
    std::filesystem::remove(path);
    CHECK_THROWS(parse_permutation_set("permset z=3 n=1 min_hamming=1 seed=0\n0 1 1\n"));
  }
}

TEST_SUITE("slice permutation") {
  TEST_CASE("identity leaves the volume unchanged") {
    const Volume v = random_volume({3, 4, 8}, 2);
    CHECK(apply_slice_permutation(v, {0, 1, 2, 3, 4, 5, 6, 7}).data == v.data);
  }

  TEST_CASE("gather order for the worked permutation") {
    const Permutation p{5, 2, 1, 7, 0, 4, 6, 3};
    const Volume out = apply_slice_permutation(labeled_slices({2, 2, 8}), p);
    for (std::size_t z = 0; z < 8; ++z) CHECK(out.at(1, 1, z) == float(p[z]));
  }

  TEST_CASE("inverse restores 1000 random pairs") {
    std::mt19937_64 gen(3);
    for (int t = 0; t < 1000; ++t) {
      Permutation p(8);
      std::iota(p.begin(), p.end(), 0);
      std::shuffle(p.begin(), p.end(), gen);
      const Volume v = random_volume({3, 2, 8}, t);
      const Volume back = apply_slice_permutation(apply_slice_permutation(v, p), inverse_permutation(p));
      REQUIRE(back.data == v.data);
    }
  }

  TEST_CASE("voxel multiset and sum are preserved") {
    const Volume v = random_volume({4, 4, 8}, 9);
    const Volume out = apply_slice_permutation(v, {7, 6, 5, 4, 3, 2, 1, 0});
    auto a = v.data, b = out.data;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
    CHECK(out.sum() == doctest::Approx(v.sum()).epsilon(1e-12));
  }

  TEST_CASE("length mismatch") {
    CHECK_THROWS_AS(apply_slice_permutation(random_volume({2, 2, 8}, 0), {0, 1, 2}), ArgumentError);
  }
}

TEST_SUITE("task sample") {
  const PermutationSet set = generate_permutation_set(8, 10, 7, 1);

  TEST_CASE("one-hot label for a fixed index") {
    const auto s = make_task_sample_with_index(random_volume({4, 4, 8}, 1), set, 100.0, 3);
    CHECK(s.label == std::vector<real>{0, 0, 0, 1, 0, 0, 0, 0, 0, 0});
    CHECK(s.perm_index == 3);
  }

  TEST_CASE("all-zero subvolume has zero weight") {
    CHECK(make_task_sample(Volume({4, 4, 8}), set, 10.0, 0).info_weight == 0.0);
  }

  TEST_CASE("zero full-volume sum") {
    CHECK_THROWS_AS(make_task_sample(Volume({4, 4, 8}), set, 0.0, 0), ArgumentError);
  }

  TEST_CASE("label, weight and volume are consistent") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const Volume sub = random_volume({4, 3, 8}, seed);
      const double full = 7.0 * sub.sum();
      const auto s = make_task_sample(sub, set, full, seed);
      REQUIRE(s.label.size() == 10);
      CHECK(std::count(s.label.begin(), s.label.end(), real(1)) == 1);
      CHECK(std::count(s.label.begin(), s.label.end(), real(0)) == 9);
      CHECK(std::max_element(s.label.begin(), s.label.end()) - s.label.begin() == long(s.perm_index));
      CHECK(s.info_weight == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
      CHECK(s.permuted_volume.data == apply_slice_permutation(sub, set.perms[s.perm_index]).data);
    }
  }

  TEST_CASE("reproducible per seed and covers every class") {
    const Volume sub = random_volume({2, 2, 8}, 0);
    std::set<std::size_t> seen;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const auto a = make_task_sample(sub, set, 1.0, seed);
      const auto b = make_task_sample(sub, set, 1.0, seed);
      CHECK(a.perm_index == b.perm_index);
      seen.insert(a.perm_index);
    }
    CHECK(seen.size() == 10);
  }

  TEST_CASE("sample depth must match the set") {
    CHECK_THROWS_AS(make_task_sample(random_volume({2, 2, 6}, 0), set, 1.0, 0), ArgumentError);
  }
}
