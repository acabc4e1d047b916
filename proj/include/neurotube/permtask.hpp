#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "neurotube/tensor.hpp"
#include "neurotube/volume.hpp"

namespace neurotube {

using Permutation = std::vector<std::size_t>;

/// Number of positions where p and q disagree.
std::size_t hamming_distance(const Permutation& p, const Permutation& q);

Permutation inverse_permutation(const Permutation& p);
bool is_permutation_of_range(const Permutation& p);

/// N permutations of Z slice indices, pairwise at Hamming distance
/// >= min_hamming. Immutable once generated.
struct PermutationSet {
  std::size_t z_slices = 8;
  std::size_t count = 10;
  std::size_t min_hamming = 7;
  std::uint64_t seed = 0;
  std::vector<Permutation> perms;

  /// Exhaustive pairwise check of every invariant; throws ArgumentError
  /// describing the first violation.
  void verify() const;
};

/// Attempts allowed per requested permutation before giving up.
inline constexpr std::size_t kPermAttemptsPerEntry = 10000;

/// Rejection sampling: uniform random permutations are accepted iff they are
/// at distance >= min_hamming from every accepted one. Throws
/// GenerationError (with the achieved count) once 10000 * N draws are spent.
PermutationSet generate_permutation_set(std::size_t z_slices, std::size_t count,
                                        std::size_t min_hamming, std::uint64_t seed);

/// Text form: a header line `permset z=.. n=.. min_hamming=.. seed=..`
/// followed by one space-separated permutation per line.
std::string format_permutation_set(const PermutationSet& set);
PermutationSet parse_permutation_set(const std::string& text);
void write_permutation_set(const PermutationSet& set, const std::filesystem::path& path);
PermutationSet read_permutation_set(const std::filesystem::path& path);

/// Gather along z: output slice k is input slice perm[k].
Volume apply_slice_permutation(const Volume& volume, const Permutation& perm);

struct TaskSample {
  Volume permuted_volume;
  std::vector<real> label;  // one-hot, length N
  std::size_t perm_index = 0;
  double info_weight = 0;
};

/// Picks a permutation index uniformly (seeded), applies it, and attaches
/// the one-hot label and the information weight sum(subvolume)/full_volume_sum.
TaskSample make_task_sample(const Volume& subvolume, const PermutationSet& set,
                            double full_volume_sum, std::uint64_t seed);

/// Same, with the permutation index fixed by the caller.
TaskSample make_task_sample_with_index(const Volume& subvolume, const PermutationSet& set,
                                       double full_volume_sum, std::size_t perm_index);

}  // namespace neurotube
