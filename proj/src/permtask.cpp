#include "neurotube/permtask.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "neurotube/error.hpp"
#include "neurotube/losses.hpp"
#include "neurotube/rng.hpp"

namespace neurotube {

std::size_t hamming_distance(const Permutation& p, const Permutation& q) {
  if (p.size() != q.size())
    throw ArgumentError("hamming_distance: lengths " + std::to_string(p.size()) + " and " +
                        std::to_string(q.size()) + " differ");
  std::size_t d = 0;
  for (std::size_t i = 0; i < p.size(); ++i) d += p[i] != q[i];
  return d;
}

bool is_permutation_of_range(const Permutation& p) {
  std::vector<bool> seen(p.size(), false);
  for (auto v : p) {
    if (v >= p.size() || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

Permutation inverse_permutation(const Permutation& p) {
  if (!is_permutation_of_range(p)) throw ArgumentError("inverse_permutation: not a permutation");
  Permutation inv(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) inv[p[k]] = k;
  return inv;
}

void PermutationSet::verify() const {
  if (perms.size() != count)
    throw ArgumentError("permutation set holds " + std::to_string(perms.size()) + " entries, expected " +
                        std::to_string(count));
  for (std::size_t i = 0; i < perms.size(); ++i) {
    if (perms[i].size() != z_slices || !is_permutation_of_range(perms[i]))
      throw ArgumentError("entry " + std::to_string(i) + " is not a permutation of 0.." +
                          std::to_string(z_slices - 1));
    for (std::size_t j = i + 1; j < perms.size(); ++j) {
      const auto d = hamming_distance(perms[i], perms[j]);
      if (d < min_hamming || d == 0)
        throw ArgumentError("entries " + std::to_string(i) + " and " + std::to_string(j) +
                            " are at distance " + std::to_string(d) + " < " +
                            std::to_string(min_hamming));
    }
  }
}

PermutationSet generate_permutation_set(std::size_t z_slices, std::size_t count,
                                        std::size_t min_hamming, std::uint64_t seed) {
  if (z_slices == 0 || count == 0) throw ArgumentError("permutation set needs Z >= 1 and N >= 1");
  if (min_hamming < 2 && count > 1)
    throw ArgumentError("min_hamming must be >= 2 (distinct permutations differ in >= 2 places)");
  if (min_hamming > z_slices)
    throw ArgumentError("min_hamming " + std::to_string(min_hamming) + " exceeds Z = " +
                        std::to_string(z_slices));
  PermutationSet set{z_slices, count, min_hamming, seed, {}};
  Rng rng(seed);
  const std::size_t budget = kPermAttemptsPerEntry * count;
  Permutation cand(z_slices);
  for (std::size_t attempt = 0; attempt < budget && set.perms.size() < count; ++attempt) {
    std::iota(cand.begin(), cand.end(), std::size_t{0});
    for (std::size_t i = z_slices; i > 1; --i)
      std::swap(cand[i - 1], cand[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
    const bool ok = std::all_of(set.perms.begin(), set.perms.end(), [&](const Permutation& p) {
      return hamming_distance(p, cand) >= std::max<std::size_t>(min_hamming, 1);
    });
    if (ok) set.perms.push_back(cand);
  }
  if (set.perms.size() < count)
    throw GenerationError("generate_permutation_set: only " + std::to_string(set.perms.size()) +
                              " of " + std::to_string(count) + " permutations found with Z=" +
                              std::to_string(z_slices) + ", min_hamming=" +
                              std::to_string(min_hamming) + " after " + std::to_string(budget) +
                              " attempts",
                          set.perms.size());
  return set;
}

std::string format_permutation_set(const PermutationSet& set) {
  std::ostringstream os;
  os << "permset z=" << set.z_slices << " n=" << set.count << " min_hamming=" << set.min_hamming
     << " seed=" << set.seed << '\n';
  for (const auto& p : set.perms) {
    for (std::size_t i = 0; i < p.size(); ++i) os << (i ? " " : "") << p[i];
    os << '\n';
  }
  return os.str();
}

PermutationSet parse_permutation_set(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("permutation set: empty file");
  std::istringstream header(line);
  std::string word;
  header >> word;
  if (word != "permset") throw FormatError("permutation set: missing 'permset' header");
  PermutationSet set;
  bool seen[4] = {false, false, false, false};
  while (header >> word) {
    const auto eq = word.find('=');
    if (eq == std::string::npos) throw FormatError("permutation set: bad header token '" + word + "'");
    const std::string key = word.substr(0, eq);
    const std::uint64_t value = std::stoull(word.substr(eq + 1));
    if (key == "z") set.z_slices = value, seen[0] = true;
    else if (key == "n") set.count = value, seen[1] = true;
    else if (key == "min_hamming") set.min_hamming = value, seen[2] = true;
    else if (key == "seed") set.seed = value, seen[3] = true;
    else throw FormatError("permutation set: unknown header key '" + key + "'");
  }
  if (!(seen[0] && seen[1] && seen[2] && seen[3]))
    throw FormatError("permutation set: header needs z, n, min_hamming and seed");
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(line);
    Permutation p;
    std::size_t v;
    while (row >> v) p.push_back(v);
    set.perms.push_back(std::move(p));
  }
  try {
    set.verify();
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("permutation set: ") + e.what());
  }
  return set;
}

void write_permutation_set(const PermutationSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_permutation_set(set);
  if (!out) throw IoError("write failed for " + path.string());
}

PermutationSet read_permutation_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_permutation_set(ss.str());
}

Volume apply_slice_permutation(const Volume& volume, const Permutation& perm) {
  if (perm.size() != volume.dims.z)
    throw ArgumentError("apply_slice_permutation: permutation length " +
                        std::to_string(perm.size()) + " != z extent " +
                        std::to_string(volume.dims.z));
  if (!is_permutation_of_range(perm)) throw ArgumentError("apply_slice_permutation: not a permutation");
  Volume out = volume;
  const std::size_t slice = volume.dims.x * volume.dims.y;
  for (std::size_t k = 0; k < perm.size(); ++k)
    std::copy_n(volume.data.begin() + static_cast<std::ptrdiff_t>(perm[k] * slice), slice,
                out.data.begin() + static_cast<std::ptrdiff_t>(k * slice));
  return out;
}

TaskSample make_task_sample_with_index(const Volume& subvolume, const PermutationSet& set,
                                       double full_volume_sum, std::size_t perm_index) {
  if (subvolume.dims.z != set.z_slices)
    throw ArgumentError("make_task_sample: subvolume z extent " + std::to_string(subvolume.dims.z) +
                        " != permutation length " + std::to_string(set.z_slices));
  if (perm_index >= set.perms.size()) throw ArgumentError("make_task_sample: index out of range");
  TaskSample s;
  s.info_weight = losses::information_weight(subvolume.sum(), full_volume_sum);
  s.permuted_volume = apply_slice_permutation(subvolume, set.perms[perm_index]);
  s.perm_index = perm_index;
  s.label.assign(set.perms.size(), real(0));
  s.label[perm_index] = real(1);
  return s;
}

TaskSample make_task_sample(const Volume& subvolume, const PermutationSet& set,
                            double full_volume_sum, std::uint64_t seed) {
  if (!(full_volume_sum > 0))
    throw ArgumentError("make_task_sample: full volume sum must be positive");
  Rng rng(seed);
  const auto idx = static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(set.perms.size()) - 1));
  return make_task_sample_with_index(subvolume, set, full_volume_sum, idx);
}

}  // namespace neurotube
