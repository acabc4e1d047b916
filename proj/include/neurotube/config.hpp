#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "neurotube/metrics.hpp"
#include "neurotube/phantom.hpp"
#include "neurotube/training.hpp"
#include "neurotube/unet.hpp"
#include "neurotube/volume.hpp"

namespace neurotube {

struct ExperimentConfig {
  std::size_t seeds = 6;
  std::size_t unlabeled = 8;         // pretraining volumes
  std::size_t unlabeled_val = 1;     // held out for pretraining validation
  std::size_t labeled = 1;           // fine-tuning volumes
  std::size_t labeled_val = 1;
  std::size_t test = 1;
};

/// Everything a subcommand may need, fully resolved.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool deterministic = false;

  PhantomConfig phantom;
  std::size_t n_volumes = 3;

  bool preprocess = true;
  PreprocessOptions preprocess_options;

  std::size_t perm_z = 8;
  std::size_t perm_count = 10;
  std::size_t perm_min_hamming = 7;

  UNetConfig model;
  std::size_t aux_hidden = 256;
  TrainConfig pretrain;
  TrainConfig train;

  AucMode eval_mode = AucMode::precision_recall;
  ExperimentConfig experiment;
};

/// Flat "section.key" -> value text. Ordered, so echoes are stable.
using ConfigValues = std::map<std::string, std::string>;

/// Every known key with its default value.
ConfigValues default_config_values();

/// Parses an INI file (sections per module). Unknown sections or keys throw
/// ConfigError naming the key.
ConfigValues read_config_file(const std::filesystem::path& path);
ConfigValues parse_config_text(const std::string& text, const std::string& origin = "config");

/// Overlays `top` onto `base`; every key of `top` must be known.
void merge_config_values(ConfigValues& base, const ConfigValues& top, const std::string& origin);

/// Typed view. Malformed values throw ConfigError naming the key.
RunConfig resolve_config(const ConfigValues& values);

/// INI text that read_config_file accepts and that resolves identically.
std::string format_config(const ConfigValues& values);

}  // namespace neurotube
