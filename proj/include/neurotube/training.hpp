#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <vector>

#include "neurotube/checkpoint.hpp"
#include "neurotube/permtask.hpp"
#include "neurotube/sampling.hpp"
#include "neurotube/unet.hpp"
#include "neurotube/volume.hpp"

namespace neurotube {

enum class TaskKind { aux, seg };

struct TrainConfig {
  TaskKind task = TaskKind::seg;
  Dims3 sample_size{32, 32, 32};
  std::size_t batch_size = 8;
  double lr = 1e-3;
  std::size_t patience_epochs = 100;
  std::size_t max_epochs = 200;
  std::size_t samples_per_epoch = 64;
  std::uint64_t seed = 0;
  bool augment = true;  // rotation augmentation, segmentation only

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct EarlyStopState {
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_improvement = 0;
  std::size_t best_epoch = 0;
  std::filesystem::path best_checkpoint_path;
};

struct EarlyStopDecision {
  bool improved = false;
  bool should_stop = false;
};

/// Strict improvement resets the counter; anything else (including a tie)
/// increments it. Stops once the counter reaches `patience`. A NaN loss
/// throws NumericError.
EarlyStopDecision early_stopping_update(EarlyStopState& state, double val_loss,
                                        std::size_t patience, std::size_t epoch = 0);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_accuracy = 0;  // aux task only
  std::size_t counter = 0;
  bool improved = false;
};

struct TrainResult {
  Checkpoint best;  // minimum validation loss
  Checkpoint last;  // state after the final epoch (for resuming)
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

struct TrainOptions {
  std::ostream* progress = nullptr;  // one line per epoch
  /// Written whenever validation improves, when non-empty.
  std::filesystem::path best_checkpoint_path;
  /// Continue from `resume` (params and optimizer state) at `start_epoch`.
  const Checkpoint* resume = nullptr;
  std::size_t start_epoch = 0;
};

struct LabeledVolume {
  Volume raw;
  Volume mask;
};

/// Trains encoder + aux head on the slice-permutation task. Each epoch draws
/// fresh subvolumes and permutations from a stream derived from
/// (seed, epoch). Validation tiles the `val` volumes (or the training volumes
/// when `val` is empty) with a fixed permutation per tile.
TrainResult pretrain_aux(const TrainConfig& config, const UNetConfig& model,
                         const PermutationSet& perms, const std::vector<Volume>& train,
                         const std::vector<Volume>& val, const TrainOptions& options = {},
                         std::size_t aux_hidden_units = 256);

struct AuxEvaluation {
  double loss = 0;      // mean information-weighted cross-entropy
  double accuracy = 0;  // fraction of tiles whose argmax is the applied index
  std::size_t tiles = 0;
};

/// Scores a pretrained checkpoint on sliding-window tiles of `volumes`,
/// averaging over `trials` independent permutation draws per tile.
AuxEvaluation evaluate_aux(const Checkpoint& ckpt, const PermutationSet& perms,
                           const std::vector<Volume>& volumes, const Dims3& window,
                           std::uint64_t seed, std::size_t trials = 1);

/// Initial segmentation parameters: a fresh U-Net from the seed, with the
/// encoder replaced by the pretrained one when `pretrained` is given.
ParamStore initial_seg_params(const UNetConfig& model, std::uint64_t seed,
                              const Checkpoint* pretrained);

/// Trains the full U-Net with binary cross-entropy. Training samples get
/// rotation augmentation; validation uses one fixed tile list.
TrainResult finetune_seg(const TrainConfig& config, const UNetConfig& model,
                         const std::vector<LabeledVolume>& train,
                         const std::vector<LabeledVolume>& val, const Checkpoint* pretrained,
                         const TrainOptions& options = {});

using TilePredictor = std::function<Volume(const Volume& tile)>;

/// Runs `predictor` over sliding-window tiles and mean-stitches overlaps.
/// Tiles may be spread over `workers` threads; sums and counts are reduced
/// in tile order, so the result does not depend on the worker count.
Volume stitch_predictions(const Volume& volume, const Dims3& window, const TilePredictor& predictor,
                          std::size_t workers = 1);

Volume predict_volume(const UNetConfig& model, const ParamStore& params, const Volume& volume,
                      const Dims3& window, std::size_t workers = 1);

/// Window = the checkpoint's training input size.
Volume predict_volume(const Checkpoint& ckpt, const Volume& volume, std::size_t workers = 1);

}  // namespace neurotube
