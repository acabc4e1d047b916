#include "neurotube/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

#include "neurotube/error.hpp"
#include "neurotube/losses.hpp"
#include "neurotube/rng.hpp"

namespace neurotube {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kTagInit = 0x696e6974;
constexpr std::uint64_t kTagVal = 0x76616c;
constexpr std::uint64_t kTagVolume = 1, kTagCrop = 2, kTagPerm = 3, kTagRotate = 4;

std::vector<Tensor> param_list(ParamStore& params) {
  std::vector<Tensor> list;
  list.reserve(params.size());
  for (auto& [name, t] : params) list.push_back(t);
  return list;
}

AdamState clone_adam(const AdamState& a) { return a; }

Checkpoint snapshot(const UNetConfig& model, const std::optional<AuxHeadConfig>& aux,
                    const ParamStore& params, const AdamState& adam) {
  Checkpoint c;
  c.unet = model;
  c.aux = aux;
  c.params = clone_params(params);
  c.adam = clone_adam(adam);
  return c;
}

void print_epoch(std::ostream* os, const EpochRecord& r, bool with_accuracy) {
  if (!os) return;
  char buf[200];
  if (with_accuracy)
    std::snprintf(buf, sizeof buf, "epoch %zu train_loss %.6f val_loss %.6f val_acc %.4f counter %zu%s\n",
                  r.epoch, r.train_loss, r.val_loss, r.val_accuracy, r.counter,
                  r.improved ? " *" : "");
  else
    std::snprintf(buf, sizeof buf, "epoch %zu train_loss %.6f val_loss %.6f counter %zu%s\n",
                  r.epoch, r.train_loss, r.val_loss, r.counter, r.improved ? " *" : "");
  *os << buf << std::flush;
}

std::size_t argmax(std::span<const real> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

void check_finite(double v, const char* what, std::size_t epoch) {
  if (!std::isfinite(v))
    throw NumericError(std::string(what) + " became non-finite at epoch " + std::to_string(epoch));
}

// Restores params/optimizer from a resume checkpoint when requested.
void apply_resume(const TrainOptions& options, ParamStore& params, AdamState& adam) {
  if (!options.resume) return;
  for (auto& [name, t] : params) {
    const auto it = options.resume->params.find(name);
    if (it == options.resume->params.end() || it->second.shape() != t.shape())
      throw ConfigError("resume checkpoint lacks a compatible '" + name + "'");
    t = it->second.clone();
    t.set_requires_grad(true);
  }
  if (options.resume->adam) {
    const double lr = adam.lr;
    adam = *options.resume->adam;
    adam.lr = lr;
  }
}

struct AuxTile {
  Volume permuted;
  std::vector<real> label;
  std::size_t perm_index;
  double weight;
};

std::vector<AuxTile> fixed_aux_tiles(const PermutationSet& perms, const std::vector<Volume>& volumes,
                                     const Dims3& window, std::uint64_t seed) {
  std::vector<AuxTile> tiles;
  Rng rng(seed);
  for (const auto& v : volumes) {
    const double total = v.sum();
    for (const auto& spec : sliding_window_tiles(v.dims, window)) {
      const auto idx = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(perms.perms.size()) - 1));
      auto s = make_task_sample_with_index(crop(v, spec), perms, total, idx);
      tiles.push_back({std::move(s.permuted_volume), std::move(s.label), idx, s.info_weight});
    }
  }
  return tiles;
}

AuxEvaluation score_aux_tiles(const UNetConfig& model, const AuxHeadConfig& aux,
                              const ParamStore& params, const std::vector<AuxTile>& tiles) {
  NoGradGuard no_grad;
  AuxEvaluation e;
  std::size_t correct = 0;
  double loss = 0;
  for (const auto& t : tiles) {
    const Tensor probs =
        aux_head_forward(aux, params, encoder_forward(model, params, volume_to_tensor(t.permuted)));
    loss += losses::weighted_cross_entropy_value(t.label, probs.data(), t.weight);
    correct += argmax(probs.data()) == t.perm_index;
  }
  e.tiles = tiles.size();
  e.loss = tiles.empty() ? 0.0 : loss / static_cast<double>(tiles.size());
  e.accuracy = tiles.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(tiles.size());
  return e;
}

void check_volumes_fit(const std::vector<Volume>& vols, const Dims3& size, const char* what) {
  for (const auto& v : vols)
    if (!size.fits_in(v.dims))
      throw ConfigError(std::string("sample_size ") + size.str() + " exceeds " + what + " volume " +
                        v.dims.str());
}

}  // namespace

void TrainConfig::validate() const {
  if (sample_size.count() == 0) throw ConfigError("sample_size must be positive on every axis");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0)) throw ConfigError("lr must be positive");
  if (patience_epochs == 0) throw ConfigError("patience_epochs must be >= 1");
  if (samples_per_epoch == 0) throw ConfigError("samples_per_epoch must be >= 1");
  if (max_epochs == 0) throw ConfigError("max_epochs must be >= 1");
}

EarlyStopDecision early_stopping_update(EarlyStopState& state, double val_loss,
                                        std::size_t patience, std::size_t epoch) {
  if (std::isnan(val_loss))
    throw NumericError("validation loss is NaN at epoch " + std::to_string(epoch));
  if (patience == 0) throw ArgumentError("patience must be >= 1");
  EarlyStopDecision d;
  if (val_loss < state.best_val_loss) {
    state.best_val_loss = val_loss;
    state.epochs_since_improvement = 0;
    state.best_epoch = epoch;
    d.improved = true;
  } else {
    ++state.epochs_since_improvement;
  }
  d.should_stop = state.epochs_since_improvement >= patience;
  return d;
}

// ---- auxiliary pretraining ---------------------------------------------------

TrainResult pretrain_aux(const TrainConfig& config, const UNetConfig& model,
                         const PermutationSet& perms, const std::vector<Volume>& train,
                         const std::vector<Volume>& val, const TrainOptions& options,
                         std::size_t aux_hidden_units) {
  config.validate();
  if (config.sample_size.z != perms.z_slices)
    throw ConfigError("sample_size z (" + std::to_string(config.sample_size.z) +
                      ") must equal the permutation length (" + std::to_string(perms.z_slices) + ")");
  if (train.empty()) throw ConfigError("pretraining needs at least one volume");
  check_volumes_fit(train, config.sample_size, "training");
  check_volumes_fit(val, config.sample_size, "validation");

  std::vector<double> sums;
  for (const auto& v : train) {
    sums.push_back(v.sum());
    if (!(sums.back() > 0)) throw ConfigError("pretraining volume has a non-positive intensity sum");
  }

  const AuxHeadConfig aux = make_aux_config(model, config.sample_size, perms.count, aux_hidden_units);
  const std::uint64_t init_seed = derive_seed(config.seed, {kTagInit});
  ParamStore params;
  for (auto& [name, t] : init_unet_params(model, init_seed))
    if (is_encoder_param(name)) params[name] = t;
  for (auto& [name, t] : init_aux_params(aux, init_seed)) params[name] = t;
  AdamState adam;
  adam.lr = config.lr;
  apply_resume(options, params, adam);
  auto plist = param_list(params);

  const auto val_tiles = fixed_aux_tiles(perms, val.empty() ? train : val, config.sample_size,
                                         derive_seed(config.seed, {kTagVal}));

  TrainResult result;
  EarlyStopState stop;
  stop.best_checkpoint_path = options.best_checkpoint_path;
  for (std::size_t epoch = options.start_epoch; epoch < config.max_epochs; ++epoch) {
    double loss_total = 0;
    for (std::size_t first = 0; first < config.samples_per_epoch; first += config.batch_size) {
      const std::size_t last = std::min(first + config.batch_size, config.samples_per_epoch);
      const real inv_batch = real(1) / static_cast<real>(last - first);
      for (std::size_t k = first; k < last; ++k) {
        Rng pick(derive_seed(config.seed, {epoch, k, kTagVolume}));
        const auto vi = static_cast<std::size_t>(
            pick.uniform_int(0, static_cast<std::int64_t>(train.size()) - 1));
        const auto [spec, sub] = random_subvolume(train[vi], config.sample_size,
                                                  derive_seed(config.seed, {epoch, k, kTagCrop}));
        const auto sample =
            make_task_sample(sub, perms, sums[vi], derive_seed(config.seed, {epoch, k, kTagPerm}));
        const Tensor probs = aux_head_forward(
            aux, params, encoder_forward(model, params, volume_to_tensor(sample.permuted_volume)));
        Tensor loss = losses::weighted_cross_entropy(sample.label, probs, sample.info_weight);
        loss_total += loss.item();
        ops::scale(loss, inv_batch).backward();
      }
      adam_step(plist, adam);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_total / static_cast<double>(config.samples_per_epoch);
    check_finite(rec.train_loss, "training loss", epoch);
    const auto eval = score_aux_tiles(model, aux, params, val_tiles);
    rec.val_loss = eval.loss;
    rec.val_accuracy = eval.accuracy;
    const auto decision = early_stopping_update(stop, rec.val_loss, config.patience_epochs, epoch);
    rec.counter = stop.epochs_since_improvement;
    rec.improved = decision.improved;
    if (decision.improved) {
      result.best = snapshot(model, aux, params, adam);
      result.best_epoch = epoch;
      if (!options.best_checkpoint_path.empty())
        save_checkpoint(result.best, options.best_checkpoint_path);
    }
    result.history.push_back(rec);
    print_epoch(options.progress, rec, true);
    if (decision.should_stop) {
      result.stopped_early = true;
      break;
    }
  }
  result.last = snapshot(model, aux, params, adam);
  if (result.best.params.empty()) result.best = result.last;
  return result;
}

AuxEvaluation evaluate_aux(const Checkpoint& ckpt, const PermutationSet& perms,
                           const std::vector<Volume>& volumes, const Dims3& window,
                           std::uint64_t seed, std::size_t trials) {
  if (!ckpt.aux) throw ArgumentError("evaluate_aux: checkpoint has no auxiliary head");
  if (trials == 0) throw ArgumentError("evaluate_aux: trials must be >= 1");
  AuxEvaluation total;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto tiles = fixed_aux_tiles(perms, volumes, window, derive_seed(seed, {t}));
    const auto e = score_aux_tiles(ckpt.unet, *ckpt.aux, ckpt.params, tiles);
    total.loss += e.loss / static_cast<double>(trials);
    total.accuracy += e.accuracy / static_cast<double>(trials);
    total.tiles += e.tiles;
  }
  return total;
}

// ---- segmentation ------------------------------------------------------------

ParamStore initial_seg_params(const UNetConfig& model, std::uint64_t seed,
                              const Checkpoint* pretrained) {
  const std::uint64_t init_seed = derive_seed(seed, {kTagInit});
  ParamStore fresh = init_unet_params(model, init_seed);
  if (!pretrained) return fresh;
  return transfer_encoder(*pretrained, model, std::move(fresh));
}

TrainResult finetune_seg(const TrainConfig& config, const UNetConfig& model,
                         const std::vector<LabeledVolume>& train,
                         const std::vector<LabeledVolume>& val, const Checkpoint* pretrained,
                         const TrainOptions& options) {
  config.validate();
  if (train.empty()) throw ConfigError("segmentation training needs at least one labeled volume");
  if (!(model.input_size == config.sample_size))
    throw ConfigError("model input_size " + model.input_size.str() + " must equal sample_size " +
                      config.sample_size.str());
  for (const auto* set : {&train, &val})
    for (std::size_t i = 0; i < set->size(); ++i) {
      const auto& lv = (*set)[i];
      if (lv.mask.data.empty() || !(lv.mask.dims == lv.raw.dims))
        throw ConfigError("labeled volume " + std::to_string(i) + " is missing a matching mask");
      if (!config.sample_size.fits_in(lv.raw.dims))
        throw ConfigError("sample_size " + config.sample_size.str() + " exceeds volume " +
                          lv.raw.dims.str());
    }

  ParamStore params = initial_seg_params(model, config.seed, pretrained);
  AdamState adam;
  adam.lr = config.lr;
  apply_resume(options, params, adam);
  auto plist = param_list(params);

  // Validation tiles are fixed for the whole run.
  std::vector<std::pair<Volume, Volume>> val_tiles;
  for (const auto& lv : val.empty() ? train : val)
    for (const auto& spec : sliding_window_tiles(lv.raw.dims, config.sample_size))
      val_tiles.emplace_back(crop(lv.raw, spec), crop(lv.mask, spec));

  TrainResult result;
  EarlyStopState stop;
  stop.best_checkpoint_path = options.best_checkpoint_path;
  for (std::size_t epoch = options.start_epoch; epoch < config.max_epochs; ++epoch) {
    double loss_total = 0;
    for (std::size_t first = 0; first < config.samples_per_epoch; first += config.batch_size) {
      const std::size_t last = std::min(first + config.batch_size, config.samples_per_epoch);
      const real inv_batch = real(1) / static_cast<real>(last - first);
      for (std::size_t k = first; k < last; ++k) {
        Rng pick(derive_seed(config.seed, {epoch, k, kTagVolume}));
        const auto& lv = train[static_cast<std::size_t>(
            pick.uniform_int(0, static_cast<std::int64_t>(train.size()) - 1))];
        const auto spec = random_subvolume_spec(lv.raw.dims, config.sample_size,
                                                derive_seed(config.seed, {epoch, k, kTagCrop}));
        Volume x = crop(lv.raw, spec);
        Volume y = crop(lv.mask, spec);
        if (config.augment)
          std::tie(x, y) = rotate90_augment(x, y, derive_seed(config.seed, {epoch, k, kTagRotate}));
        const Tensor pred = unet_forward(model, params, volume_to_tensor(x));
        Tensor loss = losses::binary_cross_entropy(pred, y.data);
        loss_total += loss.item();
        ops::scale(loss, inv_batch).backward();
      }
      adam_step(plist, adam);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_total / static_cast<double>(config.samples_per_epoch);
    check_finite(rec.train_loss, "training loss", epoch);
    {
      NoGradGuard no_grad;
      double v = 0;
      for (const auto& [x, y] : val_tiles)
        v += losses::binary_cross_entropy_value(
            tensor_to_volume(unet_forward(model, params, volume_to_tensor(x))).data, y.data);
      rec.val_loss = v / static_cast<double>(val_tiles.size());
    }
    const auto decision = early_stopping_update(stop, rec.val_loss, config.patience_epochs, epoch);
    rec.counter = stop.epochs_since_improvement;
    rec.improved = decision.improved;
    if (decision.improved) {
      result.best = snapshot(model, std::nullopt, params, adam);
      result.best_epoch = epoch;
      if (!options.best_checkpoint_path.empty())
        save_checkpoint(result.best, options.best_checkpoint_path);
    }
    result.history.push_back(rec);
    print_epoch(options.progress, rec, false);
    if (decision.should_stop) {
      result.stopped_early = true;
      break;
    }
  }
  result.last = snapshot(model, std::nullopt, params, adam);
  if (result.best.params.empty()) result.best = result.last;
  return result;
}

// ---- inference -----------------------------------------------------------------

Volume stitch_predictions(const Volume& volume, const Dims3& window, const TilePredictor& predictor,
                          std::size_t workers) {
  if (!window.fits_in(volume.dims))
    throw ArgumentError("predict: volume " + volume.dims.str() + " is smaller than window " +
                        window.str());
  const auto tiles = sliding_window_tiles(volume.dims, window);
  std::vector<Volume> outputs(tiles.size());
  workers = std::clamp<std::size_t>(workers, 1, tiles.size());
  auto run = [&](std::size_t w) {
    for (std::size_t i = w; i < tiles.size(); i += workers) {
      outputs[i] = predictor(crop(volume, tiles[i]));
      if (!(outputs[i].dims == window))
        throw DimensionError("predictor returned " + outputs[i].dims.str() + " for window " +
                             window.str());
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          run(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<double> acc(volume.dims.count(), 0.0);
  std::vector<std::uint32_t> count(volume.dims.count(), 0);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const auto& o = tiles[i].origin;
    for (std::size_t z = 0; z < window.z; ++z)
      for (std::size_t y = 0; y < window.y; ++y)
        for (std::size_t x = 0; x < window.x; ++x) {
          const std::size_t idx = volume.index(o.x + x, o.y + y, o.z + z);
          acc[idx] += outputs[i].at(x, y, z);
          ++count[idx];
        }
  }
  Volume out(volume.dims, 0.0f, VolumeKind::prediction);
  out.spacing = volume.spacing;
  for (std::size_t i = 0; i < acc.size(); ++i)
    out.data[i] = static_cast<float>(acc[i] / count[i]);
  return out;
}

Volume predict_volume(const UNetConfig& model, const ParamStore& params, const Volume& volume,
                      const Dims3& window, std::size_t workers) {
  return stitch_predictions(
      volume, window,
      [&](const Volume& tile) {
        NoGradGuard no_grad;
        return tensor_to_volume(unet_forward(model, params, volume_to_tensor(tile)));
      },
      workers);
}

Volume predict_volume(const Checkpoint& ckpt, const Volume& volume, std::size_t workers) {
  return predict_volume(ckpt.unet, ckpt.params, volume, ckpt.unet.input_size, workers);
}

}  // namespace neurotube
