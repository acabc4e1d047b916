#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "neurotube/error.hpp"
#include "neurotube/permtask.hpp"
#include "neurotube/phantom.hpp"
#include "neurotube/training.hpp"

using namespace neurotube;

namespace {

UNetConfig small_model(Dims3 input) {
  UNetConfig m;
  m.depth = 2;
  m.base_channels = 2;
  m.input_size = input;
  return m;
}

std::vector<LabeledVolume> phantoms(std::size_t n, std::uint64_t seed, Dims3 dims = {32, 32, 32}) {
  std::vector<LabeledVolume> out;
  for (std::size_t i = 0; i < n; ++i) {
    PhantomConfig c;
    c.dims = dims;
    c.n_tubes = 8;
    c.seed = seed + i;
    auto p = generate_phantom(c);
    out.push_back({preprocess(p.raw), std::move(p.mask)});
  }
  return out;
}

std::vector<Volume> raws(const std::vector<LabeledVolume>& v) {
  std::vector<Volume> out;
  for (const auto& lv : v) out.push_back(lv.raw);
  return out;
}

TrainConfig aux_config(std::uint64_t seed) {
  TrainConfig c;
  c.task = TaskKind::aux;
  c.sample_size = {16, 16, 8};
  c.batch_size = 4;
  c.samples_per_epoch = 4;
  c.max_epochs = 2;
  c.seed = seed;
  c.augment = false;
  return c;
}

TrainConfig seg_config(std::uint64_t seed) {
  TrainConfig c;
  c.sample_size = {16, 16, 16};
  c.batch_size = 2;
  c.samples_per_epoch = 4;
  c.max_epochs = 3;
  c.seed = seed;
  return c;
}

bool same_params(const ParamStore& a, const ParamStore& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [k, t] : a) {
    const auto& u = b.at(k);
    if (t.shape() != u.shape() || std::memcmp(t.data().data(), u.data().data(), t.numel() * sizeof(real)))
      return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("early stopping") {
  TEST_CASE("improving sequence never stops") {
    EarlyStopState s;
    for (double v : {1.0, 0.9, 0.8}) {
      const auto d = early_stopping_update(s, v, 2);
      CHECK(d.improved);
      CHECK_FALSE(d.should_stop);
      CHECK(s.epochs_since_improvement == 0);
    }
  }

  TEST_CASE("ties count as non-improvement") {
    EarlyStopState s;
    CHECK_FALSE(early_stopping_update(s, 1.0, 2).should_stop);
    const auto second = early_stopping_update(s, 1.0, 2);
    CHECK_FALSE(second.improved);
    CHECK_FALSE(second.should_stop);
    CHECK(early_stopping_update(s, 1.0, 2).should_stop);
  }

  TEST_CASE("counter resets exactly on strict improvement") {
    EarlyStopState s;
    std::vector<std::size_t> counters;
    for (double v : {1.0, 1.2, 1.1, 0.99, 0.99, 0.5}) {
      early_stopping_update(s, v, 10);
      counters.push_back(s.epochs_since_improvement);
    }
    CHECK(counters == std::vector<std::size_t>{0, 1, 2, 0, 1, 0});
    CHECK(s.best_val_loss == 0.5);
  }

  TEST_CASE("NaN aborts") {
    EarlyStopState s;
    CHECK_THROWS_AS(early_stopping_update(s, std::nan(""), 2), NumericError);
  }
}

TEST_SUITE("config") {
  TEST_CASE("validation") {
    TrainConfig c;
    c.patience_epochs = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("aux sample depth must match the permutation length") {
    auto cfg = aux_config(0);
    cfg.sample_size.z = 6;
    const auto perms = generate_permutation_set(8, 10, 7, 0);
    CHECK_THROWS_AS(pretrain_aux(cfg, small_model({16, 16, 16}), perms, raws(phantoms(1, 0)), {}),
                    ConfigError);
  }

  TEST_CASE("segmentation needs a mask for every volume") {
    auto data = phantoms(2, 0);
    data[1].mask = Volume();
    CHECK_THROWS_AS(finetune_seg(seg_config(0), small_model({16, 16, 16}), data, {}, nullptr),
                    ConfigError);
  }
}

TEST_SUITE("pretraining") {
  const PermutationSet perms = generate_permutation_set(8, 10, 7, 3);
  const std::vector<Volume> train = raws(phantoms(2, 10));
  const std::vector<Volume> val = raws(phantoms(1, 20));

  TEST_CASE("tiny run: second-epoch loss below the first, averaged over 3 seeds") {
    double first = 0, second = 0;
    for (std::uint64_t seed : {0, 1, 2}) {
      const auto r = pretrain_aux(aux_config(seed), small_model({16, 16, 16}), perms, train, val, {}, 16);
      REQUIRE(r.history.size() == 2);
      first += r.history[0].train_loss;
      second += r.history[1].train_loss;
    }
    CHECK(second < first);
  }

  TEST_CASE("bitwise reproducible") {
    auto cfg = aux_config(5);
    const auto a = pretrain_aux(cfg, small_model({16, 16, 16}), perms, train, val, {}, 16);
    const auto b = pretrain_aux(cfg, small_model({16, 16, 16}), perms, train, val, {}, 16);
    CHECK(encode_checkpoint(a.best) == encode_checkpoint(b.best));
    CHECK(encode_checkpoint(a.last) == encode_checkpoint(b.last));
  }

  TEST_CASE("resuming at epoch k reproduces the remaining epochs") {
    auto cfg = aux_config(6);
    cfg.max_epochs = 4;
    const auto full = pretrain_aux(cfg, small_model({16, 16, 16}), perms, train, val, {}, 16);
    cfg.max_epochs = 2;
    const auto head = pretrain_aux(cfg, small_model({16, 16, 16}), perms, train, val, {}, 16);
    cfg.max_epochs = 4;
    TrainOptions opt;
    opt.resume = &head.last;
    opt.start_epoch = 2;
    const auto tail = pretrain_aux(cfg, small_model({16, 16, 16}), perms, train, val, opt, 16);
    CHECK(same_params(tail.last.params, full.last.params));
    CHECK(tail.history.back().val_loss == full.history.back().val_loss);
  }

  TEST_CASE("returned checkpoint is the validation minimum") {
    auto cfg = aux_config(7);
    cfg.max_epochs = 5;
    const auto r = pretrain_aux(cfg, small_model({16, 16, 16}), perms, train, val, {}, 16);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < r.history.size(); ++i)
      if (r.history[i].val_loss < r.history[arg].val_loss) arg = i;
    CHECK(r.best_epoch == arg);
    const auto e = evaluate_aux(r.best, perms, val, cfg.sample_size, 1, 1);
    CHECK(e.tiles == 2 * 2 * 4);
    CHECK(e.accuracy >= 0.0);
    CHECK(e.accuracy <= 1.0);
  }

  TEST_CASE("validation tiles are fixed across epochs") {
    auto cfg = aux_config(8);
    cfg.max_epochs = 3;
    cfg.lr = 1e-30;  // parameters stay put, so only the tiles could move the loss
    const auto r = pretrain_aux(cfg, small_model({16, 16, 16}), perms, train, val, {}, 16);
    CHECK(r.history[1].val_loss == doctest::Approx(r.history[0].val_loss).epsilon(1e-9));
    CHECK(r.history[2].val_loss == doctest::Approx(r.history[0].val_loss).epsilon(1e-9));
  }

  TEST_CASE("progress lines") {
    std::ostringstream log;
    TrainOptions opt;
    opt.progress = &log;
    pretrain_aux(aux_config(1), small_model({16, 16, 16}), perms, train, val, opt, 16);
    const std::string s = log.str();
    CHECK(s.find("epoch 0 train_loss") != std::string::npos);
    CHECK(s.find("val_loss") != std::string::npos);
    CHECK(s.find("counter") != std::string::npos);
  }

  TEST_CASE("evaluation needs an aux head") {
    Checkpoint ck;
    CHECK_THROWS_AS(evaluate_aux(ck, perms, val, {16, 16, 8}, 0), ArgumentError);
  }
}

TEST_SUITE("fine-tuning") {
  const auto data = phantoms(2, 30);
  const auto val = phantoms(1, 40);

  TEST_CASE("scratch and pretrained share the decoder init") {
    const UNetConfig m = small_model({16, 16, 16});
    Checkpoint pre;
    pre.unet = m;
    for (auto& [k, t] : init_unet_params(m, 1234))
      if (is_encoder_param(k)) pre.params[k] = t;
    const auto scratch = initial_seg_params(m, 9, nullptr);
    const auto warm = initial_seg_params(m, 9, &pre);
    bool encoder_differs = false;
    for (const auto& [k, t] : scratch) {
      if (is_encoder_param(k)) {
        encoder_differs |= !same_params({{k, t}}, {{k, warm.at(k)}});
        CHECK(same_params({{k, warm.at(k)}}, {{k, pre.params.at(k)}}));
      } else {
        CHECK(same_params({{k, t}}, {{k, warm.at(k)}}));
      }
    }
    CHECK(encoder_differs);
  }

  TEST_CASE("BCE falls over the first epochs, averaged over 3 seeds") {
    double first = 0, last = 0;
    for (std::uint64_t seed : {0, 1, 2}) {
      const auto r = finetune_seg(seg_config(seed), small_model({16, 16, 16}), data, val, nullptr);
      REQUIRE(r.history.size() == 3);
      first += r.history.front().train_loss;
      last += r.history.back().train_loss;
    }
    CHECK(last < first);
  }

  TEST_CASE("bitwise reproducible, with or without a pretrained encoder") {
    const UNetConfig m = small_model({16, 16, 16});
    Checkpoint pre;
    pre.unet = m;
    for (auto& [k, t] : init_unet_params(m, 77))
      if (is_encoder_param(k)) pre.params[k] = t;
    for (const Checkpoint* init : std::vector<const Checkpoint*>{nullptr, &pre}) {
      const auto a = finetune_seg(seg_config(4), m, data, val, init);
      const auto b = finetune_seg(seg_config(4), m, data, val, init);
      CHECK(encode_checkpoint(a.best) == encode_checkpoint(b.best));
    }
  }

  TEST_CASE("model input must match the sample size") {
    CHECK_THROWS_AS(finetune_seg(seg_config(0), small_model({32, 32, 32}), data, val, nullptr),
                    ConfigError);
  }
}

TEST_SUITE("inference") {
  TEST_CASE("stub stitching on 65x64x64 averages the contributing tiles") {
    Volume v({65, 64, 64});
    for (std::size_t z = 0; z < 64; ++z)
      for (std::size_t y = 0; y < 64; ++y)
        for (std::size_t x = 0; x < 65; ++x) v.at(x, y, z) = float(x);
    // Constant stub first, then one whose constant identifies the tile's x origin.
    const Volume flat = stitch_predictions(v, {32, 32, 32}, [](const Volume& t) {
      return Volume(t.dims, 0.25f, VolumeKind::prediction);
    });
    for (float p : flat.data) CHECK(p == 0.25f);
    const Volume tagged = stitch_predictions(
        v, {32, 32, 32},
        [](const Volume& t) { return Volume(t.dims, t.data[0] / 100.0f, VolumeKind::prediction); }, 3);
    REQUIRE(tagged.dims == v.dims);
    for (std::size_t x = 0; x < 65; ++x) {
      double sum = 0, n = 0;
      for (double origin : {0.0, 32.0, 33.0})
        if (x >= origin && x < origin + 32) sum += origin / 100.0, n += 1;
      CHECK(tagged.at(x, 5, 40) == doctest::Approx(sum / n).epsilon(1e-6));
    }
  }

  TEST_CASE("worker count does not change the result") {
    const auto lv = phantoms(1, 50, {48, 40, 32}).front();
    const UNetConfig m = small_model({16, 16, 16});
    const auto p = init_unet_params(m, 3);
    const Volume a = predict_volume(m, p, lv.raw, {16, 16, 16}, 1);
    const Volume b = predict_volume(m, p, lv.raw, {16, 16, 16}, 4);
    CHECK(a.data == b.data);
    CHECK(a.dims == lv.raw.dims);
    CHECK(a.kind == VolumeKind::prediction);
  }

  TEST_CASE("single tile passes the network output through") {
    const auto lv = phantoms(1, 60, {16, 16, 16}).front();
    Checkpoint ck;
    ck.unet = small_model({16, 16, 16});
    ck.params = init_unet_params(ck.unet, 8);
    const Volume out = predict_volume(ck, lv.raw);
    const Tensor direct = unet_forward(ck.unet, ck.params, volume_to_tensor(lv.raw));
    REQUIRE(out.data.size() == direct.numel());
    CHECK(std::memcmp(out.data.data(), direct.data().data(), out.data.size() * sizeof(float)) == 0);
    CHECK(predict_volume(ck, lv.raw).data == out.data);
  }

  TEST_CASE("volume smaller than the window") {
    Checkpoint ck;
    ck.unet = small_model({16, 16, 16});
    ck.params = init_unet_params(ck.unet, 8);
    CHECK_THROWS_AS(predict_volume(ck, Volume({16, 8, 16})), ArgumentError);
  }
}
