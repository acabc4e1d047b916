#include "neurotube/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <list>
#include <optional>
#include <sstream>

#include "neurotube/checkpoint.hpp"
#include "neurotube/config.hpp"
#include "neurotube/error.hpp"
#include "neurotube/gradcheck.hpp"
#include "neurotube/metrics.hpp"
#include "neurotube/permtask.hpp"
#include "neurotube/phantom.hpp"
#include "neurotube/rng.hpp"
#include "neurotube/training.hpp"
#include "neurotube/volume.hpp"

namespace neurotube::cli {

namespace fs = std::filesystem;

namespace {

// Writes to two streams at once.
class TeeBuf : public std::streambuf {
 public:
  TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

 protected:
  int overflow(int c) override {
    if (c == EOF) return !EOF;
    const bool ok = a_->sputc(static_cast<char>(c)) != EOF && b_->sputc(static_cast<char>(c)) != EOF;
    return ok ? c : EOF;
  }
  std::streamsize xsputn(const char* s, std::streamsize n) override {
    a_->sputn(s, n);
    b_->sputn(s, n);
    return n;
  }
  int sync() override { return (a_->pubsync() == 0 && b_->pubsync() == 0) ? 0 : -1; }

 private:
  std::streambuf* a_;
  std::streambuf* b_;
};

struct Override {
  std::string key;
  std::optional<std::string> value;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  ConfigValues values;
  RunConfig config;
  std::optional<fs::path> out_dir;
  std::string command_line;

  const fs::path& require_out(const char* cmd) const {
    if (!out_dir) throw ConfigError(std::string(cmd) + ": --out DIR is required");
    return *out_dir;
  }
};

std::string quote_arg(const std::string& a) {
  if (!a.empty() && a.find_first_of(" \t\n'\"\\$") == std::string::npos) return a;
  std::string q = "'";
  for (char c : a) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

// Resolved config and exact command line, enough to repeat the run.
void prepare_out_dir(const Context& ctx) {
  if (!ctx.out_dir) return;
  std::error_code ec;
  fs::create_directories(*ctx.out_dir, ec);
  if (ec) throw IoError("cannot create " + ctx.out_dir->string() + ": " + ec.message());
  write_text(*ctx.out_dir / "config.ini", format_config(ctx.values));
  write_text(*ctx.out_dir / "command.txt", ctx.command_line + "\n");
}

Volume maybe_preprocess(const RunConfig& c, Volume v) {
  return c.preprocess ? preprocess(v, c.preprocess_options) : v;
}

std::vector<LabeledVolume> load_dataset(const RunConfig& c, const fs::path& dir, bool masks) {
  const auto manifest = read_manifest(dir / "manifest.txt");
  if (manifest.empty()) throw ConfigError("dataset " + dir.string() + " has an empty manifest");
  std::vector<LabeledVolume> out;
  for (const auto& e : manifest) {
    LabeledVolume lv;
    lv.raw = maybe_preprocess(c, read_volume(dir / e.raw_file, VolumeKind::raw));
    if (masks) {
      if (e.mask_file.empty())
        throw ConfigError("dataset " + dir.string() + ": volume " + std::to_string(e.index) +
                          " has no mask");
      lv.mask = read_volume(dir / e.mask_file, VolumeKind::mask);
    }
    out.push_back(std::move(lv));
  }
  return out;
}

std::vector<Volume> raw_only(std::vector<LabeledVolume> v) {
  std::vector<Volume> out;
  for (auto& lv : v) out.push_back(std::move(lv.raw));
  return out;
}

PermutationSet make_perms(const RunConfig& c) {
  return generate_permutation_set(c.perm_z, c.perm_count, c.perm_min_hamming,
                                  derive_seed(c.seed, {fnv1a("perms")}));
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- subcommands -------------------------------------------------------------

int cmd_gen_phantom(Context& ctx) {
  const auto& dir = ctx.require_out("gen-phantom");
  PhantomConfig pc = ctx.config.phantom;
  pc.seed = ctx.config.seed;
  const auto manifest = generate_dataset(pc, ctx.config.n_volumes, dir);
  for (const auto& e : manifest)
    ctx.out << e.raw_file << " " << e.mask_file << " mask_fraction " << fmt("%.6f", e.mask_fraction)
            << "\n";
  return kExitOk;
}

int cmd_preprocess(Context& ctx, const std::vector<std::string>& inputs) {
  const auto& dir = ctx.require_out("preprocess");
  for (const auto& in : inputs) {
    const fs::path src(in);
    const Volume v = preprocess(read_volume(src), ctx.config.preprocess_options);
    const fs::path dst = dir / src.filename();
    if (fs::exists(dst) && fs::equivalent(dst, src))
      throw ConfigError("preprocess: output " + dst.string() + " would overwrite its input");
    write_volume(v, dst);
    ctx.out << dst.string() << "\n";
  }
  return kExitOk;
}

int cmd_gen_perms(Context& ctx) {
  const auto& dir = ctx.require_out("gen-perms");
  const auto set = make_perms(ctx.config);
  write_permutation_set(set, dir / "perms.txt");
  ctx.out << format_permutation_set(set);
  return kExitOk;
}

struct TrainPaths {
  std::string data, val_data, perms, checkpoint, init = "scratch", resume;
  std::size_t start_epoch = 0;
};

int cmd_pretrain(Context& ctx, const TrainPaths& p) {
  const auto& dir = ctx.require_out("pretrain");
  const RunConfig& c = ctx.config;
  const PermutationSet perms = p.perms.empty() ? make_perms(c) : read_permutation_set(p.perms);
  perms.verify();
  write_permutation_set(perms, dir / "perms.txt");
  const auto train = raw_only(load_dataset(c, p.data, false));
  const auto val = p.val_data.empty() ? std::vector<Volume>{} : raw_only(load_dataset(c, p.val_data, false));

  std::ofstream log(dir / "train.log", std::ios::trunc);
  TeeBuf tee(ctx.out.rdbuf(), log.rdbuf());
  std::ostream progress(&tee);
  std::optional<Checkpoint> resume;
  if (!p.resume.empty()) resume = load_checkpoint(p.resume);
  TrainOptions opt;
  opt.progress = &progress;
  opt.best_checkpoint_path = dir / "best.ckpt";
  opt.resume = resume ? &*resume : nullptr;
  opt.start_epoch = p.start_epoch;
  const auto result = pretrain_aux(c.pretrain, c.model, perms, train, val, opt, c.aux_hidden);
  save_checkpoint(result.best, dir / "best.ckpt");
  save_checkpoint(result.last, dir / "last.ckpt");

  const auto eval = evaluate_aux(result.best, perms, val.empty() ? train : val, c.pretrain.sample_size,
                                 derive_seed(c.seed, {fnv1a("aux-eval")}), 10);
  std::ostringstream summary;
  summary << "best_epoch = " << result.best_epoch << "\n"
          << "aux_loss = " << fmt("%.6f", eval.loss) << "\n"
          << "aux_accuracy = " << fmt("%.6f", eval.accuracy) << "\n"
          << "tiles = " << eval.tiles << "\n";
  write_text(dir / "aux_eval.txt", summary.str());
  progress << summary.str() << std::flush;
  return kExitOk;
}

int cmd_train(Context& ctx, const TrainPaths& p) {
  const auto& dir = ctx.require_out("train");
  const RunConfig& c = ctx.config;
  std::optional<Checkpoint> pretrained;
  if (p.init == "checkpoint") {
    if (p.checkpoint.empty()) throw ConfigError("train: --init checkpoint needs --checkpoint PATH");
    pretrained = load_checkpoint(p.checkpoint);
  } else if (p.init != "scratch") {
    throw ConfigError("train: --init must be scratch or checkpoint, got '" + p.init + "'");
  }
  const auto train = load_dataset(c, p.data, true);
  const auto val = p.val_data.empty() ? std::vector<LabeledVolume>{} : load_dataset(c, p.val_data, true);

  std::ofstream log(dir / "train.log", std::ios::trunc);
  TeeBuf tee(ctx.out.rdbuf(), log.rdbuf());
  std::ostream progress(&tee);
  std::optional<Checkpoint> resume;
  if (!p.resume.empty()) resume = load_checkpoint(p.resume);
  TrainOptions opt;
  opt.progress = &progress;
  opt.best_checkpoint_path = dir / "best.ckpt";
  opt.resume = resume ? &*resume : nullptr;
  opt.start_epoch = p.start_epoch;
  const auto result =
      finetune_seg(c.train, c.model, train, val, pretrained ? &*pretrained : nullptr, opt);
  save_checkpoint(result.best, dir / "best.ckpt");
  save_checkpoint(result.last, dir / "last.ckpt");
  progress << "best_epoch = " << result.best_epoch << "\n" << std::flush;
  return kExitOk;
}

int cmd_predict(Context& ctx, const std::string& checkpoint, const std::string& input,
                std::string output) {
  if (output.empty()) output = (ctx.require_out("predict") / "prediction.vol").string();
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Volume v = maybe_preprocess(ctx.config, read_volume(input));
  const Volume pred = predict_volume(ckpt, v, ctx.config.workers);
  write_volume(pred, output);
  ctx.out << output << "\n";
  return kExitOk;
}

int cmd_eval(Context& ctx, const std::string& pred_path, const std::string& truth_path) {
  const Volume pred = read_volume(pred_path, VolumeKind::prediction);
  const Volume truth = read_volume(truth_path, VolumeKind::mask);
  const auto report = format_report(curve_summary(pred, truth, ctx.config.eval_mode));
  ctx.out << report;
  if (ctx.out_dir) write_text(*ctx.out_dir / "report.txt", report);
  return kExitOk;
}

int cmd_gradcheck(Context& ctx, std::size_t instances, const std::vector<std::string>& only) {
  std::ostringstream table;
  bool ok = true;
  table << "op instances failures max_rel_error result\n";
  for (const auto& op : gradcheck_op_names()) {
    if (!only.empty() && std::find(only.begin(), only.end(), op) == only.end()) continue;
    const auto s = grad_check_op(op, instances, ctx.config.seed);
    ok = ok && s.passed();
    table << op << " " << s.instances << " " << s.failures << " " << fmt("%.3e", s.max_rel_error)
          << " " << (s.passed() ? "pass" : "FAIL") << "\n";
  }
  ctx.out << table.str();
  if (ctx.out_dir) write_text(*ctx.out_dir / "gradcheck.txt", table.str());
  return ok ? kExitOk : kExitNumeric;
}

// Stacks equally sized volumes along z so one curve covers all of them.
Volume stack_z(const std::vector<Volume>& vols, VolumeKind kind) {
  Dims3 d = vols.front().dims;
  d.z = 0;
  for (const auto& v : vols) {
    if (v.dims.x != d.x || v.dims.y != d.y)
      throw DimensionError("experiment: test volumes must share x/y extents");
    d.z += v.dims.z;
  }
  Volume out(d, 0.0f, kind);
  std::size_t o = 0;
  for (const auto& v : vols) {
    std::copy(v.data.begin(), v.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(o));
    o += v.data.size();
  }
  return out;
}

struct ArmStats {
  std::vector<double> auc, f1;
};

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Sample standard deviation (n - 1); zero for a single value.
double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

int cmd_experiment(Context& ctx) {
  const auto& dir = ctx.require_out("experiment");
  const RunConfig& c = ctx.config;
  const ExperimentConfig& e = c.experiment;

  std::ofstream log(dir / "experiment.log", std::ios::trunc);
  TeeBuf tee(ctx.out.rdbuf(), log.rdbuf());
  std::ostream progress(&tee);

  // One fixed phantom dataset; trials differ only in their training seed.
  std::size_t next = 0;
  auto make = [&](std::size_t n) {
    std::vector<LabeledVolume> vols;
    for (std::size_t i = 0; i < n; ++i, ++next) {
      PhantomConfig pc = c.phantom;
      pc.seed = dataset_volume_seed(c.seed, next);
      auto ph = generate_phantom(pc);
      vols.push_back({maybe_preprocess(c, ph.raw), std::move(ph.mask)});
    }
    return vols;
  };
  const auto unlabeled = raw_only(make(e.unlabeled));
  const auto unlabeled_val = raw_only(make(e.unlabeled_val));
  const auto labeled = make(e.labeled);
  const auto labeled_val = make(e.labeled_val);
  const auto test = make(e.test);
  std::vector<Volume> test_truth;
  for (const auto& t : test) test_truth.push_back(t.mask);
  const Volume truth = stack_z(test_truth, VolumeKind::mask);
  const PermutationSet perms = make_perms(c);
  write_permutation_set(perms, dir / "perms.txt");

  ArmStats scratch, pretrained;
  std::vector<double> aux_acc;
  std::ostringstream trials;
  trials << "trial seed aux_accuracy scratch_auc scratch_top_f1 pretrained_auc pretrained_top_f1\n";
  for (std::size_t t = 0; t < e.seeds; ++t) {
    const std::uint64_t seed = derive_seed(c.seed, {fnv1a("trial"), t});
    const fs::path tdir = dir / ("trial_" + std::to_string(t));
    fs::create_directories(tdir);

    TrainConfig pre = c.pretrain;
    pre.seed = seed;
    TrainOptions quiet;
    const auto aux = pretrain_aux(pre, c.model, perms, unlabeled, unlabeled_val, quiet, c.aux_hidden);
    save_checkpoint(aux.best, tdir / "aux.ckpt");
    const auto aux_eval = evaluate_aux(aux.best, perms, unlabeled_val.empty() ? unlabeled : unlabeled_val,
                                       pre.sample_size, derive_seed(seed, {fnv1a("aux-eval")}), 10);
    aux_acc.push_back(aux_eval.accuracy);
    progress << "trial " << t << " pretrain best_epoch " << aux.best_epoch << " aux_accuracy "
             << fmt("%.4f", aux_eval.accuracy) << std::endl;

    TrainConfig seg = c.train;
    seg.seed = seed;
    double row[4];
    for (int arm = 0; arm < 2; ++arm) {
      const bool use_pre = arm == 1;
      const auto res = finetune_seg(seg, c.model, labeled, labeled_val,
                                    use_pre ? &aux.best : nullptr, quiet);
      save_checkpoint(res.best, tdir / (use_pre ? "pretrained.ckpt" : "scratch.ckpt"));
      std::vector<Volume> preds;
      for (const auto& tv : test) preds.push_back(predict_volume(res.best, tv.raw, c.workers));
      const auto report = curve_summary(stack_z(preds, VolumeKind::prediction), truth, c.eval_mode);
      write_text(tdir / (use_pre ? "pretrained_report.txt" : "scratch_report.txt"),
                 format_report(report));
      ArmStats& s = use_pre ? pretrained : scratch;
      s.auc.push_back(report.auc);
      s.f1.push_back(report.top_f1);
      row[arm * 2] = report.auc;
      row[arm * 2 + 1] = report.top_f1;
      progress << "trial " << t << " " << (use_pre ? "pretrained" : "scratch") << " best_epoch "
               << res.best_epoch << " auc " << fmt("%.4f", report.auc) << " top_f1 "
               << fmt("%.4f", report.top_f1) << std::endl;
    }
    trials << t << " " << seed << " " << fmt("%.6f", aux_eval.accuracy);
    for (double v : row) trials << " " << fmt("%.6f", v);
    trials << "\n";
  }

  const auto& s = c.train.sample_size;
  const std::string size = std::to_string(s.x) + "x" + std::to_string(s.y) + "x" + std::to_string(s.z);
  std::ostringstream table;
  table << "method sample_size auc_mean auc_std top_f1_mean top_f1_std\n";
  auto line = [&](const char* name, const ArmStats& a) {
    table << name << " " << size << " " << fmt("%.4f", mean_of(a.auc)) << " "
          << fmt("%.4f", std_of(a.auc)) << " " << fmt("%.4f", mean_of(a.f1)) << " "
          << fmt("%.4f", std_of(a.f1)) << "\n";
  };
  line("scratch", scratch);
  line("pretrained", pretrained);
  table << "\ntrials = " << e.seeds << "\n"
        << "mode = " << (c.eval_mode == AucMode::roc ? "roc" : "pr") << "\n"
        << "aux_accuracy_mean = " << fmt("%.4f", mean_of(aux_acc)) << "\n";
  write_text(dir / "experiment.txt", table.str());
  write_text(dir / "trials.txt", trials.str());
  progress << "\n" << table.str() << std::flush;
  return kExitOk;
}

// ---- argument wiring -----------------------------------------------------------

ConfigValues parse_sets(const std::vector<std::string>& sets) {
  ConfigValues v;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--set expects section.key=value, got '" + s + "'");
    v[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return v;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-supervised 3D U-Net axon segmentation toolkit", "neurotube"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_path, out_dir, seed, workers;
  bool deterministic = false;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "INI config file");
  app.add_option("--seed", seed, "Run seed");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--workers", workers, "Worker threads for tile inference");
  app.add_flag("--deterministic", deterministic, "Force sequential reductions (workers = 1)");
  app.add_option("--set", sets, "Override a config key: section.key=value");

  std::list<Override> overrides;
  auto bind = [&](CLI::App* sub, const std::string& flag, const std::string& key,
                  const std::string& help) {
    overrides.push_back({key, std::nullopt});
    sub->add_option(flag, overrides.back().value, help + " (" + key + ")");
  };

  auto* gen_phantom = app.add_subcommand("gen-phantom", "Write synthetic tube phantoms and a manifest");
  bind(gen_phantom, "--n-volumes", "phantom.n_volumes", "Number of volumes");
  bind(gen_phantom, "--n-tubes", "phantom.n_tubes", "Tubes per volume");
  bind(gen_phantom, "--dims", "phantom.dims", "Volume size X,Y,Z");

  std::vector<std::string> pre_inputs;
  auto* pre = app.add_subcommand("preprocess", "Clip, median-filter and min-max normalize volumes");
  pre->add_option("--input", pre_inputs, "Input volumes")->required();

  auto* gen_perms = app.add_subcommand("gen-perms", "Generate a permutation set");
  bind(gen_perms, "--z", "perms.z_slices", "Slices per permutation");
  bind(gen_perms, "--n", "perms.count", "Number of permutations");
  bind(gen_perms, "--min-hamming", "perms.min_hamming", "Minimum pairwise Hamming distance");

  TrainPaths tp;
  auto* pretrain = app.add_subcommand("pretrain", "Pretrain the encoder on slice-order prediction");
  pretrain->add_option("--data", tp.data, "Dataset directory with manifest.txt")->required();
  pretrain->add_option("--val-data", tp.val_data, "Held-out dataset directory");
  pretrain->add_option("--perms", tp.perms, "Permutation set file (default: generate)");
  pretrain->add_option("--resume", tp.resume, "Checkpoint to continue from");
  pretrain->add_option("--start-epoch", tp.start_epoch, "Epoch index to continue at");
  bind(pretrain, "--epochs", "pretrain.max_epochs", "Maximum epochs");

  auto* train = app.add_subcommand("train", "Train the segmentation U-Net");
  train->add_option("--data", tp.data, "Labeled dataset directory")->required();
  train->add_option("--val-data", tp.val_data, "Labeled validation directory");
  train->add_option("--init", tp.init, "scratch or checkpoint");
  train->add_option("--checkpoint", tp.checkpoint, "Pretrained checkpoint for --init checkpoint");
  train->add_option("--resume", tp.resume, "Checkpoint to continue from");
  train->add_option("--start-epoch", tp.start_epoch, "Epoch index to continue at");
  bind(train, "--epochs", "train.max_epochs", "Maximum epochs");

  std::string ckpt_path, input_path, output_path;
  auto* predict = app.add_subcommand("predict", "Sliding-window prediction of a volume");
  predict->add_option("--checkpoint", ckpt_path, "Segmentation checkpoint")->required();
  predict->add_option("--input", input_path, "Raw volume")->required();
  predict->add_option("--output", output_path, "Prediction path (default OUT/prediction.vol)");

  std::string pred_path, truth_path;
  auto* eval = app.add_subcommand("eval", "Threshold sweep, AUC and top F1");
  eval->add_option("--pred", pred_path, "Prediction volume")->required();
  eval->add_option("--truth", truth_path, "Mask volume")->required();
  bind(eval, "--mode", "eval.mode", "pr or roc");

  std::size_t instances = 20;
  std::vector<std::string> only_ops;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference checks of every op");
  gradcheck->add_option("--instances", instances, "Random instances per op");
  gradcheck->add_option("--op", only_ops, "Restrict to these ops");

  auto* experiment = app.add_subcommand("experiment", "Scratch vs pretrained comparison over seeds");
  bind(experiment, "--seeds", "experiment.seeds", "Number of trials");

  if (!args.empty() && !args[0].empty() && args[0][0] != '-') {
    bool known = false;
    for (const auto* sub : app.get_subcommands({})) known = known || sub->get_name() == args[0];
    if (!known) {
      err << "error: unknown subcommand '" << args[0] << "'\n\n" << app.help();
      return kExitUsage;
    }
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  std::string command_line = "neurotube";
  for (const auto& a : args) command_line += " " + quote_arg(a);

  try {
    ConfigValues values = default_config_values();
    if (const char* env = std::getenv("NEUROTUBE_WORKERS"); env && *env)
      merge_config_values(values, {{"run.workers", env}}, "NEUROTUBE_WORKERS");
    if (config_path) merge_config_values(values, read_config_file(*config_path), *config_path);
    ConfigValues flags = parse_sets(sets);
    if (seed) flags["run.seed"] = *seed;
    if (workers) flags["run.workers"] = *workers;
    if (deterministic) flags["run.deterministic"] = "true";
    for (const auto& o : overrides)
      if (o.value) flags[o.key] = *o.value;
    merge_config_values(values, flags, "command line");

    Context ctx{out, err, values, resolve_config(values), std::nullopt, command_line};
    if (out_dir) ctx.out_dir = fs::path(*out_dir);
    prepare_out_dir(ctx);

    if (gen_phantom->parsed()) return cmd_gen_phantom(ctx);
    if (pre->parsed()) return cmd_preprocess(ctx, pre_inputs);
    if (gen_perms->parsed()) return cmd_gen_perms(ctx);
    if (pretrain->parsed()) return cmd_pretrain(ctx, tp);
    if (train->parsed()) return cmd_train(ctx, tp);
    if (predict->parsed()) return cmd_predict(ctx, ckpt_path, input_path, output_path);
    if (eval->parsed()) return cmd_eval(ctx, pred_path, truth_path);
    if (gradcheck->parsed()) return cmd_gradcheck(ctx, instances, only_ops);
    if (experiment->parsed()) return cmd_experiment(ctx);
    err << app.help();
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const GenerationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kExitIo;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

int main(int argc, char** argv) {
  tune_allocator();
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace neurotube::cli
