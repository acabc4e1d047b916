#include "neurotube/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "neurotube/error.hpp"

namespace neurotube {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError("config key '" + key + "': expected " + want + ", got '" + value + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text, const char* want) {
  const std::string s = trim(text);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) bad_value(key, text, want);
  return v;
}

std::size_t as_size(const std::string& key, const std::string& v) {
  return parse_number<std::size_t>(key, v, "a non-negative integer");
}

std::size_t as_positive(const std::string& key, const std::string& v) {
  const auto n = as_size(key, v);
  if (n == 0) bad_value(key, v, "a positive integer");
  return n;
}

double as_double(const std::string& key, const std::string& v) {
  return parse_number<double>(key, v, "a number");
}

bool as_bool(const std::string& key, const std::string& v) {
  const std::string s = trim(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> parts;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) parts.push_back(trim(part));
  return parts;
}

// "X,Y,Z"
Dims3 as_dims(const std::string& key, const std::string& v) {
  const auto p = split_commas(v);
  if (p.size() != 3) bad_value(key, v, "three comma-separated sizes X,Y,Z");
  return {as_positive(key, p[0]), as_positive(key, p[1]), as_positive(key, p[2])};
}

Spacing as_spacing(const std::string& key, const std::string& v) {
  const auto p = split_commas(v);
  if (p.size() != 3) bad_value(key, v, "three comma-separated spacings X,Y,Z");
  Spacing s{static_cast<float>(as_double(key, p[0])), static_cast<float>(as_double(key, p[1])),
            static_cast<float>(as_double(key, p[2]))};
  if (!(s.x > 0 && s.y > 0 && s.z > 0)) bad_value(key, v, "positive spacings");
  return s;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

struct KeySpec {
  std::string name;
  std::string fallback;
  Setter set;
};

template <typename F>
KeySpec key(std::string name, std::string fallback, F f) {
  return {std::move(name), std::move(fallback), Setter(f)};
}

void add_train_keys(std::vector<KeySpec>& keys, const std::string& section, TrainConfig RunConfig::*tc,
                    const TrainConfig& d, const std::string& sample) {
  auto field = [tc](RunConfig& c) -> TrainConfig& { return c.*tc; };
  keys.push_back(key(section + ".sample_size", sample, [=](RunConfig& c, auto& k, auto& v) {
    field(c).sample_size = as_dims(k, v);
  }));
  keys.push_back(key(section + ".batch_size", std::to_string(d.batch_size),
                     [=](RunConfig& c, auto& k, auto& v) { field(c).batch_size = as_positive(k, v); }));
  keys.push_back(key(section + ".lr", "0.001", [=](RunConfig& c, auto& k, auto& v) {
    field(c).lr = as_double(k, v);
    if (!(field(c).lr > 0)) bad_value(k, v, "a positive learning rate");
  }));
  keys.push_back(key(section + ".patience_epochs", std::to_string(d.patience_epochs),
                     [=](RunConfig& c, auto& k, auto& v) { field(c).patience_epochs = as_positive(k, v); }));
  keys.push_back(key(section + ".max_epochs", std::to_string(d.max_epochs),
                     [=](RunConfig& c, auto& k, auto& v) { field(c).max_epochs = as_positive(k, v); }));
  keys.push_back(key(section + ".samples_per_epoch", std::to_string(d.samples_per_epoch),
                     [=](RunConfig& c, auto& k, auto& v) {
                       field(c).samples_per_epoch = as_positive(k, v);
                     }));
}

const std::vector<KeySpec>& registry() {
  static const std::vector<KeySpec> keys = [] {
    std::vector<KeySpec> k;
    k.push_back(key("run.seed", "0", [](RunConfig& c, auto& n, auto& v) {
      c.seed = parse_number<std::uint64_t>(n, v, "a non-negative integer");
    }));
    k.push_back(key("run.workers", "1", [](RunConfig& c, auto& n, auto& v) { c.workers = as_positive(n, v); }));
    k.push_back(key("run.deterministic", "false",
                    [](RunConfig& c, auto& n, auto& v) { c.deterministic = as_bool(n, v); }));

    k.push_back(key("phantom.dims", "64,64,64",
                    [](RunConfig& c, auto& n, auto& v) { c.phantom.dims = as_dims(n, v); }));
    k.push_back(key("phantom.spacing", "1,1,1",
                    [](RunConfig& c, auto& n, auto& v) { c.phantom.spacing = as_spacing(n, v); }));
    k.push_back(key("phantom.n_tubes", "24",
                    [](RunConfig& c, auto& n, auto& v) { c.phantom.n_tubes = as_size(n, v); }));
    k.push_back(key("phantom.radius_min_um", "1.5",
                    [](RunConfig& c, auto& n, auto& v) { c.phantom.radius_min_um = as_double(n, v); }));
    k.push_back(key("phantom.radius_max_um", "3",
                    [](RunConfig& c, auto& n, auto& v) { c.phantom.radius_max_um = as_double(n, v); }));
    k.push_back(key("phantom.intensity_min", "0.5",
                    [](RunConfig& c, auto& n, auto& v) { c.phantom.intensity_min = as_double(n, v); }));
    k.push_back(key("phantom.intensity_max", "1",
                    [](RunConfig& c, auto& n, auto& v) { c.phantom.intensity_max = as_double(n, v); }));
    k.push_back(key("phantom.noise_ceiling", "0.2",
                    [](RunConfig& c, auto& n, auto& v) { c.phantom.noise_ceiling = as_double(n, v); }));
    k.push_back(key("phantom.wander", "0.3",
                    [](RunConfig& c, auto& n, auto& v) { c.phantom.wander = as_double(n, v); }));
    k.push_back(key("phantom.drift_max", "1",
                    [](RunConfig& c, auto& n, auto& v) { c.phantom.drift_max = as_double(n, v); }));
    k.push_back(key("phantom.n_volumes", "3",
                    [](RunConfig& c, auto& n, auto& v) { c.n_volumes = as_size(n, v); }));

    k.push_back(key("preprocess.enabled", "true",
                    [](RunConfig& c, auto& n, auto& v) { c.preprocess = as_bool(n, v); }));
    k.push_back(key("preprocess.clip_low_pct", "1", [](RunConfig& c, auto& n, auto& v) {
      c.preprocess_options.clip_low_pct = as_double(n, v);
    }));
    k.push_back(key("preprocess.clip_high_pct", "99", [](RunConfig& c, auto& n, auto& v) {
      c.preprocess_options.clip_high_pct = as_double(n, v);
    }));
    k.push_back(key("preprocess.median_radius", "1", [](RunConfig& c, auto& n, auto& v) {
      c.preprocess_options.median_radius = static_cast<int>(as_size(n, v));
    }));

    k.push_back(key("perms.z_slices", "8", [](RunConfig& c, auto& n, auto& v) { c.perm_z = as_positive(n, v); }));
    k.push_back(key("perms.count", "10", [](RunConfig& c, auto& n, auto& v) { c.perm_count = as_positive(n, v); }));
    k.push_back(key("perms.min_hamming", "7",
                    [](RunConfig& c, auto& n, auto& v) { c.perm_min_hamming = as_size(n, v); }));

    k.push_back(key("model.depth", "3", [](RunConfig& c, auto& n, auto& v) { c.model.depth = as_positive(n, v); }));
    k.push_back(key("model.base_channels", "8",
                    [](RunConfig& c, auto& n, auto& v) { c.model.base_channels = as_positive(n, v); }));
    k.push_back(key("model.use_groupnorm", "false",
                    [](RunConfig& c, auto& n, auto& v) { c.model.use_groupnorm = as_bool(n, v); }));
    k.push_back(key("model.aux_hidden", "256",
                    [](RunConfig& c, auto& n, auto& v) { c.aux_hidden = as_positive(n, v); }));

    TrainConfig pre;
    pre.task = TaskKind::aux;
    pre.batch_size = 32;
    pre.samples_per_epoch = 128;
    add_train_keys(k, "pretrain", &RunConfig::pretrain, pre, "32,32,8");
    TrainConfig seg;
    seg.batch_size = 4;
    seg.samples_per_epoch = 16;
    seg.max_epochs = 100;
    add_train_keys(k, "train", &RunConfig::train, seg, "32,32,32");
    k.push_back(key("train.augment", "true",
                    [](RunConfig& c, auto& n, auto& v) { c.train.augment = as_bool(n, v); }));

    k.push_back(key("eval.mode", "pr", [](RunConfig& c, auto& n, auto& v) {
      const std::string s = trim(v);
      if (s == "pr") c.eval_mode = AucMode::precision_recall;
      else if (s == "roc") c.eval_mode = AucMode::roc;
      else bad_value(n, v, "pr or roc");
    }));

    k.push_back(key("experiment.seeds", "6",
                    [](RunConfig& c, auto& n, auto& v) { c.experiment.seeds = as_positive(n, v); }));
    k.push_back(key("experiment.unlabeled", "8",
                    [](RunConfig& c, auto& n, auto& v) { c.experiment.unlabeled = as_positive(n, v); }));
    k.push_back(key("experiment.unlabeled_val", "1",
                    [](RunConfig& c, auto& n, auto& v) { c.experiment.unlabeled_val = as_size(n, v); }));
    k.push_back(key("experiment.labeled", "1",
                    [](RunConfig& c, auto& n, auto& v) { c.experiment.labeled = as_positive(n, v); }));
    k.push_back(key("experiment.labeled_val", "1",
                    [](RunConfig& c, auto& n, auto& v) { c.experiment.labeled_val = as_size(n, v); }));
    k.push_back(key("experiment.test", "1",
                    [](RunConfig& c, auto& n, auto& v) { c.experiment.test = as_positive(n, v); }));
    return k;
  }();
  return keys;
}

const KeySpec* find_key(const std::string& name) {
  for (const auto& k : registry())
    if (k.name == name) return &k;
  return nullptr;
}

}  // namespace

ConfigValues default_config_values() {
  ConfigValues v;
  for (const auto& k : registry()) v[k.name] = k.fallback;
  return v;
}

ConfigValues parse_config_text(const std::string& text, const std::string& origin) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ": line " + std::to_string(e.line()) + ": " + e.message());
  }
  ConfigValues values;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty())
      throw ConfigError(origin + ": key '" + section + "' must be inside a [section]");
    for (const auto& [name, leaf] : body) {
      const std::string full = section + "." + name;
      if (!find_key(full)) throw ConfigError(origin + ": unknown config key '" + full + "'");
      values[full] = trim(leaf.get_value<std::string>());
    }
  }
  return values;
}

ConfigValues read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.string());
}

void merge_config_values(ConfigValues& base, const ConfigValues& top, const std::string& origin) {
  for (const auto& [k, v] : top) {
    if (!find_key(k)) throw ConfigError(origin + ": unknown config key '" + k + "'");
    base[k] = v;
  }
}

RunConfig resolve_config(const ConfigValues& values) {
  RunConfig c;
  c.pretrain.task = TaskKind::aux;
  c.train.task = TaskKind::seg;
  ConfigValues all = default_config_values();
  merge_config_values(all, values, "config");
  for (const auto& k : registry()) k.set(c, k.name, all.at(k.name));
  c.pretrain.seed = c.train.seed = c.seed;
  c.pretrain.augment = false;
  if (c.deterministic) c.workers = 1;
  if (c.phantom.radius_min_um > c.phantom.radius_max_um)
    throw ConfigError("config key 'phantom.radius_min_um' exceeds 'phantom.radius_max_um'");
  if (!(c.preprocess_options.clip_low_pct >= 0 &&
        c.preprocess_options.clip_low_pct < c.preprocess_options.clip_high_pct &&
        c.preprocess_options.clip_high_pct <= 100))
    throw ConfigError("config keys 'preprocess.clip_low_pct'/'preprocess.clip_high_pct' must satisfy 0 <= low < high <= 100");
  c.model.input_size = c.train.sample_size;
  return c;
}

std::string format_config(const ConfigValues& values) {
  std::ostringstream out;
  std::string current;
  for (const auto& [k, v] : values) {
    const auto dot = k.find('.');
    const std::string section = k.substr(0, dot);
    if (section != current) {
      if (!current.empty()) out << '\n';
      out << '[' << section << "]\n";
      current = section;
    }
    out << k.substr(dot + 1) << " = " << v << '\n';
  }
  return out.str();
}

}  // namespace neurotube
