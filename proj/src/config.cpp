#include "mtqa/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace mtqa {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& v, const std::string& expect) {
  throw ConfigError("invalid value '" + v + "' for key '" + key + "' (expected " + expect + ")");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const std::string s = trim(v);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) {
    bad_value(key, v, std::is_floating_point_v<T> ? "a number" : "an integer");
  }
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  std::istringstream is(v);
  std::string item;
  while (std::getline(is, item, ',')) out.push_back(parse_number<T>(key, item));
  if (out.empty()) bad_value(key, v, "a comma-separated list");
  return out;
}

template <typename T>
std::string fmt(T v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    if constexpr (std::is_floating_point_v<T>) os << fmt(v[i]);
    else os << v[i];
  }
  return os.str();
}

template <typename F>
ConfigKey key(std::string name, std::string doc, std::function<std::string(const RunConfig&)> get, F set) {
  return ConfigKey{std::move(name), std::move(doc), std::move(get), std::move(set)};
}

std::vector<ConfigKey> build_keys() {
  std::vector<ConfigKey> k;
  using C = RunConfig;
  using S = const std::string&;
  k.push_back(key("preset", "scale preset: desk, paper or tiny", [](const C& c) { return c.preset; },
                  [](C& c, S v) { apply_preset(c, trim(v)); }));
  // data
  k.push_back(key("n_stacks", "training stacks generated by gen-data", [](const C& c) { return std::to_string(c.sizes.train_stacks); },
                  [](C& c, S v) { c.sizes.train_stacks = parse_number<int>("n_stacks", v); }));
  k.push_back(key("val_stacks", "validation stacks generated by gen-data", [](const C& c) { return std::to_string(c.sizes.val_stacks); },
                  [](C& c, S v) { c.sizes.val_stacks = parse_number<int>("val_stacks", v); }));
  k.push_back(key("test_stacks", "test stacks generated by gen-data", [](const C& c) { return std::to_string(c.sizes.test_stacks); },
                  [](C& c, S v) { c.sizes.test_stacks = parse_number<int>("test_stacks", v); }));
  k.push_back(key("slices_per_stack", "slices per generated stack", [](const C& c) { return std::to_string(c.synth.slices_per_stack); },
                  [](C& c, S v) { c.synth.slices_per_stack = parse_number<int>("slices_per_stack", v); }));
  k.push_back(key("label_fractions", "D,N,W proportions of generated slices",
                  [](const C& c) { return join(std::vector<double>(c.synth.label_fractions.begin(), c.synth.label_fractions.end())); },
                  [](C& c, S v) {
                    const auto f = parse_list<double>("label_fractions", v);
                    if (f.size() != 3) bad_value("label_fractions", v, "three comma-separated numbers");
                    c.synth.label_fractions = {f[0], f[1], f[2]};
                  }));
  k.push_back(key("corruption_strength", "artifact strength of N slices in [0,1]", [](const C& c) { return fmt(c.synth.corruption_strength); },
                  [](C& c, S v) { c.synth.corruption_strength = parse_number<double>("corruption_strength", v); }));
  k.push_back(key("distractor_rate", "probability of an off-brain signal void on D/W slices", [](const C& c) { return fmt(c.synth.distractor_rate); },
                  [](C& c, S v) { c.synth.distractor_rate = parse_number<double>("distractor_rate", v); }));
  k.push_back(key("image_size", "slice side length in pixels (also the model input size)", [](const C& c) { return std::to_string(c.synth.image_size); },
                  [](C& c, S v) {
                    c.synth.image_size = parse_number<int>("image_size", v);
                    c.train.arch.input_size = c.synth.image_size;
                  }));
  k.push_back(key("n_labeled", "training slices that keep their label (-1: all)", [](const C& c) { return std::to_string(c.n_labeled); },
                  [](C& c, S v) { c.n_labeled = parse_number<long>("n_labeled", v); }));
  k.push_back(key("data_seed", "seed of the synthetic generator", [](const C& c) { return std::to_string(c.data_seed); },
                  [](C& c, S v) { c.data_seed = parse_number<std::uint64_t>("data_seed", v); }));
  // roi
  k.push_back(key("area_min_frac", "A_min as a fraction of the image pixel count", [](const C& c) { return fmt(c.area_min_frac); },
                  [](C& c, S v) { c.area_min_frac = parse_number<double>("area_min_frac", v); }));
  k.push_back(key("seg_threshold", "intensity threshold of the stand-in brain segmenter", [](const C& c) { return fmt(c.seg_threshold); },
                  [](C& c, S v) { c.seg_threshold = static_cast<float>(parse_number<double>("seg_threshold", v)); }));
  k.push_back(key("roi_weighting", "ROI center weighting: normalized or literal",
                  [](const C& c) { return std::string(c.roi_weighting == RoiWeighting::Normalized ? "normalized" : "literal"); },
                  [](C& c, S v) {
                    const auto t = trim(v);
                    if (t == "normalized") c.roi_weighting = RoiWeighting::Normalized;
                    else if (t == "literal") c.roi_weighting = RoiWeighting::Literal;
                    else bad_value("roi_weighting", v, "normalized or literal");
                  }));
  // training
  k.push_back(key("alpha", "EMA coefficient of the teacher", [](const C& c) { return fmt(c.train.alpha); },
                  [](C& c, S v) { c.train.alpha = parse_number<double>("alpha", v); }));
  k.push_back(key("lambda", "weight of the KL consistency loss", [](const C& c) { return fmt(c.train.weights.lambda); },
                  [](C& c, S v) { c.train.weights.lambda = parse_number<double>("lambda", v); }));
  k.push_back(key("beta", "weight of the ROI feature consistency loss", [](const C& c) { return fmt(c.train.weights.beta); },
                  [](C& c, S v) { c.train.weights.beta = parse_number<double>("beta", v); }));
  k.push_back(key("gamma", "weight of the conditional entropy loss", [](const C& c) { return fmt(c.train.weights.gamma); },
                  [](C& c, S v) { c.train.weights.gamma = parse_number<double>("gamma", v); }));
  k.push_back(key("rampup_epochs", "ramp-up horizon T in epochs", [](const C& c) { return std::to_string(c.train.weights.rampup_epochs); },
                  [](C& c, S v) { c.train.weights.rampup_epochs = parse_number<int>("rampup_epochs", v); }));
  k.push_back(key("batch_size", "slices per batch", [](const C& c) { return std::to_string(c.train.batch_size); },
                  [](C& c, S v) { c.train.batch_size = parse_number<int>("batch_size", v); }));
  k.push_back(key("labeled_per_batch", "labeled slices per batch", [](const C& c) { return std::to_string(c.train.labeled_per_batch); },
                  [](C& c, S v) { c.train.labeled_per_batch = parse_number<int>("labeled_per_batch", v); }));
  k.push_back(key("epochs", "training epochs", [](const C& c) { return std::to_string(c.train.epochs); },
                  [](C& c, S v) { c.train.epochs = parse_number<int>("epochs", v); }));
  k.push_back(key("steps_per_epoch", "optimizer steps per epoch (0: one pass over the larger pool)",
                  [](const C& c) { return std::to_string(c.train.steps_per_epoch); },
                  [](C& c, S v) { c.train.steps_per_epoch = parse_number<int>("steps_per_epoch", v); }));
  k.push_back(key("lr0", "initial learning rate (cosine decay to 0)", [](const C& c) { return fmt(c.train.lr0); },
                  [](C& c, S v) { c.train.lr0 = parse_number<double>("lr0", v); }));
  k.push_back(key("seed", "training seed; run r uses seed + r", [](const C& c) { return std::to_string(c.train.seed); },
                  [](C& c, S v) { c.train.seed = parse_number<std::uint64_t>("seed", v); }));
  k.push_back(key("runs", "independent training runs", [](const C& c) { return std::to_string(c.train.runs); },
                  [](C& c, S v) { c.train.runs = parse_number<int>("runs", v); }));
  k.push_back(key("flip_prob", "perturbation: horizontal flip probability", [](const C& c) { return fmt(c.train.perturb.flip_prob); },
                  [](C& c, S v) { c.train.perturb.flip_prob = parse_number<double>("flip_prob", v); }));
  k.push_back(key("max_shift_frac", "perturbation: max translation as a fraction of the side (<= 0.1)",
                  [](const C& c) { return fmt(c.train.perturb.max_shift_frac); },
                  [](C& c, S v) { c.train.perturb.max_shift_frac = parse_number<double>("max_shift_frac", v); }));
  k.push_back(key("noise_sigma", "perturbation: Gaussian pixel noise std", [](const C& c) { return fmt(c.train.perturb.noise_sigma); },
                  [](C& c, S v) { c.train.perturb.noise_sigma = parse_number<double>("noise_sigma", v); }));
  k.push_back(key("widths", "conv block channel widths", [](const C& c) { return join(c.train.arch.widths); },
                  [](C& c, S v) { c.train.arch.widths = parse_list<int>("widths", v); }));
  k.push_back(key("activation", "conv nonlinearity: relu or elu",
                  [](const C& c) { return std::string(c.train.arch.activation == Activation::Relu ? "relu" : "elu"); },
                  [](C& c, S v) {
                    const auto t = trim(v);
                    if (t == "relu") c.train.arch.activation = Activation::Relu;
                    else if (t == "elu") c.train.arch.activation = Activation::Elu;
                    else bad_value("activation", v, "relu or elu");
                  }));
  // reacquisition
  k.push_back(key("q", "reacquisition proportions to simulate", [](const C& c) { return join(c.q_list); },
                  [](C& c, S v) { c.q_list = parse_list<double>("q", v); }));
  k.push_back(key("trials", "random-baseline trials per stack and q", [](const C& c) { return std::to_string(c.trials); },
                  [](C& c, S v) { c.trials = parse_number<int>("trials", v); }));
  k.push_back(key("reacq_seed", "seed of the random reacquisition baseline", [](const C& c) { return std::to_string(c.reacq_seed); },
                  [](C& c, S v) { c.reacq_seed = parse_number<std::uint64_t>("reacq_seed", v); }));
  return k;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

const ConfigKey* find_config_key(const std::string& name) {
  for (const auto& k : config_keys())
    if (k.name == name) return &k;
  return nullptr;
}

void apply_preset(RunConfig& cfg, const std::string& preset) {
  if (preset == "desk") {
    cfg.train = TrainConfig::desk();
    cfg.synth.image_size = 64;
  } else if (preset == "paper") {
    cfg.train = TrainConfig::paper();
    cfg.synth.image_size = 64;
  } else if (preset == "tiny") {
    cfg.train = TrainConfig::tiny();
    cfg.synth.image_size = 32;
    cfg.synth.slices_per_stack = 12;
    cfg.sizes = {4, 2, 2};
    cfg.trials = 20;
  } else {
    throw ConfigError("unknown preset '" + preset + "' (expected desk, paper or tiny)");
  }
  cfg.train.arch.input_size = cfg.synth.image_size;
  cfg.preset = preset;
}

void RunConfig::validate() const {
  synth.validate();
  train.validate();
  if (train.arch.input_size != synth.image_size) throw ConfigError("model input size differs from image_size");
  if (sizes.train_stacks < 0 || sizes.val_stacks < 0 || sizes.test_stacks < 0) {
    throw ConfigError("stack counts must be >= 0");
  }
  if (!(area_min_frac >= 0 && area_min_frac <= 1)) throw ConfigError("area_min_frac must lie in [0,1]");
  if (!(seg_threshold > 0 && seg_threshold < 1)) throw ConfigError("seg_threshold must lie in (0,1)");
  for (double q : q_list)
    if (!(q >= 0 && q <= 1)) throw ConfigError("every q must lie in [0,1]");
  if (trials < 0) throw ConfigError("trials must be >= 0");
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string k = trim(line.substr(0, eq));
    if (!find_config_key(k)) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": unknown key '" + k + "'");
    }
    out.emplace_back(k, trim(line.substr(eq + 1)));
  }
  return out;
}

RunConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& file_entries,
                         const std::map<std::string, std::string>& flag_entries) {
  RunConfig cfg;
  std::string preset = "desk";
  for (const auto& [k, v] : file_entries)
    if (k == "preset") preset = trim(v);
  if (auto it = flag_entries.find("preset"); it != flag_entries.end()) preset = trim(it->second);
  apply_preset(cfg, preset);
  auto apply = [&](const std::string& k, const std::string& v) {
    const ConfigKey* key = find_config_key(k);
    if (!key) throw ConfigError("unknown key '" + k + "'");
    if (k != "preset") key->set(cfg, v);
  };
  for (const auto& [k, v] : file_entries) apply(k, v);
  for (const auto& [k, v] : flag_entries) apply(k, v);
  cfg.synth.seed = cfg.data_seed;
  return cfg;
}

std::string dump_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "# resolved configuration\n";
  for (const auto& k : config_keys()) os << k.name << " = " << k.get(cfg) << '\n';
  return os.str();
}

}  // namespace mtqa
