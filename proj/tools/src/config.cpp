#include "dbpc_cli/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <map>
#include <set>
#include <sstream>

namespace dbpc::cli {
namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"model", {"architecture", "layers", "height", "width"}},
      {"train",
       {"lambda_f", "lambda_b", "beta_c", "beta_r", "lr_y", "lr_w", "iterations", "batch_size", "epochs",
        "seed", "threads", "chunk"}},
      {"data", {"dir", "train_images", "train_labels", "test_images", "test_labels", "train_limit", "test_limit"}},
      {"augment", {"enabled", "rotation_deg", "translate_px"}},
      {"eval", {"mode", "reconstruction_limit", "reconstruct", "max_intensity"}},
      {"output", {"dir"}},
  };
  return keys;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  std::optional<std::string> raw(const std::string& key) const {
    if (!tree_) return std::nullopt;
    const auto value = tree_->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!value) return std::nullopt;
    // Allow trailing "# comment" on a value line.
    std::string v = *value;
    if (const auto hash = v.find('#'); hash != std::string::npos) v.erase(hash);
    return trim(v);
  }

  template <typename T>
  void read(const std::string& key, T& out) const {
    const auto text = raw(key);
    if (!text) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (*text == "true" || *text == "1" || *text == "yes" || *text == "on") {
        out = true;
      } else if (*text == "false" || *text == "0" || *text == "no" || *text == "off") {
        out = false;
      } else {
        fail(key, "expected a boolean, got '" + *text + "'");
      }
    } else if constexpr (std::is_same_v<T, std::string>) {
      out = *text;
    } else {
      T value{};
      const char* end = text->data() + text->size();
      const auto [ptr, ec] = std::from_chars(text->data(), end, value);
      if (ec != std::errc() || ptr != end || text->empty()) fail(key, "cannot parse '" + *text + "'");
      out = value;
    }
  }

  void read_path(const std::string& key, std::filesystem::path& out, const std::filesystem::path& base) const {
    std::string text;
    read(key, text);
    if (text.empty()) return;
    std::filesystem::path p(text);
    out = p.is_relative() && !base.empty() ? base / p : p;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError("config " + name_ + "." + key + ": " + what);
  }

  bool present() const { return tree_ != nullptr; }

 private:
  const pt::ptree* tree_;
  std::string name_;
};

Section section(const pt::ptree& root, const std::string& name) {
  const auto child = root.get_child_optional(pt::ptree::path_type(name, '\0'));
  return Section(child ? &*child : nullptr, name);
}

void check_known(const pt::ptree& root) {
  for (const auto& [name, body] : root) {
    const auto it = known_keys().find(name);
    if (it == known_keys().end()) {
      if (body.empty()) throw ConfigError("config key '" + name + "' must be inside a [section]");
      throw ConfigError("config: unknown section [" + name + "]");
    }
    for (const auto& [key, unused] : body) {
      if (!it->second.count(key)) throw ConfigError("config " + name + "." + key + ": unknown key");
    }
  }
}

std::size_t parse_size(const std::string& token, const std::string& item) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) {
    throw ConfigError("layer '" + item + "': bad number '" + token + "'");
  }
  return value;
}

}  // namespace

ExperimentConfig default_config() { return ExperimentConfig{}; }

std::vector<LayerSpec> parse_layer_list(const std::string& text) {
  std::vector<LayerSpec> layers;
  std::string normalized = text;
  for (char& c : normalized) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(normalized);
  std::string item;
  while (in >> item) {
    std::vector<std::string> parts;
    std::string part;
    std::istringstream fields(item);
    while (std::getline(fields, part, ':')) parts.push_back(part);
    if (parts.size() < 2 || parts.size() > 3) {
      throw ConfigError("layer '" + item + "': expected kind:size or conv:channels:kernel");
    }
    LayerSpec spec;
    try {
      spec.kind = parse_layer_kind(parts[0]);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("layer '" + item + "': " + e.what());
    }
    spec.size = parse_size(parts[1], item);
    if (parts.size() == 3) spec.kernel = parse_size(parts[2], item);
    layers.push_back(spec);
  }
  if (layers.empty()) throw ConfigError("empty layer list");
  return layers;
}

std::string format_layer_list(const std::vector<LayerSpec>& layers) {
  std::string out;
  for (const auto& spec : layers) {
    if (!out.empty()) out += ", ";
    out += std::string(to_string(spec.kind)) + ":" + std::to_string(spec.size);
    if (spec.kernel) out += ":" + std::to_string(spec.kernel);
  }
  return out;
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  pt::ptree root;
  try {
    std::istringstream in(text);
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  check_known(root);

  ExperimentConfig cfg;

  const Section model = section(root, "model");
  if (model.present()) {
    std::string name;
    model.read("architecture", name);
    const auto layers = model.raw("layers");
    if (layers && !name.empty() && name != "custom") {
      model.fail("layers", "give either a preset architecture or a layer list, not both");
    }
    Architecture arch;
    if (layers) {
      arch.layers = parse_layer_list(*layers);
      arch.height = 28;
      arch.width = 28;
      name = "custom";
    } else {
      if (name.empty()) model.fail("architecture", "missing (use a preset name or a layers list)");
      try {
        arch = preset_architecture(name);
      } catch (const ArchitectureError& e) {
        model.fail("architecture", e.what());
      }
    }
    model.read("height", arch.height);
    model.read("width", arch.width);
    try {
      validate(arch);
    } catch (const ArchitectureError& e) {
      model.fail(layers ? "layers" : "architecture", e.what());
    }
    cfg.architecture_name = name;
    cfg.architecture = arch;
  }

  const Section train = section(root, "train");
  Hyperparams& hp = cfg.hyper;
  train.read("lambda_f", hp.lambda_f);
  train.read("lambda_b", hp.lambda_b);
  train.read("beta_c", hp.beta_c);
  train.read("beta_r", hp.beta_r);
  train.read("lr_y", hp.lr_y);
  train.read("lr_w", hp.lr_w);
  train.read("iterations", hp.iterations);
  train.read("batch_size", hp.batch_size);
  train.read("epochs", hp.epochs);
  train.read("seed", hp.seed);
  train.read("threads", cfg.threads);
  train.read("chunk", cfg.chunk);
  try {
    hp.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config train.") + e.what());
  }
  if (cfg.threads == 0) train.fail("threads", "must be >= 1");
  if (cfg.chunk == 0) train.fail("chunk", "must be >= 1");

  const Section data = section(root, "data");
  std::filesystem::path dir;
  data.read_path("dir", dir, base_dir);
  if (!dir.empty()) {
    cfg.data.train_images = dir / "train-images-idx3-ubyte";
    cfg.data.train_labels = dir / "train-labels-idx1-ubyte";
    cfg.data.test_images = dir / "t10k-images-idx3-ubyte";
    cfg.data.test_labels = dir / "t10k-labels-idx1-ubyte";
  }
  data.read_path("train_images", cfg.data.train_images, base_dir);
  data.read_path("train_labels", cfg.data.train_labels, base_dir);
  data.read_path("test_images", cfg.data.test_images, base_dir);
  data.read_path("test_labels", cfg.data.test_labels, base_dir);
  data.read("train_limit", cfg.data.train_limit);
  data.read("test_limit", cfg.data.test_limit);

  const Section augment = section(root, "augment");
  augment.read("enabled", cfg.augment.enabled);
  augment.read("rotation_deg", cfg.augment.rotation_deg);
  augment.read("translate_px", cfg.augment.translate_px);
  try {
    cfg.augment.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config augment.") + e.what());
  }

  const Section eval = section(root, "eval");
  std::string mode;
  eval.read("mode", mode);
  if (!mode.empty()) {
    try {
      cfg.eval.mode = parse_classify_mode(mode);
    } catch (const std::invalid_argument& e) {
      eval.fail("mode", e.what());
    }
  }
  eval.read("reconstruction_limit", cfg.eval.reconstruction_limit);
  eval.read("reconstruct", cfg.eval.reconstruct);
  eval.read("max_intensity", cfg.eval.max_intensity);
  if (!(cfg.eval.max_intensity > 0.0)) eval.fail("max_intensity", "must be > 0");

  section(root, "output").read_path("dir", cfg.out_dir, base_dir);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

Architecture resolved_architecture(const ExperimentConfig& config) {
  return config.architecture ? *config.architecture : preset_architecture("dbpc-fcn-mnist");
}

}  // namespace dbpc::cli
