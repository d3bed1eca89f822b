#include "vis2ir/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "vis2ir/error.hpp"

namespace vis2ir::config {

namespace {

struct Key {
  const char* section;
  const char* name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument("expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + v + "'");
}

ValueRange parse_range(const std::string& v) {
  const auto comma = v.find(',');
  if (comma == std::string::npos) throw std::invalid_argument("expected 'lo, hi', got '" + v + "'");
  return {parse_number<double>(trim(v.substr(0, comma))), parse_number<double>(trim(v.substr(comma + 1)))};
}

std::string fmt(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fmt(bool v) { return v ? "true" : "false"; }
template <typename T>
std::string fmt(T v) requires std::is_integral_v<T> { return std::to_string(v); }

#define V2I_INT(sec, key, member)                                                                   \
  Key {                                                                                             \
    sec, key, [](RunConfig& c, const std::string& v) { c.member = parse_number<decltype(c.member)>(v); }, \
        [](const RunConfig& c) { return fmt(c.member); }                                            \
  }
#define V2I_REAL(sec, key, member)                                                             \
  Key {                                                                                        \
    sec, key, [](RunConfig& c, const std::string& v) { c.member = parse_number<double>(v); }, \
        [](const RunConfig& c) { return fmt(c.member); }                                       \
  }
#define V2I_BOOL(sec, key, member)                                                       \
  Key {                                                                                  \
    sec, key, [](RunConfig& c, const std::string& v) { c.member = parse_bool(v); },      \
        [](const RunConfig& c) { return fmt(c.member); }                                 \
  }
#define V2I_PATH(sec, key, member)                                                       \
  Key {                                                                                  \
    sec, key, [](RunConfig& c, const std::string& v) { c.member = v; },                  \
        [](const RunConfig& c) { return c.member.string(); }                             \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      V2I_INT("generator", "input_channels", generator.input_channels),
      V2I_INT("generator", "output_channels", generator.output_channels),
      V2I_INT("generator", "base_width", generator.base_width),
      V2I_INT("generator", "g1_downsamples", generator.g1_downsamples),
      V2I_INT("generator", "g1_res_blocks", generator.g1_res_blocks),
      V2I_INT("generator", "g2_res_blocks", generator.g2_res_blocks),
      V2I_INT("generator", "enhancer_count", generator.enhancer_count),
      Key{"generator", "value_range",
          [](RunConfig& c, const std::string& v) { c.generator.value_range = parse_range(v); },
          [](const RunConfig& c) { return fmt(c.generator.value_range.lo) + ", " + fmt(c.generator.value_range.hi); }},

      V2I_INT("discriminator", "n_scales", discriminator.n_scales),
      V2I_INT("discriminator", "conv_layers", discriminator.conv_layers),
      V2I_INT("discriminator", "base_width", discriminator.base_width),

      V2I_REAL("loss", "lambda_fm", train.weights.lambda_fm),
      Key{"loss", "gan_mode",
          [](RunConfig& c, const std::string& v) { c.train.weights.gan_mode = losses::parse_gan_mode(v); },
          [](const RunConfig& c) { return losses::to_string(c.train.weights.gan_mode); }},

      V2I_INT("train", "stage1_steps", train.stage1_steps),
      V2I_INT("train", "joint_steps", train.joint_steps),
      V2I_INT("train", "batch_size", train.batch_size),
      V2I_REAL("train", "lr_g", train.lr_g),
      V2I_REAL("train", "lr_d", train.lr_d),
      Key{"train", "optimizer",
          [](RunConfig& c, const std::string& v) { c.train.optimizer = parse_optimizer_kind(v); },
          [](const RunConfig& c) { return to_string(c.train.optimizer); }},
      V2I_REAL("train", "beta1", train.beta1),
      V2I_REAL("train", "beta2", train.beta2),
      V2I_INT("train", "seed", train.seed),
      V2I_INT("train", "height", train.train_height),
      V2I_INT("train", "width", train.train_width),
      V2I_INT("train", "snapshot_every", train.snapshot_every),
      V2I_BOOL("train", "flip", train.flip),

      V2I_PATH("data", "manifest", data.manifest),
      V2I_INT("data", "synthetic_count", data.synthetic_count),
      Key{"data", "direction", [](RunConfig& c, const std::string& v) { c.data.direction = data::parse_direction(v); },
          [](const RunConfig& c) { return data::to_string(c.data.direction); }},

      V2I_INT("synthetic", "seed", synthetic.seed),
      V2I_INT("synthetic", "height", synthetic.height),
      V2I_INT("synthetic", "width", synthetic.width),
      V2I_INT("synthetic", "hotspot_count", synthetic.hotspot_count),
      V2I_REAL("synthetic", "blur_radius", synthetic.blur_radius),

      V2I_INT("superres", "res_blocks", superres.spec.res_blocks),
      V2I_INT("superres", "base_width", superres.spec.base_width),
      V2I_REAL("superres", "train_weight_l1", superres.spec.train_weight_l1),
      V2I_REAL("superres", "train_weight_fm", superres.spec.train_weight_fm),
      V2I_BOOL("superres", "zero_init_residual", superres.spec.zero_init_residual),
      V2I_INT("superres", "steps", superres.train.steps),
      V2I_INT("superres", "batch_size", superres.train.batch_size),
      V2I_REAL("superres", "lr", superres.train.lr),
      V2I_REAL("superres", "lr_d", superres.train.lr_d),
      V2I_INT("superres", "seed", superres.train.seed),
      V2I_INT("superres", "d_scales", superres.train.discriminator.n_scales),
      V2I_INT("superres", "d_conv_layers", superres.train.discriminator.conv_layers),
      V2I_INT("superres", "d_base_width", superres.train.discriminator.base_width),
      V2I_PATH("superres", "checkpoint", superres.checkpoint),

      V2I_PATH("output", "dir", output.dir),
  };
  return table;
}

#undef V2I_INT
#undef V2I_REAL
#undef V2I_BOOL
#undef V2I_PATH

}  // namespace

void RunConfig::finalize() {
  generator.validate();
  discriminator.input_channels = generator.input_channels + generator.output_channels;
  discriminator.validate();
  train.validate();
  if (data.synthetic_count < 0) throw ConfigError("data.synthetic_count", "must be >= 0");
  synthetic.validate();
  superres.spec.channels = generator.output_channels;
  superres.spec.value_range = generator.value_range;
  superres.spec.validate();
  superres.train.validate();
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  auto where = [&] { return source + ":" + std::to_string(lineno); };
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(t, where() + ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      bool known = false;
      for (const auto& k : keys()) known = known || section == k.section;
      if (!known) throw ConfigError(section, where() + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(t, where() + ": expected 'key = value'");
    const std::string name = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const std::string field = section.empty() ? name : section + "." + name;
    if (section.empty()) throw ConfigError(field, where() + ": key outside any [section]");
    const Key* key = nullptr;
    for (const auto& k : keys())
      if (section == k.section && name == k.name) key = &k;
    if (!key) throw ConfigError(field, where() + ": unknown key '" + field + "'");
    try {
      key->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(field, where() + ": " + e.what());
    } catch (const std::exception& e) {
      throw ConfigError(field, where() + ": " + e.what());
    }
  }
  cfg.finalize();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(file.string(), "cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_run_config(ss.str(), file.string());
  const auto base = file.parent_path();
  for (auto* p : {&cfg.data.manifest, &cfg.superres.checkpoint, &cfg.output.dir})
    if (!p->empty() && p->is_relative()) *p = base / *p;
  return cfg;
}

std::string to_ini(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const auto& k : keys()) {
    if (section != k.section) {
      if (!section.empty()) out += "\n";
      section = k.section;
      out += "[" + section + "]\n";
    }
    out += std::string(k.name) + " = " + k.get(config) + "\n";
  }
  return out;
}

}  // namespace vis2ir::config
