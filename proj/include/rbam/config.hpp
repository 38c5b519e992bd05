#pragma once

// Flat "key = value" run configuration with '#' comments. Every key maps onto
// a field of ModelConfig, TrainConfig or the run paths; unknown keys are
// rejected.

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "rbam/errors.hpp"
#include "rbam/optim.hpp"
#include "rbam/rbam_net.hpp"

namespace rbam {

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string manifest;
  std::string checkpoint;
  std::string out_dir;

  bool operator==(const RunConfig&) const = default;

  void validate() const {
    model.validate();
    train.validate();
    if (model.scale != train.scale) throw ConfigError("model and training scale differ");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class N>
N parse_number(const std::string& key, const std::string& text) {
  N v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) throw ConfigError("invalid value '" + text + "' for " + key);
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("invalid boolean '" + text + "' for " + key);
}

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<std::pair<std::string, Field>>& config_fields() {
  static const std::vector<std::pair<std::string, Field>> fields = [] {
    std::vector<std::pair<std::string, Field>> f;
    auto size_field = [&](const char* key, auto member) {
      f.push_back({key, {[key, member](RunConfig& c, const std::string& v) { member(c) = parse_number<std::size_t>(key, v); },
                         [member](const RunConfig& c) { return std::to_string(member(c)); }}});
    };
    auto double_field = [&](const char* key, auto member) {
      f.push_back({key, {[key, member](RunConfig& c, const std::string& v) { member(c) = parse_number<double>(key, v); },
                         [member](const RunConfig& c) { return format_double(member(c)); }}});
    };
    auto bool_field = [&](const char* key, auto member) {
      f.push_back({key, {[key, member](RunConfig& c, const std::string& v) { member(c) = parse_bool(key, v); },
                         [member](const RunConfig& c) {
                           return std::string(member(c) ? "true" : "false");
                         }}});
    };
    auto string_field = [&](const char* key, auto member) {
      f.push_back({key, {[member](RunConfig& c, const std::string& v) { member(c) = v; },
                         [member](const RunConfig& c) { return member(c); }}});
    };

    size_field("blocks", [](auto& c) -> auto& { return c.model.blocks; });
    size_field("channels", [](auto& c) -> auto& { return c.model.channels; });
    f.push_back({"scale",
                 {[](RunConfig& c, const std::string& v) { c.model.scale = c.train.scale = parse_number<std::size_t>("scale", v); },
                  [](const RunConfig& c) { return std::to_string(c.model.scale); }}});
    size_field("sa_pool", [](auto& c) -> auto& { return c.model.sa_pool; });
    size_field("ca_reduction", [](auto& c) -> auto& { return c.model.ca_reduction; });
    bool_field("use_ca", [](auto& c) -> auto& { return c.model.use_ca; });
    bool_field("use_sa", [](auto& c) -> auto& { return c.model.use_sa; });
    bool_field("use_first_order", [](auto& c) -> auto& { return c.model.use_first_order; });
    bool_field("use_second_order", [](auto& c) -> auto& { return c.model.use_second_order; });

    size_field("batch_size", [](auto& c) -> auto& { return c.train.batch_size; });
    size_field("patch_size", [](auto& c) -> auto& { return c.train.patch_size; });
    double_field("lr0", [](auto& c) -> auto& { return c.train.lr0; });
    size_field("lr_halve_every", [](auto& c) -> auto& { return c.train.lr_halve_every; });
    size_field("epochs", [](auto& c) -> auto& { return c.train.epochs; });
    double_field("beta1", [](auto& c) -> auto& { return c.train.beta1; });
    double_field("beta2", [](auto& c) -> auto& { return c.train.beta2; });
    double_field("eps", [](auto& c) -> auto& { return c.train.eps; });
    f.push_back({"seed",
                 {[](RunConfig& c, const std::string& v) { c.train.seed = parse_number<std::uint64_t>("seed", v); },
                  [](const RunConfig& c) { return std::to_string(c.train.seed); }}});
    size_field("checkpoint_every", [](auto& c) -> auto& { return c.train.checkpoint_every; });
    size_field("steps_per_epoch", [](auto& c) -> auto& { return c.train.steps_per_epoch; });

    string_field("manifest", [](auto& c) -> auto& { return c.manifest; });
    string_field("checkpoint", [](auto& c) -> auto& { return c.checkpoint; });
    string_field("out_dir", [](auto& c) -> auto& { return c.out_dir; });
    return f;
  }();
  return fields;
}

}  // namespace detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, f] : detail::config_fields()) keys.push_back(k);
  return keys;
}

// Sets one key. Errors name the key; callers add the source location.
inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [k, f] : detail::config_fields()) {
    if (k == key) {
      f.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown key '" + key + "'");
}

inline std::string get_config_value(const RunConfig& cfg, const std::string& key) {
  for (const auto& [k, f] : detail::config_fields()) {
    if (k == key) return f.get(cfg);
  }
  throw ConfigError("unknown key '" + key + "'");
}

// Applies "key = value" lines on top of `cfg`.
inline void apply_config(RunConfig& cfg, std::istream& in, const std::string& source = "config") {
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  apply_config(cfg, in);
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  RunConfig cfg;
  apply_config(cfg, in, path);
  return cfg;
}

// Every key in declaration order; parse_config(serialize_config(c)) == c.
inline std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, f] : detail::config_fields()) out += k + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace rbam
