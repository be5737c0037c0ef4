#pragma once

// Plain-text key=value configuration. A Registry binds dotted keys to fields
// of the module config structs, so a file (or flag override) can set any
// tunable and the resolved values can be written back out verbatim.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "wtl/binarize.hpp"
#include "wtl/cnn.hpp"
#include "wtl/completion.hpp"
#include "wtl/errors.hpp"
#include "wtl/labelgen.hpp"
#include "wtl/synth.hpp"

namespace wtl {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

/// Lines of `key = value`; blank lines and `#` comments are skipped.
inline KeyValues parse_key_values(std::string_view text, const std::string& origin = "config") {
  KeyValues out;
  std::istringstream in{std::string(text)};
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail(ErrorKind::format, origin + ":" + std::to_string(n) + ": expected key = value");
    auto key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) fail(ErrorKind::format, origin + ":" + std::to_string(n) + ": empty key");
    out.emplace_back(std::move(key), trim(std::string_view(t).substr(eq + 1)));
  }
  return out;
}

inline KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path.string());
}

class Registry {
 public:
  using Slot = std::variant<double*, int*, std::uint64_t*, std::string*>;

  void add(std::string key, Slot slot) { entries_.emplace_back(std::move(key), slot); }

  bool has(const std::string& key) const {
    for (const auto& [k, s] : entries_)
      if (k == key) return true;
    return false;
  }

  void set(const std::string& key, const std::string& value) {
    for (auto& [k, slot] : entries_) {
      if (k != key) continue;
      std::visit([&](auto* p) { parse_into(key, value, *p); }, slot);
      return;
    }
    fail(ErrorKind::format, "unknown config key '" + key + "'");
  }

  void apply(const KeyValues& kv) {
    for (const auto& [k, v] : kv) set(k, v);
  }

  /// Resolved configuration, one `key = value` per line in registration order.
  std::string dump() const {
    std::ostringstream os;
    for (const auto& [k, slot] : entries_) {
      os << k << " = ";
      std::visit([&](auto* p) { write(os, *p); }, slot);
      os << '\n';
    }
    return os.str();
  }

 private:
  template <typename T>
  static void parse_into(const std::string& key, const std::string& value, T& out) {
    if constexpr (std::is_same_v<T, std::string>) {
      out = value;
    } else {
      T v{};
      const auto* end = value.data() + value.size();
      const auto [ptr, ec] = std::from_chars(value.data(), end, v);
      if (ec != std::errc() || ptr != end) fail(ErrorKind::format, "config key '" + key + "': bad value '" + value + "'");
      out = v;
    }
  }

  template <typename T>
  static void write(std::ostream& os, const T& v) {
    if constexpr (std::is_same_v<T, double>) {
      // Shortest representation that round-trips through from_chars.
      char buf[64];
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
      os << std::string(buf, ptr);
    } else {
      os << v;
    }
  }

  std::vector<std::pair<std::string, Slot>> entries_;
};

inline void bind(Registry& r, CompletionConfig& c) {
  r.add("completion.seed_threshold", &c.seed_threshold);
  r.add("completion.checker_cell", &c.checker_cell);
  r.add("completion.step_p1", &c.step_probabilities[0]);
  r.add("completion.step_p2", &c.step_probabilities[1]);
  r.add("completion.step_p3", &c.step_probabilities[2]);
  r.add("completion.bad_prob_threshold", &c.bad_prob_threshold);
  r.add("completion.loop_grace", &c.loop_grace);
  r.add("completion.max_steps_per_tracer", &c.max_steps_per_tracer);
  r.add("completion.min_fragment", &c.min_fragment);
}

inline void bind(Registry& r, BinarizeConfig& c) {
  r.add("binarize.th_low", &c.th_low);
  r.add("binarize.delta_th", &c.delta_th);
  r.add("binarize.gap_tolerance", &c.gap_tolerance);
  r.add("binarize.prune_iterations", &c.prune_iterations);
  r.add("binarize.flank_rows", &c.flank_rows);
  r.add("binarize.cut_margin", &c.cut_margin);
}

inline void bind(Registry& r, cnn::TrainConfig& c) {
  r.add("train.learning_rate", &c.learning_rate);
  r.add("train.momentum", &c.momentum);
  r.add("train.batch_size", &c.batch_size);
  r.add("train.epochs", &c.epochs);
  r.add("train.label_scale", &c.label_scale);
  r.add("train.width_divisor", &c.width_divisor);
}

inline void bind(Registry& r, LabelGenConfig& c) {
  r.add("labels.per_image", &c.per_image);
  r.add("labels.validation_fraction", &c.validation_fraction);
  r.add("labels.jitter_probability", &c.jitter_probability);
}

inline void bind(Registry& r, SceneParams& c) {
  r.add("synth.height", &c.height);
  r.add("synth.width", &c.width);
  r.add("synth.complexity", &c.complexity);
  r.add("synth.antennas", &c.antennas);
  r.add("synth.noise", &c.noise);
  r.add("synth.gaps", &c.gaps);
  r.add("synth.gap_level", &c.gap_level);
  r.add("synth.peak", &c.peak);
}

}  // namespace wtl
