#pragma once

#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "specrecon/detail/text.hpp"
#include "specrecon/error.hpp"
#include "specrecon/gaussian_lab.hpp"

namespace specrecon {

enum class Command { Simulate, Reconstruct, Validate, Scaling, MpCompare, Insert };
enum class OutputFormat { Csv, Json, Svg };

inline std::string_view to_string(Command c) noexcept {
  switch (c) {
    case Command::Simulate: return "simulate";
    case Command::Reconstruct: return "reconstruct";
    case Command::Validate: return "validate";
    case Command::Scaling: return "scaling";
    case Command::MpCompare: return "mp-compare";
    case Command::Insert: return "insert";
  }
  return "validate";
}

inline std::string_view to_string(OutputFormat f) noexcept {
  switch (f) {
    case OutputFormat::Csv: return "csv";
    case OutputFormat::Json: return "json";
    case OutputFormat::Svg: return "svg";
  }
  return "csv";
}

/// Everything one run needs. Every field has a default, so an empty config file is a
/// complete configuration.
struct ExperimentConfig {
  Command command = Command::Validate;
  std::size_t p = 100;
  double c = 2.0;
  std::uint64_t seed = 0;
  ModelKind model = LinearModel{1.0, 10.0};
  Sampling sampling = Sampling::Regular;
  std::size_t trials = 20;
  std::size_t K = 2;
  double C_universal = 1.0;
  double epsilon = 0.5;
  std::string output_dir = "specrecon_out";
  std::set<OutputFormat> formats = {OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg};
  bool center = false;
  std::size_t insert_index = 0;  // 1-based; 0 picks the middle index
  std::vector<double> c_values = {2.0, 4.0, 8.0, 16.0};
  double eta = 1e-3;

  ExperimentShape shape() const { return ExperimentShape::from_ratio(p, c, seed); }
  GroundTruthModel ground_truth() const { return GroundTruthModel::make(model, p, sampling, seed); }
  bool wants(OutputFormat f) const { return formats.count(f) > 0; }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

[[noreturn]] inline void config_error(std::size_t line, std::string_view key, const std::string& msg) {
  std::string where = line > 0 ? "line " + std::to_string(line) + ": " : std::string();
  throw Error(ErrorKind::ConfigParse, where + "key '" + std::string(key) + "': " + msg);
}

inline double parse_real(std::string_view text, std::size_t line, std::string_view key) {
  const std::string s(trim(text));
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    config_error(line, key, "expected a real number, got '" + s + "'");
  }
}

inline std::uint64_t parse_unsigned(std::string_view text, std::size_t line, std::string_view key) {
  const std::string s(trim(text));
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    config_error(line, key, "expected a non-negative integer, got '" + s + "'");
  }
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    config_error(line, key, "integer out of range: '" + s + "'");
  }
}

inline bool parse_bool(std::string_view text, std::size_t line, std::string_view key) {
  const auto s = trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  config_error(line, key, "expected true or false, got '" + std::string(s) + "'");
}

inline ModelKind parse_model(std::string_view text, std::size_t line) {
  const auto s = trim(text);
  const auto open = s.find('(');
  const std::string name(trim(s.substr(0, open)));
  std::vector<double> args;
  if (open != std::string_view::npos) {
    if (s.back() != ')') config_error(line, "model", "missing ')'");
    const auto inner = s.substr(open + 1, s.size() - open - 2);
    if (!trim(inner).empty()) {
      for (const auto& a : split(inner, ',')) args.push_back(parse_real(a, line, "model"));
    }
  }
  const auto need = [&](std::size_t k) {
    if (args.size() != k) {
      config_error(line, "model", name + " takes " + std::to_string(k) + " arguments, got " +
                                      std::to_string(args.size()));
    }
  };
  if (name == "identity") {
    need(0);
    return IdentityModel{};
  }
  if (name == "linear") {
    need(2);
    return LinearModel{args[0], args[1]};
  }
  if (name == "geometric") {
    need(2);
    return GeometricModel{args[0], args[1]};
  }
  if (name == "two_cluster") {
    need(3);
    return TwoClusterModel{args[0], args[1], args[2]};
  }
  if (name == "explicit") {
    if (args.empty()) config_error(line, "model", "explicit needs at least one value");
    return ExplicitModel{args};
  }
  config_error(line, "model", "unknown model '" + name + "'");
}

inline std::string model_text(const ModelKind& kind) {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, IdentityModel>) {
          return "identity";
        } else if constexpr (std::is_same_v<T, LinearModel>) {
          return "linear(" + format_double(m.lo) + ", " + format_double(m.hi) + ")";
        } else if constexpr (std::is_same_v<T, GeometricModel>) {
          return "geometric(" + format_double(m.lo) + ", " + format_double(m.hi) + ")";
        } else if constexpr (std::is_same_v<T, TwoClusterModel>) {
          return "two_cluster(" + format_double(m.v1) + ", " + format_double(m.v2) + ", " +
                 format_double(m.fraction) + ")";
        } else {
          std::string out = "explicit(";
          for (std::size_t k = 0; k < m.values.size(); ++k) out += (k ? ", " : "") + format_double(m.values[k]);
          return out + ")";
        }
      },
      kind);
}

}  // namespace detail

inline Command parse_command(std::string_view text) {
  const auto s = detail::trim(text);
  for (auto c : {Command::Simulate, Command::Reconstruct, Command::Validate, Command::Scaling, Command::MpCompare,
                 Command::Insert}) {
    if (s == to_string(c)) return c;
  }
  throw Error(ErrorKind::ConfigParse, "unknown command '" + std::string(s) + "'");
}

/// Applies one `key = value` assignment. `line` is only used in diagnostics.
inline void apply_setting(ExperimentConfig& cfg, std::string_view key_in, std::string_view value_in,
                          std::size_t line = 0) {
  using namespace detail;
  const auto key = trim(key_in);
  const auto value = trim(value_in);
  if (key == "command") {
    try {
      cfg.command = parse_command(value);
    } catch (const Error&) {
      config_error(line, key, "unknown command '" + std::string(value) + "'");
    }
  } else if (key == "p") {
    const auto v = parse_unsigned(value, line, key);
    if (v < 1) config_error(line, key, "must be >= 1");
    cfg.p = v;
  } else if (key == "c") {
    const double v = parse_real(value, line, key);
    if (!(v > 0.0)) config_error(line, key, "must be > 0");
    cfg.c = v;
  } else if (key == "seed") {
    cfg.seed = parse_unsigned(value, line, key);
  } else if (key == "model") {
    cfg.model = parse_model(value, line);
  } else if (key == "sampling") {
    if (value == "regular") {
      cfg.sampling = Sampling::Regular;
    } else if (value == "iid") {
      cfg.sampling = Sampling::Iid;
    } else {
      config_error(line, key, "expected regular or iid");
    }
  } else if (key == "trials") {
    const auto v = parse_unsigned(value, line, key);
    if (v < 1) config_error(line, key, "must be >= 1");
    cfg.trials = v;
  } else if (key == "K") {
    cfg.K = parse_unsigned(value, line, key);
  } else if (key == "C_universal") {
    const double v = parse_real(value, line, key);
    if (!(v > 0.0)) config_error(line, key, "must be > 0");
    cfg.C_universal = v;
  } else if (key == "epsilon") {
    const double v = parse_real(value, line, key);
    if (!(v > 0.0 && v < 1.0)) config_error(line, key, "must lie in (0, 1)");
    cfg.epsilon = v;
  } else if (key == "output_dir") {
    if (value.empty()) config_error(line, key, "must not be empty");
    cfg.output_dir = std::string(value);
  } else if (key == "formats") {
    std::set<OutputFormat> formats;
    for (const auto& f : split(value, ',')) {
      if (f == "csv") {
        formats.insert(OutputFormat::Csv);
      } else if (f == "json") {
        formats.insert(OutputFormat::Json);
      } else if (f == "svg") {
        formats.insert(OutputFormat::Svg);
      } else {
        config_error(line, key, "unknown format '" + f + "'");
      }
    }
    cfg.formats = std::move(formats);
  } else if (key == "center") {
    cfg.center = parse_bool(value, line, key);
  } else if (key == "insert_index") {
    cfg.insert_index = parse_unsigned(value, line, key);
  } else if (key == "c_values") {
    std::vector<double> cs;
    for (const auto& v : split(value, ',')) {
      const double x = parse_real(v, line, key);
      if (!(x > 0.0)) config_error(line, key, "every value must be > 0");
      cs.push_back(x);
    }
    if (cs.size() < 2) config_error(line, key, "needs at least two values");
    cfg.c_values = std::move(cs);
  } else if (key == "eta") {
    const double v = parse_real(value, line, key);
    if (!(v > 0.0)) config_error(line, key, "must be > 0");
    cfg.eta = v;
  } else {
    config_error(line, key, "unknown key");
  }
}

/// `key=value` form used by --set on the command line.
inline void apply_override(ExperimentConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorKind::ConfigParse, "override '" + std::string(assignment) + "' is not key=value");
  }
  apply_setting(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

/// Flat text format: one `key = value` per line, `#` starts a comment. Unknown keys
/// and malformed values are errors.
inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    auto line = text.substr(start, end == std::string_view::npos ? text.npos : end - start);
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw Error(ErrorKind::ConfigParse, "line " + std::to_string(lineno) + ": expected key = value");
      }
      const std::string key(detail::trim(line.substr(0, eq)));
      if (!seen.insert(key).second) detail::config_error(lineno, key, "given twice");
      apply_setting(cfg, key, line.substr(eq + 1), lineno);
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return cfg;
}

/// Writes every field; parse_config(serialize_config(c)) == c.
inline std::string serialize_config(const ExperimentConfig& cfg) {
  using detail::format_double;
  std::ostringstream os;
  os << "command = " << to_string(cfg.command) << '\n';
  os << "p = " << cfg.p << '\n';
  os << "c = " << format_double(cfg.c) << '\n';
  os << "seed = " << cfg.seed << '\n';
  os << "model = " << detail::model_text(cfg.model) << '\n';
  os << "sampling = " << (cfg.sampling == Sampling::Regular ? "regular" : "iid") << '\n';
  os << "trials = " << cfg.trials << '\n';
  os << "K = " << cfg.K << '\n';
  os << "C_universal = " << format_double(cfg.C_universal) << '\n';
  os << "epsilon = " << format_double(cfg.epsilon) << '\n';
  os << "output_dir = " << cfg.output_dir << '\n';
  os << "formats = ";
  bool first = true;
  for (auto f : cfg.formats) {
    os << (first ? "" : ",") << to_string(f);
    first = false;
  }
  os << '\n';
  os << "center = " << (cfg.center ? "true" : "false") << '\n';
  os << "insert_index = " << cfg.insert_index << '\n';
  os << "c_values = ";
  for (std::size_t k = 0; k < cfg.c_values.size(); ++k) os << (k ? "," : "") << format_double(cfg.c_values[k]);
  os << '\n';
  os << "eta = " << format_double(cfg.eta) << '\n';
  return os.str();
}

inline nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json formats = nlohmann::json::array();
  for (auto f : cfg.formats) formats.push_back(std::string(to_string(f)));
  return {{"command", std::string(to_string(cfg.command))},
          {"p", cfg.p},
          {"c", cfg.c},
          {"seed", cfg.seed},
          {"model", detail::model_text(cfg.model)},
          {"sampling", cfg.sampling == Sampling::Regular ? "regular" : "iid"},
          {"trials", cfg.trials},
          {"K", cfg.K},
          {"C_universal", cfg.C_universal},
          {"epsilon", cfg.epsilon},
          {"output_dir", cfg.output_dir},
          {"formats", formats},
          {"center", cfg.center},
          {"insert_index", cfg.insert_index},
          {"c_values", cfg.c_values},
          {"eta", cfg.eta}};
}

}  // namespace specrecon
