#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "macadapt/alloc_discrete.hpp"
#include "macadapt/errors.hpp"
#include "macadapt/fading.hpp"
#include "macadapt/mac.hpp"
#include "macadapt/partial_csi.hpp"
#include "macadapt/power_control.hpp"
#include "macadapt/verify.hpp"
#include "macadapt/weighted_region.hpp"

namespace macadapt::io {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline constexpr std::string_view kSchema = "macadapt/1";

/// A law file that cannot be read or does not describe the configured instance.
class LawFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Numbers and hashing

/// Fixed 12-significant-digit rendering used by every CSV.
inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) throw InvalidInput("not a number in " + std::string(what));
  return v;
}

// ---------------------------------------------------------------------------
// Schema helpers. Every object is checked against its allowed keys first.

namespace detail {

inline void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw InvalidInput(where + ": expected an object");
}

inline void allow_only(const json& j, std::initializer_list<std::string_view> keys, const std::string& where) {
  require_object(j, where);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (auto k : keys) known = known || it.key() == k;
    if (!known) throw InvalidInput(where + ": unknown field \"" + it.key() + "\"");
  }
}

inline const json& field(const json& j, std::string_view key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw InvalidInput(where + ": missing field \"" + std::string(key) + "\"");
  return *it;
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw InvalidInput(where + ": expected a number");
  return j.get<double>();
}

inline std::uint64_t count(const json& j, const std::string& where) {
  if (!j.is_number_unsigned()) throw InvalidInput(where + ": expected a nonnegative integer");
  return j.get<std::uint64_t>();
}

inline bool boolean(const json& j, const std::string& where) {
  if (!j.is_boolean()) throw InvalidInput(where + ": expected true or false");
  return j.get<bool>();
}

inline std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) throw InvalidInput(where + ": expected a string");
  return j.get<std::string>();
}

inline std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) throw InvalidInput(where + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(number(j[k], where + "[" + std::to_string(k) + "]"));
  return out;
}

template <class F>
void optional_field(const json& j, std::string_view key, F&& apply) {
  if (auto it = j.find(key); it != j.end()) apply(*it);
}

}  // namespace detail

inline FadingDistribution parse_distribution(const json& j, const std::string& where) {
  using namespace detail;
  require_object(j, where);
  const auto type = text(field(j, "type", where), where + ".type");
  if (type == "discrete") {
    allow_only(j, {"type", "states", "probs"}, where);
    return FadingDistribution::discrete(numbers(field(j, "states", where), where + ".states"),
                                        numbers(field(j, "probs", where), where + ".probs"));
  }
  if (type == "rayleigh") {
    allow_only(j, {"type", "second_moment"}, where);
    return FadingDistribution::rayleigh(number(field(j, "second_moment", where), where + ".second_moment"));
  }
  if (type == "uniform") {
    allow_only(j, {"type", "low", "high"}, where);
    return FadingDistribution::uniform(number(field(j, "low", where), where + ".low"),
                                       number(field(j, "high", where), where + ".high"));
  }
  if (type == "tabulated") {
    allow_only(j, {"type", "h", "cdf"}, where);
    return FadingDistribution::tabulated(numbers(field(j, "h", where), where + ".h"),
                                         numbers(field(j, "cdf", where), where + ".cdf"));
  }
  throw InvalidInput(where + ": unknown distribution type \"" + type + "\"");
}

inline Quantizer parse_quantizer(const json& j, const std::string& where) {
  detail::allow_only(j, {"breakpoints"}, where);
  Quantizer q{detail::numbers(detail::field(j, "breakpoints", where), where + ".breakpoints")};
  q.validate();
  return q;
}

inline MacInstance parse_instance(const json& j) {
  using namespace detail;
  const std::string where = "instance";
  allow_only(j, {"users", "powers", "power_mode", "weights", "log_base"}, where);
  MacInstance inst;
  const auto& users = field(j, "users", where);
  if (!users.is_array()) throw InvalidInput("instance.users: expected an array");
  for (std::size_t i = 0; i < users.size(); ++i)
    inst.users.push_back(parse_distribution(users[i], "instance.users[" + std::to_string(i) + "]"));
  inst.powers = numbers(field(j, "powers", where), "instance.powers");
  optional_field(j, "power_mode", [&](const json& v) {
    const auto m = text(v, "instance.power_mode");
    if (m == "fixed") inst.power_mode = PowerMode::fixed;
    else if (m == "average") inst.power_mode = PowerMode::average;
    else throw InvalidInput("instance.power_mode: expected \"fixed\" or \"average\"");
  });
  optional_field(j, "weights", [&](const json& v) { inst.weights = numbers(v, "instance.weights"); });
  optional_field(j, "log_base", [&](const json& v) {
    const auto b = text(v, "instance.log_base");
    if (b == "bits") inst.log_base = LogBase::bits;
    else if (b == "nats") inst.log_base = LogBase::nats;
    else throw InvalidInput("instance.log_base: expected \"bits\" or \"nats\"");
  });
  inst.validate();
  return inst;
}

// ---------------------------------------------------------------------------
// Run configuration

struct SweepSettings {
  std::vector<double> alpha_grid;  // empty: cosine grid with alpha_points points
  std::size_t alpha_points = 33;

  std::vector<double> grid() const { return alpha_grid.empty() ? cosine_alpha_grid(alpha_points) : alpha_grid; }
};

struct RunConfig {
  MacInstance instance;

  // sumrate
  std::optional<double> rho;
  std::vector<double> base_rates;
  std::vector<double> power_sweep;

  // region / region-partial
  SweepSettings region;
  WeightedOptions weighted;
  std::vector<Quantizer> quantizers;  // empty or one per user

  // power-opt
  SweepSettings power_region;
  bool power_region_enabled = true;
  PowerOptions power;
  double power_delta = 0.05;          // discretization step for non-discrete users
  std::vector<double> budget_sweep;

  // verify / simulate
  std::string law_file;               // resolved against the config's directory
  std::uint64_t samples = 100000;

  double tol = 1e-9;
  std::uint64_t seed = 1;
  std::string out_dir = ".";

  std::string config_hash;            // FNV-1a of the effective document without out_dir
};

struct Overrides {
  bool nats = false;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

namespace detail {

inline void parse_sweep(const json& j, SweepSettings& s, const std::string& where) {
  optional_field(j, "alpha_grid", [&](const json& v) {
    s.alpha_grid = numbers(v, where + ".alpha_grid");
    if (s.alpha_grid.empty()) throw InvalidInput(where + ".alpha_grid: must not be empty");
    for (double a : s.alpha_grid)
      if (!(a >= 0.0 && a <= 1.0)) throw InvalidInput(where + ".alpha_grid: values must lie in [0,1]");
  });
  optional_field(j, "alpha_points", [&](const json& v) {
    s.alpha_points = count(v, where + ".alpha_points");
    if (s.alpha_points < 2) throw InvalidInput(where + ".alpha_points: at least 2 points are required");
  });
}

inline PowerPin parse_pin(const json& j, const std::string& where) {
  allow_only(j, {"user", "state", "power", "block"}, where);
  PowerPin pin;
  const auto user = count(field(j, "user", where), where + ".user");
  const auto state = count(field(j, "state", where), where + ".state");
  if (user == 0 || state == 0) throw InvalidInput(where + ": user and state are 1-based");
  pin.user = user - 1;
  pin.state = state - 1;
  pin.power = number(field(j, "power", where), where + ".power");
  optional_field(j, "block", [&](const json& v) { pin.block = count(v, where + ".block"); });
  return pin;
}

}  // namespace detail

/// Validates a parsed document, applies CLI overrides and fills a RunConfig.
/// `base_dir` anchors relative paths inside the document.
inline RunConfig build_config(json doc, const Overrides& ov = {}, const std::filesystem::path& base_dir = {}) {
  using namespace detail;
  allow_only(doc, {"schema", "instance", "sumrate", "region", "partial", "power", "verify", "tol", "seed", "out_dir"},
             "config");
  optional_field(doc, "schema", [&](const json& v) {
    if (text(v, "schema") != kSchema) throw InvalidInput("schema: expected \"macadapt/1\"");
  });
  if (ov.nats) {
    if (!doc.contains("instance") || !doc["instance"].is_object()) throw InvalidInput("config: missing instance");
    doc["instance"]["log_base"] = "nats";
  }
  if (ov.tol) doc["tol"] = *ov.tol;
  if (ov.seed) doc["seed"] = *ov.seed;
  if (ov.out_dir) doc["out_dir"] = *ov.out_dir;

  RunConfig cfg;
  cfg.instance = parse_instance(field(doc, "instance", "config"));

  optional_field(doc, "sumrate", [&](const json& s) {
    allow_only(s, {"rho", "base_rates", "power_sweep", "nodes", "fallback_delta"}, "sumrate");
    optional_field(s, "rho", [&](const json& v) { cfg.rho = number(v, "sumrate.rho"); });
    optional_field(s, "base_rates", [&](const json& v) { cfg.base_rates = numbers(v, "sumrate.base_rates"); });
    optional_field(s, "power_sweep", [&](const json& v) { cfg.power_sweep = numbers(v, "sumrate.power_sweep"); });
    optional_field(s, "nodes", [&](const json& v) { cfg.weighted.nodes = count(v, "sumrate.nodes"); });
    optional_field(s, "fallback_delta",
                   [&](const json& v) { cfg.weighted.fallback_delta = number(v, "sumrate.fallback_delta"); });
  });
  optional_field(doc, "region", [&](const json& s) {
    allow_only(s, {"alpha_grid", "alpha_points", "nodes", "fallback_delta"}, "region");
    parse_sweep(s, cfg.region, "region");
    optional_field(s, "nodes", [&](const json& v) { cfg.weighted.nodes = count(v, "region.nodes"); });
    optional_field(s, "fallback_delta",
                   [&](const json& v) { cfg.weighted.fallback_delta = number(v, "region.fallback_delta"); });
  });
  optional_field(doc, "partial", [&](const json& s) {
    allow_only(s, {"quantizers"}, "partial");
    const auto& qs = field(s, "quantizers", "partial");
    if (!qs.is_array() || qs.size() != cfg.instance.size())
      throw InvalidInput("partial.quantizers: expected one quantizer per user");
    for (std::size_t k = 0; k < qs.size(); ++k)
      cfg.quantizers.push_back(parse_quantizer(qs[k], "partial.quantizers[" + std::to_string(k) + "]"));
  });
  optional_field(doc, "power", [&](const json& s) {
    allow_only(s, {"alpha_grid", "alpha_points", "region", "tol", "max_iter", "restart", "trace", "pins", "delta",
                   "budget_sweep"},
               "power");
    parse_sweep(s, cfg.power_region, "power");
    optional_field(s, "region", [&](const json& v) { cfg.power_region_enabled = boolean(v, "power.region"); });
    optional_field(s, "tol", [&](const json& v) { cfg.power.tol = number(v, "power.tol"); });
    optional_field(s, "max_iter", [&](const json& v) { cfg.power.max_iter = count(v, "power.max_iter"); });
    optional_field(s, "restart", [&](const json& v) { cfg.power.restart = boolean(v, "power.restart"); });
    optional_field(s, "trace", [&](const json& v) { cfg.power.trace = boolean(v, "power.trace"); });
    optional_field(s, "delta", [&](const json& v) { cfg.power_delta = number(v, "power.delta"); });
    optional_field(s, "budget_sweep", [&](const json& v) { cfg.budget_sweep = numbers(v, "power.budget_sweep"); });
    optional_field(s, "pins", [&](const json& v) {
      if (!v.is_array()) throw InvalidInput("power.pins: expected an array");
      for (std::size_t k = 0; k < v.size(); ++k)
        cfg.power.pins.push_back(parse_pin(v[k], "power.pins[" + std::to_string(k) + "]"));
    });
    if (!(cfg.power.tol > 0.0)) throw InvalidInput("power.tol: must be positive");
    if (!(cfg.power_delta > 0.0 && cfg.power_delta < 1.0)) throw InvalidInput("power.delta: must lie in (0,1)");
    for (double b : cfg.budget_sweep)
      if (!(b >= 0.0) || !std::isfinite(b)) throw InvalidInput("power.budget_sweep: budgets must be nonnegative");
  });
  optional_field(doc, "verify", [&](const json& s) {
    allow_only(s, {"law_file", "samples"}, "verify");
    optional_field(s, "law_file", [&](const json& v) {
      std::filesystem::path p = text(v, "verify.law_file");
      cfg.law_file = (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();
    });
    optional_field(s, "samples", [&](const json& v) { cfg.samples = count(v, "verify.samples"); });
  });
  optional_field(doc, "tol", [&](const json& v) { cfg.tol = number(v, "tol"); });
  optional_field(doc, "seed", [&](const json& v) { cfg.seed = count(v, "seed"); });
  optional_field(doc, "out_dir", [&](const json& v) { cfg.out_dir = text(v, "out_dir"); });

  if (!(cfg.tol >= 0.0) || !std::isfinite(cfg.tol)) throw InvalidInput("tol: must be finite and nonnegative");
  if (!(cfg.weighted.fallback_delta > 0.0 && cfg.weighted.fallback_delta < 1.0))
    throw InvalidInput("fallback_delta: must lie in (0,1)");
  if (cfg.weighted.nodes < 2) throw InvalidInput("nodes: at least 2 are required");
  for (double p : cfg.power_sweep)
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidInput("sumrate.power_sweep: powers must be nonnegative");

  doc.erase("out_dir");
  cfg.config_hash = hex64(fnv1a(doc.dump()));
  return cfg;
}

inline RunConfig parse_config(std::string_view text, const Overrides& ov = {},
                              const std::filesystem::path& base_dir = {}) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string("malformed JSON: ") + e.what());
  }
  return build_config(std::move(doc), ov, base_dir);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline RunConfig load_config(const std::filesystem::path& path, const Overrides& ov = {}) {
  return parse_config(read_file(path), ov, path.parent_path());
}

// ---------------------------------------------------------------------------
// CSV writers

class CsvWriter {
 public:
  explicit CsvWriter(std::initializer_list<std::string_view> header) {
    bool first = true;
    for (auto h : header) {
      if (!first) out_ += ',';
      out_ += h;
      first = false;
    }
    out_ += '\n';
  }
  template <class... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((out_ += (first ? "" : ","), out_ += cell(cells), first = false), ...);
    out_ += '\n';
  }
  const std::string& str() const noexcept { return out_; }

 private:
  static std::string cell(double v) { return fmt(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }

  std::string out_;
};

/// The value a 12-digit CSV cell reads back as.
inline double canonical(double x) { return std::strtod(fmt(x).c_str(), nullptr); }

namespace detail {

// Canonical probabilities: 12-digit values with the last one closing the sum,
// so that an imported law exports to the same text.
inline std::vector<double> canonical_probs(const law::Discrete& d) {
  std::vector<double> out;
  double run = 0.0;
  for (std::size_t j = 0; j + 1 < d.probs.size(); ++j) {
    out.push_back(canonical(d.probs[j]));
    run += out.back();
  }
  out.push_back(canonical(1.0 - run));
  return out;
}

}  // namespace detail

/// Per-state rates of a law over discrete users. `state` is the magnitude and
/// `cumulative_level` the probability of all states up to and including it.
/// Derived columns are computed from the written values.
inline std::string rate_law_csv(const std::vector<FadingDistribution>& users,
                                const std::vector<std::vector<double>>& rates) {
  CsvWriter w({"user", "state", "probability", "rate", "cumulative_level"});
  for (std::size_t i = 0; i < users.size(); ++i) {
    const auto& d = users[i].as_discrete();
    const auto probs = detail::canonical_probs(d);
    double run = 0.0;
    for (std::size_t j = 0; j < d.states.size(); ++j) {
      run += probs[j];
      w.row(i + 1, d.states[j], probs[j], rates[i][j], j + 1 == d.states.size() ? 1.0 : run);
    }
  }
  return w.str();
}

inline std::string rate_law_csv(const DiscreteRateLaw& law) {
  return rate_law_csv(law.grid.users, law.state_rates);
}

/// Rate law sampled on an even quantile grid k / points, k = 0..points-1.
inline std::string sampled_law_csv(const std::vector<FadingDistribution>& users, const RateLaw& law,
                                   std::size_t points = 200) {
  CsvWriter w({"user", "quantile", "h", "rate"});
  for (std::size_t i = 0; i < users.size(); ++i) {
    for (std::size_t k = 0; k < points; ++k) {
      const double q = double(k) / double(points);
      const double h = k == 0 ? users[i].support_min() : users[i].inverse_cdf(q);
      w.row(i + 1, q, h, law.rate(i, h));
    }
  }
  return w.str();
}

inline std::string region_csv(const RegionBoundary& rb) {
  CsvWriter w({"alpha", "direction", "ER1", "ER2", "weighted_value"});
  for (const auto& p : rb.points) w.row(p.alpha, p.direction, p.er1, p.er2, p.weighted_value);
  return w.str();
}

inline std::string power_law_csv(const std::vector<FadingDistribution>& users, const PowerLaw& law) {
  CsvWriter w({"user", "state", "probability", "power", "received_power"});
  for (std::size_t i = 0; i < users.size(); ++i) {
    const auto& d = users[i].as_discrete();
    const auto probs = detail::canonical_probs(d);
    for (std::size_t j = 0; j < d.states.size(); ++j) {
      const double h = canonical(d.states[j]), p = canonical(law.power[i][j]);
      w.row(i + 1, h, probs[j], p, h * h * p);
    }
  }
  return w.str();
}

inline std::string trace_csv(const std::vector<TracePoint>& trace) {
  CsvWriter w({"iter", "value", "grad_norm"});
  for (const auto& t : trace) w.row(t.iter, t.value, t.grad_norm);
  return w.str();
}

// ---------------------------------------------------------------------------
// CSV readers

namespace detail {

inline std::vector<std::vector<std::string>> read_csv(std::string_view text, std::initializer_list<std::string_view> header) {
  std::vector<std::vector<std::string>> rows;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t c = 0;
    for (;;) {
      auto comma = line.find(',', c);
      cells.emplace_back(line.substr(c, comma == std::string_view::npos ? std::string_view::npos : comma - c));
      if (comma == std::string_view::npos) break;
      c = comma + 1;
    }
    if (first) {
      std::vector<std::string> want(header.begin(), header.end());
      if (cells != want) throw InvalidInput("unexpected CSV header");
      first = false;
      continue;
    }
    if (cells.size() != header.size()) throw InvalidInput("CSV row has the wrong number of columns");
    rows.push_back(std::move(cells));
  }
  if (first) throw InvalidInput("empty CSV");
  return rows;
}

/// Groups rows by the 1-based user column, which must run 1, 1, .., 2, 2, ...
template <class F>
void by_user(const std::vector<std::vector<std::string>>& rows, F&& take) {
  std::size_t expected = 1;
  bool seen = false;
  for (const auto& r : rows) {
    const double u = parse_double(r[0], "user column");
    if (seen && u == double(expected + 1)) ++expected;
    seen = true;
    if (u != double(expected)) throw InvalidInput("users must appear in order 1, 2, ...");
    take(expected - 1, r);
  }
}

}  // namespace detail

struct ImportedRateLaw {
  std::vector<FadingDistribution> users;
  std::vector<std::vector<double>> rates;  // rates[i][j] for state j of user i
};

inline ImportedRateLaw parse_rate_law_csv(std::string_view text) {
  auto rows = detail::read_csv(text, {"user", "state", "probability", "rate", "cumulative_level"});
  std::vector<std::vector<double>> states, probs, rates;
  detail::by_user(rows, [&](std::size_t i, const std::vector<std::string>& r) {
    if (i == states.size()) {
      states.emplace_back();
      probs.emplace_back();
      rates.emplace_back();
    }
    states[i].push_back(parse_double(r[1], "state column"));
    probs[i].push_back(parse_double(r[2], "probability column"));
    rates[i].push_back(parse_double(r[3], "rate column"));
  });
  ImportedRateLaw out;
  for (std::size_t i = 0; i < states.size(); ++i) out.users.push_back(FadingDistribution::discrete(states[i], probs[i]));
  out.rates = std::move(rates);
  return out;
}

struct ImportedPowerLaw {
  std::vector<FadingDistribution> users;
  PowerLaw law;
};

inline ImportedPowerLaw parse_power_law_csv(std::string_view text) {
  auto rows = detail::read_csv(text, {"user", "state", "probability", "power", "received_power"});
  std::vector<std::vector<double>> states, probs;
  ImportedPowerLaw out;
  detail::by_user(rows, [&](std::size_t i, const std::vector<std::string>& r) {
    if (i == states.size()) {
      states.emplace_back();
      probs.emplace_back();
      out.law.power.emplace_back();
    }
    states[i].push_back(parse_double(r[1], "state column"));
    probs[i].push_back(parse_double(r[2], "probability column"));
    out.law.power[i].push_back(parse_double(r[3], "power column"));
  });
  for (std::size_t i = 0; i < states.size(); ++i) out.users.push_back(FadingDistribution::discrete(states[i], probs[i]));
  return out;
}

/// Reads a rate-law CSV and checks that it covers exactly the instance's
/// discrete states. Magnitudes and probabilities match to 1e-10 relative
/// (the file carries 12 significant digits); the instance's own values are kept.
inline DiscreteStrategy strategy_from_rate_law_file(const std::string& path, const MacInstance& inst) {
  ImportedRateLaw imp;
  try {
    imp = parse_rate_law_csv(read_file(path));
  } catch (const InvalidInput& e) {
    throw LawFileError("law file " + path + ": " + e.what());
  }
  if (!inst.all_discrete()) throw LawFileError("law files are supported for discrete instances only");
  if (imp.users.size() != inst.size()) throw LawFileError("law file has the wrong number of users");
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(b)); };
  DiscreteStrategy s;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const auto& want = inst.users[i].as_discrete();
    const auto& got = imp.users[i].as_discrete();
    if (got.states.size() != want.states.size())
      throw LawFileError("law file user " + std::to_string(i + 1) + " has the wrong number of states");
    for (std::size_t j = 0; j < want.states.size(); ++j)
      if (!close(got.states[j], want.states[j]) || !close(got.probs[j], want.probs[j]))
        throw LawFileError("law file user " + std::to_string(i + 1) + " does not match the configured law");
    for (double r : imp.rates[i])
      if (!std::isfinite(r)) throw LawFileError("law file holds a non-finite rate");
    s.states.push_back(want.states);
    s.probs.push_back(want.probs);
    s.rates.push_back(imp.rates[i]);
    s.powers.emplace_back(want.states.size(), inst.powers[i]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// JSON reports

inline ordered_json report_header(std::string_view command, const RunConfig& cfg) {
  ordered_json j;
  j["schema"] = kSchema;
  j["command"] = command;
  j["config_hash"] = cfg.config_hash;
  j["log_base"] = cfg.instance.log_base == LogBase::bits ? "bits" : "nats";
  return j;
}

inline ordered_json outage_report_json(const OutageReport& rep) {
  ordered_json j;
  j["pass"] = rep.pass;
  j["max_violation"] = rep.max_violation;
  j["worst_tuple"] = rep.worst_tuple;
  j["worst_subset"] = rep.worst_subset;
  j["n"] = rep.n;
  j["seed"] = rep.seed;
  return j;
}

inline std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace macadapt::io
