#pragma once

// Scenario configuration: flat key-value sections (INI-like) or JSON, typed
// into ScenarioConfig, plus validation diagnostics.

#include <fstream>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace afiso::cli {

using RawConfig = std::map<std::string, std::map<std::string, std::string>>;

struct Diagnostic {
  enum class Level { error, warning } level;
  std::string field;
  std::string message;
};

inline bool has_errors(const std::vector<Diagnostic>& d) {
  for (const auto& x : d)
    if (x.level == Diagnostic::Level::error) return true;
  return false;
}

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

/// [section] headers, key = value lines, '#' or ';' comments. Keys before any
/// section go to "general".
inline RawConfig parse_ini(const std::string& text) {
  RawConfig out;
  std::string section = "general";
  std::istringstream in(text);
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto c = line.find_first_of("#;");
    if (c != std::string::npos) line = line.substr(0, c);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(no) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(no) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(no) + ": empty key");
    out[section][key] = trim(line.substr(eq + 1));
  }
  return out;
}

/// Objects of scalars or arrays; arrays become comma-separated lists.
inline RawConfig parse_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("JSON: top level must be an object");
  auto scalar = [](const nlohmann::json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) {
      std::ostringstream os;
      os.precision(17);
      os << v.get<double>();
      return os.str();
    }
    throw ConfigError("JSON: unsupported value " + v.dump());
  };
  RawConfig out;
  for (auto& [sec, body] : j.items()) {
    if (!body.is_object()) {
      out["general"][sec] = body.is_array() ? "" : scalar(body);
      if (body.is_array()) {
        std::string s;
        for (auto& x : body) s += (s.empty() ? "" : ",") + scalar(x);
        out["general"][sec] = s;
      }
      continue;
    }
    for (auto& [k, v] : body.items()) {
      if (v.is_array()) {
        std::string s;
        for (auto& x : v) s += (s.empty() ? "" : ",") + scalar(x);
        out[sec][k] = s;
      } else {
        out[sec][k] = scalar(v);
      }
    }
  }
  return out;
}

inline RawConfig load_raw(const std::string& path, std::string* text_out = nullptr) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();
  if (text_out) *text_out = text;
  const auto first = text.find_first_not_of(" \t\r\n");
  const bool json = (path.size() >= 5 && path.substr(path.size() - 5) == ".json") ||
                    (first != std::string::npos && text[first] == '{');
  return json ? parse_json(text) : parse_ini(text);
}

/// One harmonic term: coef * Y_lm / sup|Y_lm|.
struct Harmonic {
  int l = 0, m = 0;
  double coef = 0.0;
};

struct ScenarioConfig {
  std::string family = "schwarzschild";  // flat | schwarzschild | perturbed
  double m = 1.0, kappa = 0.0, tau = 1.0;

  std::vector<Harmonic> harmonics{{1, 0, 0.05}};
  double data_decay = 1.0;  // collar scaling family: u_sigma = sigma^-decay * u / sup|u|

  std::vector<double> sigmas{64, 128, 256};
  std::vector<double> deltas;     // explicit list applied to every sigma; empty = sigma^-delta_power
  double delta_power = 4.0;
  std::vector<double> rhos{50, 100};
  std::vector<double> xis{0, 0.5, 1, 2};
  std::vector<double> radii;  // ADM radii; empty = {2^5..2^9} * max(m, 1)
  std::vector<double> profile_rhos{1e2, 1e3, 1e4};

  int n_theta = 32;
  int steps = 0;
  double h_factor = 1.0 / 2000.0;
  double stretch = 1.005;

  double eps0 = 0.125;
  std::size_t mc_samples = 1000000;
  double ratio_target = 0.875;

  std::uint64_t seed = 12345;
  int threads = 1;
  bool deterministic = false;

  std::vector<double> deltas_for(double sigma) const {
    if (!deltas.empty()) return deltas;
    return {std::pow(sigma, -delta_power)};
  }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

}  // namespace detail

/// Types the raw sections; unknown keys and unparsable values become diagnostics.
inline ScenarioConfig type_config(const RawConfig& raw, std::vector<Diagnostic>& diag) {
  ScenarioConfig c;
  static const std::map<std::string, std::vector<std::string>> known{
      {"general", {"seed", "threads"}},
      {"metric", {"family", "m", "kappa", "tau"}},
      {"boundary", {"harmonics", "decay"}},
      {"sweep", {"sigma", "delta", "delta_power", "rho", "xi", "radii", "profile_rho"}},
      {"resolution", {"n_theta", "steps", "h_factor", "stretch"}},
      {"centering", {"eps0", "mc_samples"}},
      {"tolerances", {"ratio_target"}},
  };
  auto err = [&](const std::string& f, const std::string& m) { diag.push_back({Diagnostic::Level::error, f, m}); };
  for (const auto& [sec, kv] : raw) {
    const auto it = known.find(sec);
    if (it == known.end()) {
      err(sec, "unknown section");
      continue;
    }
    for (const auto& [k, v] : kv)
      if (std::find(it->second.begin(), it->second.end(), k) == it->second.end()) err(sec + "." + k, "unknown key");
  }
  auto get = [&](const std::string& sec, const std::string& key) -> std::optional<std::string> {
    const auto s = raw.find(sec);
    if (s == raw.end()) return std::nullopt;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    return k->second;
  };
  auto num = [&](const std::string& sec, const std::string& key, auto& dst) {
    if (auto v = get(sec, key)) {
      try {
        std::size_t pos = 0;
        const double d = std::stod(*v, &pos);
        if (pos != v->size()) throw std::invalid_argument("trailing");
        dst = static_cast<std::decay_t<decltype(dst)>>(d);
      } catch (const std::exception&) {
        err(sec + "." + key, "not a number: '" + *v + "'");
      }
    }
  };
  auto list = [&](const std::string& sec, const std::string& key, std::vector<double>& dst) {
    if (auto v = get(sec, key)) {
      std::vector<double> out;
      for (const auto& item : detail::split_list(*v)) {
        try {
          std::size_t pos = 0;
          out.push_back(std::stod(item, &pos));
          if (pos != item.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
          err(sec + "." + key, "not a number: '" + item + "'");
        }
      }
      dst = out;
    }
  };
  if (auto v = get("metric", "family")) c.family = *v;
  if (c.family == "flat") c.m = 0.0;
  num("metric", "m", c.m);
  num("metric", "kappa", c.kappa);
  num("metric", "tau", c.tau);
  if (auto v = get("boundary", "harmonics")) {
    c.harmonics.clear();
    for (const auto& item : detail::split_list(*v)) {
      Harmonic h;
      char c1 = 0, c2 = 0;
      std::istringstream in(item);
      if (!(in >> h.l >> c1 >> h.m >> c2 >> h.coef) || c1 != ':' || c2 != ':' || !(in >> std::ws).eof())
        err("boundary.harmonics", "expected l:m:coef, got '" + item + "'");
      else
        c.harmonics.push_back(h);
    }
  }
  num("boundary", "decay", c.data_decay);
  list("sweep", "sigma", c.sigmas);
  list("sweep", "delta", c.deltas);
  num("sweep", "delta_power", c.delta_power);
  list("sweep", "rho", c.rhos);
  list("sweep", "xi", c.xis);
  list("sweep", "radii", c.radii);
  list("sweep", "profile_rho", c.profile_rhos);
  num("resolution", "n_theta", c.n_theta);
  num("resolution", "steps", c.steps);
  num("resolution", "h_factor", c.h_factor);
  num("resolution", "stretch", c.stretch);
  num("centering", "eps0", c.eps0);
  double mc = static_cast<double>(c.mc_samples);
  num("centering", "mc_samples", mc);
  c.mc_samples = static_cast<std::size_t>(std::max(0.0, mc));
  num("tolerances", "ratio_target", c.ratio_target);
  if (auto v = get("general", "seed")) {
    try {
      c.seed = std::stoull(*v);
    } catch (const std::exception&) {
      err("general.seed", "not an unsigned integer: '" + *v + "'");
    }
  }
  num("general", "threads", c.threads);
  if (c.radii.empty())
    for (int k = 5; k <= 9; ++k) c.radii.push_back(std::ldexp(1.0, k) * std::max(c.m, 1.0));
  return c;
}

/// Range checks. Errors make the config unusable; warnings flag runs outside
/// the regime where the smoothing estimates are expected to hold.
inline std::vector<Diagnostic> validate(const ScenarioConfig& c) {
  std::vector<Diagnostic> d;
  auto err = [&](const std::string& f, const std::string& m) { d.push_back({Diagnostic::Level::error, f, m}); };
  auto warn = [&](const std::string& f, const std::string& m) { d.push_back({Diagnostic::Level::warning, f, m}); };
  if (c.family != "flat" && c.family != "schwarzschild" && c.family != "perturbed")
    err("metric.family", "must be flat, schwarzschild or perturbed");
  if (!(c.tau > 0.5)) err("metric.tau", "decay rate below 1/2");
  if (!(c.m >= 0.0)) err("metric.m", "mass must be >= 0");
  if (c.family == "flat" && c.m != 0.0) warn("metric.m", "ignored for the flat family");
  auto positive = [&](const std::string& f, const std::vector<double>& v, bool allow_zero = false) {
    if (v.empty()) err(f, "empty list");
    for (double x : v)
      if (!(allow_zero ? x >= 0.0 : x > 0.0)) err(f, "values must be " + std::string(allow_zero ? "non-negative" : "positive"));
  };
  positive("sweep.sigma", c.sigmas);
  if (!c.deltas.empty()) positive("sweep.delta", c.deltas);
  positive("sweep.rho", c.rhos);
  positive("sweep.xi", c.xis, true);
  positive("sweep.radii", c.radii);
  positive("sweep.profile_rho", c.profile_rhos);
  for (std::size_t i = 1; i < c.radii.size(); ++i)
    if (!(c.radii[i] > c.radii[i - 1])) err("sweep.radii", "must be increasing");
  if (c.radii.size() < 3) err("sweep.radii", "need at least 3 radii");
  if (!(c.delta_power > 0.0)) err("sweep.delta_power", "must be positive");
  for (double s : c.sigmas) {
    if (!(s > 0.0)) continue;
    for (double dl : c.deltas_for(s)) {
      if (dl > std::pow(s, -3.0)) {
        std::ostringstream os;
        os << "delta = " << dl << " exceeds sigma^-3 = " << std::pow(s, -3.0) << " at sigma = " << s
           << "; outside the delta <~ sigma^-3 regime";
        warn("sweep.delta", os.str());
      }
      if (dl >= s / 8.0) err("sweep.delta", "delta must be below sigma/8");
    }
  }
  if (c.n_theta < 4) err("resolution.n_theta", "must be >= 4");
  if (c.steps < 0) err("resolution.steps", "must be >= 0 (0 selects the default)");
  if (!(c.h_factor > 0.0 && c.h_factor < 0.1)) err("resolution.h_factor", "must lie in (0, 0.1)");
  if (!(c.stretch >= 1.0 && c.stretch < 1.5)) err("resolution.stretch", "must lie in [1, 1.5)");
  if (!(c.eps0 > 0.0 && c.eps0 < 1.0)) err("centering.eps0", "must lie in (0, 1)");
  if (c.mc_samples < 20000) err("centering.mc_samples", "must be >= 20000");
  if (c.threads < 1) err("general.threads", "must be >= 1");
  for (const auto& h : c.harmonics)
    if (h.l < 0 || std::abs(h.m) > h.l || h.l >= c.n_theta) err("boundary.harmonics", "need 0 <= |m| <= l < n_theta");
  return d;
}

}  // namespace afiso::cli
