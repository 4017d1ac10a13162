#include "sloaci/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace sloaci {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void ConfigMap::set(const std::string& key, const std::string& value, const std::string& source) {
  auto it = entries_.find(key);
  if (it != entries_.end() && it->second.value != value)
    throw ConfigError("conflicting values for '" + key + "': '" + it->second.value + "' (" + it->second.source +
                      ") vs '" + value + "' (" + source + ")");
  entries_[key] = {value, source};
}

ConfigMap ConfigMap::parse(const std::string& text, const std::string& source_name) {
  ConfigMap m;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError(source_name + ":" + std::to_string(lineno) + ": expected key=value");
    m.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), source_name + ":" + std::to_string(lineno));
  }
  return m;
}

ConfigMap ConfigMap::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

void ConfigMap::override_with(const ConfigMap& over) {
  for (const auto& [k, e] : over.entries_) entries_[k] = e;
}

std::optional<std::string> ConfigMap::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second.value;
}

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + *v + "' (" + entries_.at(key).source + ")");
  }
}

std::uint64_t ConfigMap::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size())
    throw ConfigError("'" + key + "' expects a nonnegative integer, got '" + *v + "' (" + entries_.at(key).source +
                      ")");
  return out;
}

std::size_t ConfigMap::get_count(const std::string& key, std::size_t fallback) const {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError("'" + key + "' expects true/false, got '" + *v + "'");
}

std::vector<std::string> ConfigMap::get_list(const std::string& key) const {
  auto v = get(key);
  return v ? split_list(*v) : std::vector<std::string>{};
}

const std::vector<std::string>& ConfigMap::known_keys() {
  static const std::vector<std::string> keys = {
      "scenario.id",          "scenario.rho0",       "scenario.rho1",          "scenario.sigma_y0",
      "scenario.sigma_y1",    "scenario.sigma_s0",   "scenario.sigma_s1",      "design.variant",
      "design.eta",           "design.t0",           "design.batch",           "design.backend",
      "design.init_scoring",  "model.backend",       "model.assigned_surrogate_only",
      "model.beta",           "kernel.family",       "kernel.c_h",             "kernel.c_h_sd_multiple",
      "kernel.floor",         "run.horizon",         "run.reps",               "run.seed",
      "run.workers",          "run.checkpoint",      "run.out",                "run.trajectories",
      "run.trace_rep",        "run.oracle_mc_draws", "test.kinds",             "test.alpha",
      "test.t0",              "test.tau_h0",         "test.asy_rho",           "test.eb_c",
      "test.eb_nu0_sq",       "test.eb_xi_hat0",     "test.eb_lo",             "test.eb_hi",
      "test.eb_sd_multiple",  "test.eb_calibration"};
  return keys;
}

void ConfigMap::check_known() const {
  const auto& keys = known_keys();
  for (const auto& [k, e] : entries_)
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw ConfigError("unknown config key '" + k + "' (" + e.source + ")");
}

}  // namespace sloaci
