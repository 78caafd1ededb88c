#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "isostc/config.hpp"

namespace fixtures {

inline const isostc::Config& example1() {
  static const isostc::Config cfg = isostc::load_config(std::string(ISOSTC_CONFIG_DIR) + "/example1.cfg");
  return cfg;
}

inline const isostc::Config& vdp() {
  static const isostc::Config cfg = isostc::load_config(std::string(ISOSTC_CONFIG_DIR) + "/vdp.cfg");
  return cfg;
}

inline const isostc::Config& jet() {
  static const isostc::Config cfg = isostc::load_config(std::string(ISOSTC_CONFIG_DIR) + "/jet.cfg");
  return cfg;
}

inline const std::vector<double> published_deltas{0.0, 0.1272, 0.0, 0.0191};

inline double rel(double a, double b) { return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-300}); }

inline std::vector<double> uniform(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline isostc::Env env_of(const std::vector<std::string>& vars, const std::vector<double>& vals) {
  isostc::Env env;
  for (std::size_t i = 0; i < vars.size(); ++i) env[vars[i]] = vals[i];
  return env;
}

}  // namespace fixtures
