#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "isostc/dynamics.hpp"
#include "isostc/stc.hpp"

namespace isostc {

/// Schema violation; `field()` is a dotted path such as "bound.r".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

using ConfigBlocks = std::map<std::string, std::map<std::string, std::string>>;

struct Config {
  std::string source;
  std::string hash;
  ConfigBlocks blocks;

  EtcProblem problem;
  bool has_bound = false;

  // [grid]
  std::optional<TimeGrid> grid;
  std::optional<double> tau_fallback;

  // [sim]
  std::vector<double> x0;  // full state (w = 1 appended when homogenized)
  double horizon = 5.0;
  IntegratorOptions integrator;

  // [synth]
  std::uint64_t seed = 1;
  int init_samples = 64;
  std::int64_t max_boxes = 2'000'000;
  int workers = 1;

  // [coverage]
  std::optional<std::vector<Interval>> operating_box;
};

/// Splits "[block]" headers and "key = value" lines; '#' starts a comment.
ConfigBlocks parse_blocks(const std::string& text);

/// Sorted "block.key=value" lines, one per entry.
std::string canonical_form(const ConfigBlocks& blocks);

/// First 16 hex digits of the SHA-256 of the canonical form.
std::string config_hash(const ConfigBlocks& blocks);

Config parse_config(const std::string& text, const std::string& source = "<memory>");
Config load_config(const std::string& path);

}  // namespace isostc
