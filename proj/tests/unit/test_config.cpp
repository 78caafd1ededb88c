#include <doctest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"

using namespace isostc;

namespace {

std::string shipped(const std::string& name) {
  std::ifstream in(std::string(ISOSTC_CONFIG_DIR) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string without_line(const std::string& text, const std::string& prefix) {
  std::istringstream in(text);
  std::string out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(prefix, 0) != 0) out += line + "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("shipped example-1 configuration") {
  const Config& cfg = fixtures::example1();
  const EtcProblem& P = cfg.problem;
  CHECK(cfg.has_bound);
  CHECK(P.n == 2);
  CHECK(P.alpha == 2);
  CHECK(P.theta == 1);
  CHECK(P.p == 3);
  CHECK(P.d == 0.9);
  CHECK(P.r == 0.29);
  CHECK_FALSE(P.homogenized);
  // 0.0127^2 * 0.3^2 folded into phi.
  const double c = 0.0127 * 0.0127 * 0.3 * 0.3;
  CHECK(eval(P.phi, {{"x1", 1.0}, {"x2", 0.0}, {"e1", 0.0}, {"e2", 0.0}}) == doctest::Approx(-c).epsilon(1e-9));
  CHECK(eval(P.phi, {{"x1", 0.0}, {"x2", 0.0}, {"e1", 1.0}, {"e2", 0.0}}) == 1.0);
  REQUIRE(cfg.grid);
  CHECK(cfg.grid->q == 348);
  CHECK(cfg.x0 == std::vector<double>{1.0, 1.0});
  CHECK(cfg.horizon == 5.0);
  CHECK(cfg.hash.size() == 16);
}

TEST_CASE("shipped Van der Pol configuration is homogenized") {
  const Config& cfg = fixtures::vdp();
  const EtcProblem& P = cfg.problem;
  CHECK(P.homogenized);
  CHECK(P.alpha == 2);
  CHECK(P.state_vars == std::vector<std::string>{"x1", "x2", "w"});
  CHECK(P.field.size() == 6);
  CHECK(cfg.x0 == std::vector<double>{-0.3, 1.7, 1.0});
  REQUIRE(cfg.tau_fallback);
  CHECK(*cfg.tau_fallback == cfg.grid->tau(1));
}

TEST_CASE("schema errors name the field") {
  const std::string text = shipped("example1.cfg");
  auto field_of = [](const std::string& t) {
    try {
      parse_config(t);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of(text) == "<none>");
  CHECK(field_of(without_line(text, "r =")) == "bound.r");
  CHECK(field_of(without_line(text, "phi =")) == "triggering.phi");
  CHECK(field_of(without_line(text, "n =")) == "system.n");
  CHECK(field_of(text + "\n[sim2]\nx0 = 1\n") == "<none>");
  std::string bad = text;
  bad.replace(bad.find("p = 3"), 5, "p = x");
  CHECK(field_of(bad) == "bound.p");
  bad = text;
  bad.replace(bad.find("r = 0.29"), 8, "r = 0.5");
  CHECK(field_of(bad) == "bound");
  bad = text;
  bad.replace(bad.find("x0 = 1, 1"), 9, "x0 = 1");
  CHECK(field_of(bad) == "sim.x0");
  CHECK(field_of("p = 3\n") == "line 1");
  CHECK(field_of("[a]\n[a]\n") == "a");
}

TEST_CASE("config hash is stable under formatting") {
  const std::string text = shipped("example1.cfg");
  const Config a = parse_config(text);
  std::string reformatted = "# leading comment\n\n" + text;
  const auto pos = reformatted.find("p = 3");
  reformatted.replace(pos, 5, "p   =   3   # order");
  const Config b = parse_config(reformatted);
  CHECK(a.hash == b.hash);
  std::string changed = text;
  changed.replace(changed.find("q = 348"), 7, "q = 347");
  CHECK(parse_config(changed).hash != a.hash);
}

TEST_CASE("config hash is the SHA-256 prefix of the canonical form") {
  ConfigBlocks blocks;
  blocks["a"]["k"] = "v";
  CHECK(canonical_form(blocks) == "a.k=v\n");
  // Digest from the coreutils sha256sum of the same bytes.
  CHECK(config_hash(blocks) == "c8037f9e514b4f08");
}
