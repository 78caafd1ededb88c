#include "isostc/config.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace isostc {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) throw ConfigError(field, "expected a number, got '" + t + "'");
  return v;
}

long long to_int(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(field, "expected an integer, got '" + t + "'");
  }
  return v;
}

bool to_bool(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "yes" || t == "1") return true;
  if (t == "false" || t == "no" || t == "0") return false;
  throw ConfigError(field, "expected true or false, got '" + t + "'");
}

std::vector<double> to_vector(const std::string& field, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(field, item));
  if (out.empty()) throw ConfigError(field, "expected a comma-separated list of numbers");
  return out;
}

// "[lo, hi] [lo, hi] ..."
std::vector<Interval> to_intervals(const std::string& field, std::string_view text) {
  std::vector<Interval> out;
  std::size_t pos = 0;
  while (true) {
    pos = text.find_first_not_of(" \t", pos);
    if (pos == std::string_view::npos) break;
    if (text[pos] != '[') throw ConfigError(field, "expected '[' at column " + std::to_string(pos));
    const auto close = text.find(']', pos);
    if (close == std::string_view::npos) throw ConfigError(field, "unterminated interval");
    const auto parts = to_vector(field, std::string(text.substr(pos + 1, close - pos - 1)));
    if (parts.size() != 2 || parts[0] > parts[1]) throw ConfigError(field, "interval must be [lo, hi] with lo <= hi");
    out.emplace_back(parts[0], parts[1]);
    pos = close + 1;
  }
  if (out.empty()) throw ConfigError(field, "expected at least one interval");
  return out;
}

Expr to_expr(const std::string& field, const std::string& text, const Alphabet& alphabet) {
  try {
    return parse(trim(text), alphabet);
  } catch (const ParseError& e) {
    throw ConfigError(field, e.what());
  }
}

DomainSpec to_domain(const std::string& field, const std::string& text, const std::vector<std::string>& vars,
                     const Alphabet& alphabet) {
  const std::string t = trim(text);
  try {
    if (t.rfind("box", 0) == 0) {
      auto box = to_intervals(field, std::string_view(t).substr(3));
      if (box.size() != vars.size()) {
        throw ConfigError(field, "box has " + std::to_string(box.size()) + " intervals, expected " +
                                     std::to_string(vars.size()));
      }
      return DomainSpec::make_box(vars, std::move(box));
    }
    if (t.rfind("sublevel", 0) == 0) {
      const std::string body = t.substr(8);
      const auto le = body.find("<=");
      if (le == std::string::npos) throw ConfigError(field, "sublevel needs 'V <= c'");
      Expr form = to_expr(field, body.substr(0, le), alphabet);
      return DomainSpec::make_sublevel(vars, form, to_double(field, body.substr(le + 2)));
    }
  } catch (const ProblemError& e) {
    throw ConfigError(field, e.what());
  }
  throw ConfigError(field, "domain must start with 'box' or 'sublevel'");
}

class BlockView {
 public:
  BlockView(const ConfigBlocks& blocks, std::string name) : name_(std::move(name)) {
    auto it = blocks.find(name_);
    if (it != blocks.end()) entries_ = &it->second;
  }
  bool present() const { return entries_ != nullptr; }
  bool has(const std::string& key) const { return entries_ && entries_->contains(key); }
  std::string path(const std::string& key) const { return name_ + "." + key; }
  const std::string& required(const std::string& key) const {
    if (!has(key)) throw ConfigError(path(key), "missing required key");
    return entries_->at(key);
  }
  std::optional<std::string> optional(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return entries_->at(key);
  }

 private:
  std::string name_;
  const std::map<std::string, std::string>* entries_ = nullptr;
};

}  // namespace

ConfigBlocks parse_blocks(const std::string& text) {
  ConfigBlocks blocks;
  std::string current;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("line " + std::to_string(lineno), "malformed block header");
      current = trim(std::string_view(t).substr(1, t.size() - 2));
      if (current.empty()) throw ConfigError("line " + std::to_string(lineno), "empty block name");
      if (blocks.contains(current)) throw ConfigError(current, "block declared twice");
      blocks[current];
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos || current.empty()) {
      throw ConfigError("line " + std::to_string(lineno), "expected 'key = value' inside a block");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ConfigError(current + ".?", "empty key on line " + std::to_string(lineno));
    if (!blocks[current].emplace(key, value).second) throw ConfigError(current + "." + key, "key repeated");
  }
  return blocks;
}

std::string canonical_form(const ConfigBlocks& blocks) {
  std::string out;
  for (const auto& [block, entries] : blocks) {
    for (const auto& [key, value] : entries) out += block + "." + key + "=" + value + "\n";
  }
  return out;
}

std::string config_hash(const ConfigBlocks& blocks) {
  const std::string canon = canonical_form(blocks);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(canon.data(), canon.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < 8 && i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 15];
  }
  return hex;
}

Config parse_config(const std::string& text, const std::string& source) {
  Config cfg;
  cfg.source = source;
  cfg.blocks = parse_blocks(text);
  cfg.hash = config_hash(cfg.blocks);

  const BlockView sys(cfg.blocks, "system");
  const BlockView trig(cfg.blocks, "triggering");
  const BlockView hom(cfg.blocks, "homogenize");
  const BlockView bnd(cfg.blocks, "bound");
  const BlockView grid(cfg.blocks, "grid");
  const BlockView sim(cfg.blocks, "sim");
  const BlockView syn(cfg.blocks, "synth");
  const BlockView cov(cfg.blocks, "coverage");

  const long long n_raw = to_int(sys.path("n"), sys.required("n"));
  if (n_raw < 1 || n_raw > 6) throw ConfigError(sys.path("n"), "state dimension must be in 1..6");
  const int n = static_cast<int>(n_raw);
  const bool homogenized = hom.present() && hom.has("enabled") && to_bool(hom.path("enabled"), *hom.optional("enabled"));

  // Closed loop in (x, e).
  std::vector<Expr> f_closed;
  const Alphabet xe = Alphabet::state_and_error(n, false);
  if (sys.has("fc1")) {
    for (int i = 1; i <= n; ++i) {
      const std::string key = "fc" + std::to_string(i);
      f_closed.push_back(simplify(to_expr(sys.path(key), sys.required(key), xe)));
    }
  } else {
    std::vector<Expr> u;
    std::set<std::string, std::less<>> xs;
    for (const auto& v : state_names(n)) xs.insert(v);
    for (int j = 1; sys.has("u" + std::to_string(j)); ++j) {
      const std::string key = "u" + std::to_string(j);
      u.push_back(to_expr(sys.path(key), sys.required(key), Alphabet(xs)));
    }
    std::set<std::string, std::less<>> xu = xs;
    for (std::size_t j = 1; j <= u.size(); ++j) xu.insert("u" + std::to_string(j));
    std::vector<Expr> f;
    for (int i = 1; i <= n; ++i) {
      const std::string key = "f" + std::to_string(i);
      f.push_back(to_expr(sys.path(key), sys.required(key), Alphabet(xu)));
    }
    try {
      f_closed = substitute_control(f, u, n);
    } catch (const ProblemError& e) {
      throw ConfigError(sys.path("f1"), e.what());
    }
  }
  Expr phi = to_expr(trig.path("phi"), trig.required("phi"), xe);

  EtcProblem& P = cfg.problem;
  P.n = n;
  if (homogenized) {
    P.alpha = static_cast<int>(to_int(hom.path("alpha"), hom.required("alpha")));
    P.theta = static_cast<int>(to_int(hom.path("theta"), hom.required("theta")));
    try {
      HomogenizedSystem h = homogenize(f_closed, phi, P.alpha, P.theta, n);
      P.state_vars = h.state_vars;
      P.error_vars = h.error_vars;
      P.f_closed = h.f_closed;
      P.phi = h.phi;
    } catch (const HomogenizeError& e) {
      throw ConfigError(hom.path("alpha"), e.what());
    } catch (const ProblemError& e) {
      throw ConfigError(hom.path("alpha"), e.what());
    }
    P.homogenized = true;
    P.w_index = n;
  } else {
    // Degrees only matter once a bound is requested.
    if (bnd.present() || sys.has("alpha")) P.alpha = static_cast<int>(to_int(sys.path("alpha"), sys.required("alpha")));
    if (bnd.present() || trig.has("theta")) P.theta = static_cast<int>(to_int(trig.path("theta"), trig.required("theta")));
    P.state_vars = state_names(n);
    P.error_vars = error_names(n);
    P.f_closed = f_closed;
    P.phi = simplify(phi);
  }
  P.field = extend(P.f_closed);

  if (bnd.present()) {
    cfg.has_bound = true;
    P.p = static_cast<int>(to_int(bnd.path("p"), bnd.required("p")));
    if (P.p < 1 || P.p > 8) throw ConfigError(bnd.path("p"), "Lie order must be in 1..8");
    P.eps_margin = to_double(bnd.path("eps_margin"), bnd.required("eps_margin"));
    P.d = to_double(bnd.path("d"), bnd.required("d"));
    P.r = to_double(bnd.path("r"), bnd.required("r"));
    const Alphabet all = Alphabet::state_and_error(n, homogenized);
    P.Z = to_domain(bnd.path("Z"), bnd.required("Z"), P.state_vars, all);
    P.Xi = to_domain(bnd.path("Xi"), bnd.required("Xi"), P.coordinates(), all);
    try {
      validate(P);
    } catch (const ProblemError& e) {
      throw ConfigError("bound", e.what());
    }
  }

  if (grid.present()) {
    const double tau_max = to_double(grid.path("tau_max"), grid.required("tau_max"));
    const double ratio = to_double(grid.path("ratio"), grid.required("ratio"));
    const long long q = to_int(grid.path("q"), grid.required("q"));
    try {
      cfg.grid = make_grid(tau_max, ratio, static_cast<int>(q));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("grid", e.what());
    }
    if (auto f = grid.optional("tau_fallback")) {
      cfg.tau_fallback = trim(*f) == "tau_1" ? cfg.grid->tau(1) : to_double(grid.path("tau_fallback"), *f);
    }
  }

  if (sim.present()) {
    cfg.x0 = to_vector(sim.path("x0"), sim.required("x0"));
    if (static_cast<int>(cfg.x0.size()) != n) {
      throw ConfigError(sim.path("x0"), "expected " + std::to_string(n) + " components");
    }
    if (homogenized) cfg.x0.push_back(1.0);
    if (auto h = sim.optional("horizon")) cfg.horizon = to_double(sim.path("horizon"), *h);
    if (auto v = sim.optional("rtol")) cfg.integrator.rtol = to_double(sim.path("rtol"), *v);
    if (auto v = sim.optional("atol")) cfg.integrator.atol = to_double(sim.path("atol"), *v);
    if (!(cfg.horizon > 0.0)) throw ConfigError(sim.path("horizon"), "must be positive");
  }

  if (syn.present()) {
    if (auto v = syn.optional("seed")) cfg.seed = static_cast<std::uint64_t>(to_int(syn.path("seed"), *v));
    if (auto v = syn.optional("init_samples")) cfg.init_samples = static_cast<int>(to_int(syn.path("init_samples"), *v));
    if (auto v = syn.optional("max_boxes")) cfg.max_boxes = to_int(syn.path("max_boxes"), *v);
    if (auto v = syn.optional("workers")) cfg.workers = static_cast<int>(to_int(syn.path("workers"), *v));
  }

  if (cov.present()) {
    auto box = to_intervals(cov.path("B"), cov.required("B"));
    if (box.size() != P.state_vars.size()) throw ConfigError(cov.path("B"), "operating box has the wrong dimension");
    cfg.operating_box = std::move(box);
  }
  return cfg;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("file", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace isostc
