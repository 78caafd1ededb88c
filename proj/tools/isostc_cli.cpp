// isostc: command-line driver for region-based self-triggered control.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "isostc/config.hpp"
#include "isostc/stc.hpp"

#ifndef ISOSTC_VERSION
#define ISOSTC_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace isostc;

namespace {

enum Exit : int {
  kOk = 0,
  kUsage = 1,
  kConfig = 2,
  kProblem = 3,
  kSynth = 4,
  kBudget = 5,
  kBound = 6,
  kOutside = 7,
  kIntegration = 8,
  kHashMismatch = 9,
  kIo = 10,
  kRefuted = 11,
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct HashMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct Refuted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::string deltas;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::int64_t> budget_boxes;

  // command specific
  std::vector<double> point;
  double t_max = 0.0;
  int samples = 200;
  double tau_star = 0.0;
  int directions = 256;
  bool soundness = false;
  std::string etc_csv;
  std::string stc_csv;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Run {
 public:
  Run(std::string command, const Options& opt) : command_(std::move(command)), opt_(opt) {
    fs::create_directories(opt_.out_dir);
  }

  fs::path path(const std::string& name) const { return fs::path(opt_.out_dir) / name; }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(path(name), std::ios::binary);
    if (!out) throw IoError("cannot write '" + path(name).string() + "'");
    out << content;
    outputs_.push_back(name);
  }

  void manifest(const std::string& config_hash, std::uint64_t seed, int workers) const {
    nlohmann::ordered_json j;
    j["command"] = command_;
    j["config"] = opt_.config;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["workers"] = workers;
    if (!opt_.deltas.empty()) j["deltas"] = opt_.deltas;
    j["version"] = ISOSTC_VERSION;
    j["outputs"] = outputs_;
    j["timestamp"] = utc_now();
    std::ofstream out(path("manifest.json"), std::ios::binary);
    if (!out) throw IoError("cannot write manifest.json");
    out << j.dump(2) << "\n";
  }

 private:
  std::string command_;
  const Options& opt_;
  std::vector<std::string> outputs_;
};

struct Loaded {
  Config cfg;
  std::uint64_t seed;
  int workers;
  std::int64_t max_boxes;
};

Loaded load(const Options& opt) {
  Loaded l{load_config(opt.config), 1, 1, 0};
  l.seed = opt.seed.value_or(l.cfg.seed);
  l.workers = opt.workers.value_or(l.cfg.workers);
  l.max_boxes = opt.budget_boxes.value_or(l.cfg.max_boxes);
  return l;
}

void require_bound(const Config& cfg) {
  if (!cfg.has_bound) throw ConfigError("bound", "this command needs a [bound] block");
}

DeltaVector load_deltas(const Options& opt, const Config& cfg) {
  if (opt.deltas.empty()) throw ConfigError("--deltas", "this command needs a deltas file");
  std::string hash;
  DeltaVector dv = delta_from_json(read_file(opt.deltas), &hash);
  if (dv.p() != cfg.problem.p) {
    throw ConfigError("bound.p", "deltas file has p = " + std::to_string(dv.p()) + ", config has p = " +
                                     std::to_string(cfg.problem.p));
  }
  if (!hash.empty() && hash != cfg.hash) {
    std::cerr << "warning: deltas were produced for config " << hash << ", current config is " << cfg.hash << "\n";
  }
  return dv;
}

VerifyOptions verify_options(const Loaded& l) {
  VerifyOptions v;
  v.max_boxes = l.max_boxes;
  v.workers = l.workers;
  return v;
}

std::string describe(const std::vector<double>& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
  return s + ")";
}

int cmd_check(const Options& opt) {
  Loaded l = load(opt);
  const EtcProblem& P = l.cfg.problem;
  Run run("check", opt);
  std::ostringstream os;
  os << "config_hash " << l.cfg.hash << "\n";
  os << "coordinates";
  for (const auto& c : P.coordinates()) os << " " << c;
  os << "\n";
  for (std::size_t i = 0; i < P.f_closed.size(); ++i) os << "f" << i + 1 << " = " << to_string(P.f_closed[i]) << "\n";
  os << "phi = " << to_string(P.phi) << "\n";
  if (l.cfg.has_bound) {
    const auto h = check_homogeneity(P.field, P.alpha, 32, P.coordinates(), l.seed);
    os << "homogeneity alpha=" << P.alpha << " " << (h.passed ? "ok" : "FAILED") << " worst "
       << num(h.worst_violation) << "\n";
    const auto hp = check_homogeneity({P.phi}, P.theta, 32, P.coordinates(), l.seed);
    os << "phi homogeneity theta=" << P.theta << " " << (hp.passed ? "ok" : "FAILED") << "\n";
    const LieChain chain = lie_chain(P);
    for (int i = 0; i <= chain.order(); ++i) os << "L^" << i << " phi nodes " << node_count(chain.exprs[static_cast<std::size_t>(i)]) << "\n";
  }
  if (l.cfg.grid) {
    os << "grid q=" << l.cfg.grid->q << " tau_1=" << num(l.cfg.grid->tau(1)) << " tau_q=" << num(l.cfg.grid->tau(l.cfg.grid->q))
       << "\n";
  }
  std::cout << os.str();
  run.write("check.txt", os.str());
  run.manifest(l.cfg.hash, l.seed, l.workers);
  return kOk;
}

int cmd_synth(const Options& opt) {
  Loaded l = load(opt);
  require_bound(l.cfg);
  const EtcProblem& P = l.cfg.problem;
  const LieChain chain = lie_chain(P);
  CegisOptions co;
  co.seed = l.seed;
  co.init_samples = l.cfg.init_samples;
  co.verify = verify_options(l);
  CegisTrace trace;
  Run run("synth", opt);
  DeltaVector dv;
  try {
    dv = cegis(P, chain, co, &trace);
  } catch (const BudgetExhausted& e) {
    std::cerr << "cegis: " << e.what() << "; trying the fallback vector\n";
    dv = fallback(P, chain, co.verify);
  }
  run.write("deltas.json", to_json(dv, P, l.cfg.hash));
  std::cout << "deltas " << describe(dv.deltas) << " method " << dv.certificate.method << " boxes "
            << dv.certificate.boxes_processed << " iterations " << trace.iterations << "\n";
  run.manifest(l.cfg.hash, l.seed, l.workers);
  return dv.certificate.verified ? kOk : kRefuted;
}

int cmd_verify(const Options& opt) {
  Loaded l = load(opt);
  require_bound(l.cfg);
  const EtcProblem& P = l.cfg.problem;
  const DeltaVector dv = load_deltas(opt, l.cfg);
  const LieChain chain = lie_chain(P);
  Run run("verify", opt);
  const auto t0 = std::chrono::steady_clock::now();
  const VerifyOutcome out = verify(P, chain, dv.deltas, verify_options(l));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  nlohmann::ordered_json j;
  j["deltas"] = dv.deltas;
  j["config_hash"] = l.cfg.hash;
  j["boxes_processed"] = out.boxes_processed;
  j["resolution_limited"] = out.resolution_limited;
  j["seconds"] = secs;
  switch (out.status) {
    case VerifyOutcome::Status::certified:
      j["status"] = "certified";
      break;
    case VerifyOutcome::Status::counterexample:
      j["status"] = "counterexample";
      j["row"] = out.row;
      j["violation"] = out.violation;
      j["point"] = out.row == 1 ? out.point.z : out.point.x0;
      break;
    case VerifyOutcome::Status::budget_exhausted:
      j["status"] = "budget_exhausted";
      break;
  }
  // The timing is not part of the reproducible artifact.
  nlohmann::ordered_json stable = j;
  stable.erase("seconds");
  run.write("verify.json", stable.dump(2) + "\n");
  std::cout << j.dump() << "\n";
  run.manifest(l.cfg.hash, l.seed, l.workers);
  if (out.status == VerifyOutcome::Status::budget_exhausted) return kBudget;
  return out.certified() ? kOk : kRefuted;
}

int cmd_bound_dump(const Options& opt) {
  Loaded l = load(opt);
  require_bound(l.cfg);
  const EtcProblem& P = l.cfg.problem;
  const DeltaVector dv = load_deltas(opt, l.cfg);
  const LieChain chain = lie_chain(P);
  const MuBound bound(P, chain, dv);
  std::vector<double> x = opt.point.empty() ? l.cfg.x0 : opt.point;
  if (P.homogenized && x.size() + 1 == P.state_dim()) x.push_back(1.0);
  if (x.size() != P.state_dim()) throw ConfigError("--x", "expected " + std::to_string(P.state_dim()) + " components");
  double t_max = opt.t_max;
  if (!(t_max > 0.0)) t_max = 2.0 * bound.tau_down(x).value;
  const int n = std::max(opt.samples, 2);
  const Trajectory traj = [&] {
    std::vector<double> y(2 * x.size(), 0.0);
    std::copy(x.begin(), x.end(), y.begin());
    return integrate(extended_rhs(P), y, 0.0, t_max, l.cfg.integrator);
  }();
  const CompiledExpr phi(P.phi, P.coordinates());
  std::ostringstream os;
  os << "# config_hash=" << l.cfg.hash << "\n";
  os << "t,phi,psi1,eta1,mu\n";
  std::vector<double> xi0(2 * x.size(), 0.0);
  std::copy(x.begin(), x.end(), xi0.begin());
  for (int k = 0; k < n; ++k) {
    const double t = t_max * k / (n - 1);
    const auto y = traj.at(t);
    os << num(t) << "," << num(phi.eval(y)) << "," << num(psi1(bound, xi0, t)) << "," << num(eta1(bound, x, t)) << ","
       << num(bound.mu(x, t)) << "\n";
  }
  Run run("bound-dump", opt);
  run.write("mucurve.csv", os.str());
  run.manifest(l.cfg.hash, l.seed, l.workers);
  return kOk;
}

int cmd_manifold(const Options& opt) {
  Loaded l = load(opt);
  require_bound(l.cfg);
  const EtcProblem& P = l.cfg.problem;
  const DeltaVector dv = load_deltas(opt, l.cfg);
  const MuBound bound(P, lie_chain(P), dv);
  if (!(opt.tau_star > 0.0)) throw ConfigError("--tau", "needs a positive time");
  const ManifoldCloud cloud = manifold_points(bound, opt.tau_star, opt.directions, l.seed);
  std::ostringstream os;
  write_manifold_csv(os, cloud, P.state_vars, l.cfg.hash);
  Run run("manifold", opt);
  char name[64];
  std::snprintf(name, sizeof name, "manifold_%g.csv", opt.tau_star);
  run.write(name, os.str());
  std::cout << cloud.points.size() << " points, " << cloud.skipped << " directions skipped\n";
  run.manifest(l.cfg.hash, l.seed, l.workers);
  return kOk;
}

int cmd_sim_etc(const Options& opt) {
  Loaded l = load(opt);
  const EtcProblem& P = l.cfg.problem;
  if (l.cfg.x0.empty()) throw ConfigError("sim.x0", "missing required key");
  OracleOptions oo;
  oo.integrator = l.cfg.integrator;
  const EventLog log = simulate_etc(P, l.cfg.x0, l.cfg.horizon, oo);
  std::ostringstream os;
  write_events_csv(os, log, l.cfg.hash);
  Run run("sim-etc", opt);
  run.write("events.csv", os.str());
  std::cout << "etc events " << log.events.size() << (log.exhausted ? " (no crossing before the horizon)" : "") << "\n";
  run.manifest(l.cfg.hash, l.seed, l.workers);
  return kOk;
}

int cmd_sim_stc(const Options& opt) {
  Loaded l = load(opt);
  require_bound(l.cfg);
  const EtcProblem& P = l.cfg.problem;
  if (!l.cfg.grid) throw ConfigError("grid", "sim-stc needs a [grid] block");
  if (l.cfg.x0.empty()) throw ConfigError("sim.x0", "missing required key");
  const DeltaVector dv = load_deltas(opt, l.cfg);
  const MuBound bound(P, lie_chain(P), dv);
  StcOptions so;
  so.tau_fallback = l.cfg.tau_fallback;
  so.check_soundness = opt.soundness;
  so.oracle.integrator = l.cfg.integrator;
  const EventLog log = simulate_stc(P, bound, *l.cfg.grid, l.cfg.x0, l.cfg.horizon, so);
  std::ostringstream os;
  write_events_csv(os, log, l.cfg.hash);
  Run run("sim-stc", opt);
  run.write("events.csv", os.str());
  int fallbacks = 0;
  int unsound = 0;
  double worst = -INFINITY;
  for (const auto& e : log.events) {
    if (e.region == 0) ++fallbacks;
    if (opt.soundness && e.oracle_tau >= 0.0 && e.tau > e.oracle_tau) ++unsound;
    worst = std::max(worst, e.max_phi);
  }
  std::cout << "stc events " << log.events.size() << " fallback " << fallbacks << " max_phi " << num(worst);
  if (opt.soundness) std::cout << " unsound " << unsound;
  std::cout << "\n";
  run.manifest(l.cfg.hash, l.seed, l.workers);
  return kOk;
}

struct EventCsv {
  std::string hash;
  std::vector<std::pair<double, double>> rows;  // (t, tau)
};

EventCsv read_events(const std::string& path) {
  std::istringstream in(read_file(path));
  EventCsv out;
  std::string line;
  std::getline(in, line);
  const std::string tag = "# config_hash=";
  if (line.rfind(tag, 0) != 0) throw IoError("'" + path + "' has no config_hash line");
  out.hash = line.substr(tag.size());
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream hs(line);
    std::string c;
    while (std::getline(hs, c, ',')) header.push_back(c);
  }
  const auto tau_col = std::find(header.begin(), header.end(), "tau") - header.begin();
  if (tau_col == static_cast<long>(header.size())) throw IoError("'" + path + "' has no tau column");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string c;
    std::vector<double> vals;
    while (std::getline(ls, c, ',')) vals.push_back(std::stod(c));
    out.rows.emplace_back(vals.at(0), vals.at(static_cast<std::size_t>(tau_col)));
  }
  return out;
}

int cmd_compare(const Options& opt) {
  if (opt.etc_csv.empty() || opt.stc_csv.empty()) throw ConfigError("--etc/--stc", "compare needs both event logs");
  const EventCsv etc = read_events(opt.etc_csv);
  const EventCsv stc = read_events(opt.stc_csv);
  if (etc.hash != stc.hash) throw HashMismatch("event logs come from different configs: " + etc.hash + " vs " + stc.hash);
  std::ostringstream os;
  os << "# config_hash=" << etc.hash << "\n";
  os << "scheme,t,tau\n";
  for (const auto& [t, tau] : etc.rows) os << "etc," << num(t) << "," << num(tau) << "\n";
  for (const auto& [t, tau] : stc.rows) os << "stc," << num(t) << "," << num(tau) << "\n";
  Run run("compare", opt);
  run.write("compare.csv", os.str());
  std::cout << "etc " << etc.rows.size() << " events, stc " << stc.rows.size() << " events\n";
  run.manifest(etc.hash, opt.seed.value_or(1), opt.workers.value_or(1));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Region-based self-triggered control toolkit"};
  app.set_version_flag("--version", ISOSTC_VERSION);
  app.require_subcommand(1);
  Options opt;

  auto common = [&](CLI::App* sub, bool deltas) {
    sub->add_option("--config", opt.config, "configuration file")->required()->check(CLI::ExistingFile);
    if (deltas) sub->add_option("--deltas", opt.deltas, "deltas.json")->required()->check(CLI::ExistingFile);
    sub->add_option("--out-dir", opt.out_dir, "output directory");
    sub->add_option("--seed", opt.seed, "overrides synth.seed");
    sub->add_option("--workers", opt.workers, "overrides synth.workers")->check(CLI::PositiveNumber);
    sub->add_option("--budget-boxes", opt.budget_boxes, "overrides synth.max_boxes")->check(CLI::PositiveNumber);
  };

  std::map<CLI::App*, int (*)(const Options&)> handlers;
  auto* check = app.add_subcommand("check", "load and validate a configuration");
  common(check, false);
  handlers[check] = cmd_check;
  auto* synth = app.add_subcommand("synth", "synthesize a certified delta vector");
  common(synth, false);
  handlers[synth] = cmd_synth;
  auto* ver = app.add_subcommand("verify", "certify or refute a delta vector");
  common(ver, true);
  handlers[ver] = cmd_verify;
  auto* dump = app.add_subcommand("bound-dump", "phi, psi1, eta1 and mu along one trajectory");
  common(dump, true);
  dump->add_option("--x", opt.point, "initial state (defaults to sim.x0)")->delimiter(',');
  dump->add_option("--t-max", opt.t_max, "time span (defaults to twice tau_down)");
  dump->add_option("--samples", opt.samples, "rows");
  handlers[dump] = cmd_bound_dump;
  auto* man = app.add_subcommand("manifold", "inner approximation of an isochronous manifold");
  common(man, true);
  man->add_option("--tau", opt.tau_star, "inter-event time")->required();
  man->add_option("--directions", opt.directions, "number of directions");
  handlers[man] = cmd_manifold;
  auto* etc = app.add_subcommand("sim-etc", "event-triggered simulation");
  common(etc, false);
  handlers[etc] = cmd_sim_etc;
  auto* stc = app.add_subcommand("sim-stc", "region-based self-triggered simulation");
  common(stc, true);
  stc->add_flag("--soundness", opt.soundness, "compare each assigned time with the ETC oracle");
  handlers[stc] = cmd_sim_stc;
  auto* cmp = app.add_subcommand("compare", "merge ETC and STC event logs");
  cmp->add_option("--etc", opt.etc_csv, "ETC events.csv")->required()->check(CLI::ExistingFile);
  cmp->add_option("--stc", opt.stc_csv, "STC events.csv")->required()->check(CLI::ExistingFile);
  cmp->add_option("--out-dir", opt.out_dir, "output directory");
  handlers[cmp] = cmd_compare;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kOk : kUsage;
  }

  try {
    for (const auto& [sub, fn] : handlers) {
      if (sub->parsed()) return fn(opt);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kProblem;
  } catch (const ProblemError& e) {
    std::cerr << "problem error: " << e.what() << "\n";
    return kProblem;
  } catch (const HomogenizeError& e) {
    std::cerr << "homogenize error: " << e.what() << "\n";
    return kProblem;
  } catch (const BudgetExhausted& e) {
    std::cerr << "budget exhausted: " << e.what() << "\n";
    return kBudget;
  } catch (const SynthError& e) {
    std::cerr << "synth error: " << e.what() << "\n";
    return kSynth;
  } catch (const OutsideOuterRegion& e) {
    std::cerr << "outside the outer region: " << e.what() << "\n";
    return kOutside;
  } catch (const BoundError& e) {
    std::cerr << "bound error: " << e.what() << "\n";
    return kBound;
  } catch (const IntegrationError& e) {
    std::cerr << "integration error: " << e.what() << "\n";
    return kIntegration;
  } catch (const HashMismatch& e) {
    std::cerr << "hash mismatch: " << e.what() << "\n";
    return kHashMismatch;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}
