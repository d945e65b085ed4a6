#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "patchcp/dual.hpp"
#include "patchcp/isolated.hpp"
#include "patchcp/meanfield.hpp"
#include "patchcp/model.hpp"
#include "patchcp/percolation.hpp"
#include "patchcp/record.hpp"
#include "patchcp/rng.hpp"
#include "patchcp/sim.hpp"
#include "patchcp/util.hpp"

namespace {

using namespace patchcp;
using nlohmann::json;

/// A module reported a result that breaks a hard model invariant (exit 2).
struct InvariantViolation : std::runtime_error {
  explicit InvariantViolation(const std::string& what) : std::runtime_error(what) {}
};

struct Global {
  uint64_t seed = 1;
  std::size_t replicas = 1000;
  std::string out = "out";
  unsigned threads = 0;
};

BoundaryPolicy parse_boundary(const std::string& s) {
  if (s == "lower") return BoundaryPolicy::Lower;
  if (s == "upper") return BoundaryPolicy::Upper;
  throw ConfigError("boundary: expected 'lower' or 'upper', got '" + s + "'");
}

json estimate_json(const McEstimate& e) {
  return json{{"mean", e.mean}, {"se", e.se}};
}

json global_json(const Global& g) {
  return json{{"seed", g.seed},
              {"replicas", g.replicas},
              {"out", g.out},
              {"threads", g.threads}};
}

std::string csv_row(std::initializer_list<std::string> cells) {
  std::string row;
  for (const std::string& c : cells) {
    if (!row.empty()) row += ',';
    row += c;
  }
  return row + "\n";
}

// ---------------------------------------------------------------- simulate

struct SimulateOpts {
  double a = 1.0, b = 1.0;
  int N = 2, M = 1, K = 10;
  std::string boundary = "lower";
  double horizon = 10.0, snapshot_dt = 1.0;
  int init_block = -1;  ///< <0: one full patch at the origin
  bool survival = false;
  std::vector<int> sweep_N;
};

SimConfig make_sim_config(const Global& g, const SimulateOpts& o) {
  SimConfig cfg;
  cfg.params = ModelParams{o.a, o.b, o.N, o.M};
  cfg.K = o.K;
  cfg.boundary = parse_boundary(o.boundary);
  cfg.horizon = o.horizon;
  cfg.snapshot_dt = o.snapshot_dt;
  cfg.seed = g.seed;
  if (o.init_block >= 0) cfg.initial = Block{o.init_block};
  return cfg;
}

void run_simulate(const Global& g, const SimulateOpts& o) {
  json cfg_echo{{"a", o.a},
                {"b", o.b},
                {"N", o.N},
                {"M", o.M},
                {"K", o.K},
                {"boundary", o.boundary},
                {"horizon", o.horizon},
                {"snapshot_dt", o.snapshot_dt},
                {"init_block", o.init_block},
                {"survival", o.survival},
                {"global", global_json(g)}};

  if (!o.sweep_N.empty()) {
    RunEmitter em("simulate", g.out);
    cfg_echo["sweep_N"] = o.sweep_N;
    em.set_config(cfg_echo);
    std::string csv = "N,p_survive,se\n";
    json rows = json::array();
    for (int n : o.sweep_N) {
      SimulateOpts per = o;
      per.N = n;
      per.sweep_N.clear();
      SimConfig cfg = make_sim_config(g, per);
      McEstimate est = survival_probability_mc(cfg, g.replicas, g.threads);
      RunEmitter sub("simulate", g.out + "/N_" + std::to_string(n));
      json sub_cfg = cfg_echo;
      sub_cfg["N"] = n;
      sub_cfg.erase("sweep_N");
      sub.set_config(sub_cfg);
      sub.add_file("survival.csv",
                   "p_survive,se,replicas\n" +
                       csv_row({format_double(est.mean), format_double(est.se),
                                std::to_string(g.replicas)}));
      sub.set_summary(json{{"survival", estimate_json(est)}});
      sub.finish();
      csv += csv_row({std::to_string(n), format_double(est.mean),
                      format_double(est.se)});
      rows.push_back(json{{"N", n}, {"survival", estimate_json(est)}});
    }
    em.add_file("sweep.csv", csv);
    em.set_summary(json{{"rows", rows}});
    std::printf("wrote %s\n", em.finish().c_str());
    return;
  }

  SimConfig cfg = make_sim_config(g, o);
  RunEmitter em("simulate", g.out);
  em.set_config(cfg_echo);
  if (o.survival) {
    McEstimate est = survival_probability_mc(cfg, g.replicas, g.threads);
    em.add_file("survival.csv",
                "p_survive,se,replicas\n" +
                    csv_row({format_double(est.mean), format_double(est.se),
                             std::to_string(g.replicas)}));
    em.set_summary(json{{"survival", estimate_json(est)}});
  } else {
    Trajectory tr = run(cfg);
    em.add_file("trajectory.csv", trajectory_csv(tr, -cfg.K));
    em.set_summary(
        json{{"terminal", tr.terminal == Terminal::Extinct ? "extinct" : "horizon"},
             {"final_time", tr.final_time},
             {"events", tr.event_count},
             {"null_events", tr.null_event_count},
             {"window_exit_warning", tr.window_exit_warning}});
  }
  std::printf("wrote %s\n", em.finish().c_str());
}

// ---------------------------------------------------------------- meanfield

struct MeanfieldOpts {
  double a = 4.0, b = 1.0;
  int M = 1, K = 20;
  std::string boundary = "lower";
  std::string init = "const:0.5";  ///< const:u | step:u | twolevel:hi,lo
  double t_end = 5.0, tol = 1e-9;
  double front_speed_level = -1.0;  ///< >0: also estimate the front speed
  double front_horizon = 40.0;
  bool check_front = false;
  std::vector<int> ladder;  ///< truncation-study radii
};

Profile parse_initial_profile(const MeanfieldOpts& o, BoundaryPolicy pol) {
  auto colon = o.init.find(':');
  if (colon == std::string::npos)
    throw ConfigError("meanfield: init must be const:u, step:u, or twolevel:hi,lo");
  std::string kind = o.init.substr(0, colon), args = o.init.substr(colon + 1);
  try {
    if (kind == "const") return constant_profile(o.K, std::stod(args), pol);
    if (kind == "step") return step_profile(o.K, std::stod(args), pol);
    if (kind == "twolevel") {
      auto comma = args.find(',');
      if (comma == std::string::npos)
        throw ConfigError("meanfield: twolevel needs hi,lo");
      return two_level_profile(o.K, std::stod(args.substr(0, comma)),
                               std::stod(args.substr(comma + 1)), pol);
    }
  } catch (const std::invalid_argument&) {
    throw ConfigError("meanfield: bad numeric level in init '" + o.init + "'");
  }
  throw ConfigError("meanfield: unknown init kind '" + kind + "'");
}

json equilibria_json(const Equilibria& eq) {
  json roots = json::array();
  for (const EquilibriumPoint& r : eq.roots) {
    const char* s = r.stability == Stability::Stable     ? "stable"
                    : r.stability == Stability::Unstable ? "unstable"
                                                         : "semistable";
    roots.push_back(json{{"value", r.value}, {"stability", s}});
  }
  return json{{"r", eq.r}, {"roots", roots}};
}

void run_meanfield(const Global& g, const MeanfieldOpts& o) {
  ModelParams p{o.a, o.b, 2, o.M};
  validate_params(p);
  BoundaryPolicy pol = parse_boundary(o.boundary);
  Profile init = parse_initial_profile(o, pol);
  RunEmitter em("meanfield", g.out);
  em.set_config(json{{"a", o.a},
                     {"b", o.b},
                     {"M", o.M},
                     {"K", o.K},
                     {"boundary", o.boundary},
                     {"init", o.init},
                     {"t_end", o.t_end},
                     {"tol", o.tol},
                     {"front_speed_level", o.front_speed_level},
                     {"front_horizon", o.front_horizon},
                     {"ladder", o.ladder},
                     {"global", global_json(g)}});

  Profile final_prof = integrate(p, init, o.t_end, o.tol);
  em.add_file("profile.csv", profile_csv(final_prof));

  json summary{{"equilibria", equilibria_json(equilibria(p.r()))},
               {"two_patch_equilibria", equilibria_json(two_patch_equilibria(p))}};
  if (o.check_front)
    summary["front_preserved"] = front_preserved(p, init, o.t_end, o.tol);
  if (o.front_speed_level > 0.0)
    summary["front_speed"] =
        front_speed_estimate(p, o.front_speed_level, o.front_horizon, o.tol);
  if (!o.ladder.empty()) {
    TruncationLadder lad = truncation_error_ladder(p, init, o.ladder, o.t_end, o.tol);
    std::string csv = "radius,lower_diff,upper_diff\n";
    for (std::size_t i = 1; i < lad.radii.size(); ++i)
      csv += csv_row({std::to_string(lad.radii[i]),
                      format_double(lad.lower_diffs[i - 1]),
                      format_double(lad.upper_diffs[i - 1])});
    em.add_file("truncation.csv", csv);
    summary["ladder"] = json{{"lower_nondecreasing", lad.lower_nondecreasing},
                             {"upper_nonincreasing", lad.upper_nonincreasing}};
  }
  em.set_summary(summary);
  std::printf("wrote %s\n", em.finish().c_str());
}

// ---------------------------------------------------------------- dual-check

struct DualCheckOpts {
  double a = 1.0, b = 1.0;
  int N = 2, patches = 2, M = 1;
  double t = 1.0;
  std::size_t seeds = 100;
  bool emit_log = false;
};

void run_dual_check(const Global& g, const DualCheckOpts& o) {
  ModelParams p{o.a, o.b, o.N, o.M};
  RunEmitter em("dual-check", g.out);
  em.set_config(json{{"a", o.a},
                     {"b", o.b},
                     {"N", o.N},
                     {"M", o.M},
                     {"patches", o.patches},
                     {"t", o.t},
                     {"seeds", o.seeds},
                     {"emit_log", o.emit_log},
                     {"global", global_json(g)}});
  std::vector<char> ok(o.seeds, 0);
  parallel_for(
      o.seeds,
      [&](std::size_t i) {
        ok[i] = duality_check_exact(p, o.patches, o.t, CounterRng::substream(g.seed, i))
                    ? 1
                    : 0;
      },
      g.threads);
  std::size_t failures = 0;
  long long first_failure = -1;
  for (std::size_t i = 0; i < o.seeds; ++i)
    if (!ok[i]) {
      ++failures;
      if (first_failure < 0) first_failure = static_cast<long long>(i);
    }
  if (o.emit_log) {
    InfluenceSet iset = simulate_n_dual(p, o.N, DualStart{0, {}, {}, true}, o.t,
                                        CounterRng::substream(g.seed, 0));
    em.add_file("events.jsonl", event_log_jsonl(iset));
  }
  em.set_summary(json{{"seeds", o.seeds},
                      {"failures", failures},
                      {"first_failure_index", first_failure}});
  std::printf("wrote %s\n", em.finish().c_str());
  if (failures > 0)
    throw InvariantViolation("duality check failed on " + std::to_string(failures) +
                             " of " + std::to_string(o.seeds) + " seeds");
}

// ---------------------------------------------------------------- agreement

struct AgreementOpts {
  double a = 2.0, b = 1.0;
  int N = 100, M = 1, K = 12, x = 0;
  double t = 1.0, epsilon = 0.1, u0 = 0.5;
  std::size_t dual_replicas = 20000;
  bool limiting = false;
};

void run_agreement(const Global& g, const AgreementOpts& o) {
  ModelParams p{o.a, o.b, o.N, o.M};
  Profile u0 = constant_profile(o.K, o.u0, BoundaryPolicy::Lower);
  RunEmitter em("agreement", g.out);
  em.set_config(json{{"a", o.a},
                     {"b", o.b},
                     {"N", o.N},
                     {"M", o.M},
                     {"K", o.K},
                     {"x", o.x},
                     {"t", o.t},
                     {"epsilon", o.epsilon},
                     {"u0", o.u0},
                     {"dual_replicas", o.dual_replicas},
                     {"limiting", o.limiting},
                     {"global", global_json(g)}});
  AgreementReport rep =
      occupation_agreement_mc(p, o.N, u0, o.x, o.t, g.replicas, o.dual_replicas,
                              o.epsilon, g.seed, o.limiting, g.threads);
  em.add_file(
      "agreement.csv",
      "forward_mean,forward_se,dual_mean,dual_se,deviation,deviation_freq,"
      "chebyshev_bound,collision_mean,collision_se,used_limiting\n" +
          csv_row({format_double(rep.forward.mean), format_double(rep.forward.se),
                   format_double(rep.dual.mean), format_double(rep.dual.se),
                   format_double(rep.deviation), format_double(rep.deviation_freq),
                   format_double(rep.chebyshev_bound),
                   format_double(rep.collision_prob.mean),
                   format_double(rep.collision_prob.se),
                   rep.used_limiting_dual ? "1" : "0"}));
  em.set_summary(json{{"forward", estimate_json(rep.forward)},
                      {"dual", estimate_json(rep.dual)},
                      {"deviation", rep.deviation},
                      {"deviation_freq", rep.deviation_freq},
                      {"chebyshev_bound", rep.chebyshev_bound},
                      {"collision_prob", estimate_json(rep.collision_prob)},
                      {"used_limiting_dual", rep.used_limiting_dual}});
  std::printf("wrote %s\n", em.finish().c_str());
}

// ---------------------------------------------------------------- isolated

struct IsolatedOpts {
  double a = 2.0, b = 0.0;
  int N = 5, M = 1000;
};

void run_isolated(const Global& g, const IsolatedOpts& o) {
  RunEmitter em("isolated", g.out);
  em.set_config(json{{"a", o.a},
                     {"b", o.b},
                     {"N", o.N},
                     {"M", o.M},
                     {"global", global_json(g)}});
  em.add_file("occupation.csv", occupation_table_csv(o.a, o.N));
  std::vector<double> tau = occupation_times_exact(exact_chain(o.a, o.N));
  double weighted = weighted_occupation_sum(tau);
  double bound = weighted_occupation_bound(o.a, o.N);
  ExportMean exp_mean = export_count_mean(o.a, o.b, o.N);
  json summary{{"sum_j_tau", weighted},
               {"weighted_bound", bound},
               {"export_exact", exp_mean.exact},
               {"export_bound", exp_mean.closed_form}};
  std::string bounds_csv =
      "sum_j_tau,weighted_bound,export_exact,export_bound\n" +
      csv_row({format_double(weighted), format_double(bound),
               format_double(exp_mean.exact), format_double(exp_mean.closed_form)});
  if (o.b > 0.0) {
    ModelParams p{o.a, o.b, o.N, o.M};
    CollisionBound cb = collision_probability_bound(o.M);
    double surv = survival_upper_bound(p);
    McEstimate mc = collision_mc(p, g.replicas, g.seed, g.threads);
    em.add_file("collision.csv",
                "product_exact,birthday,simplified,chain_ok,survival_bound,mc_mean,"
                "mc_se\n" +
                    csv_row({format_double(cb.product_exact),
                             format_double(cb.birthday), format_double(cb.simplified),
                             cb.chain_ok ? "1" : "0", format_double(surv),
                             format_double(mc.mean), format_double(mc.se)}));
    summary["collision_bound"] = json{{"product_exact", cb.product_exact},
                                      {"birthday", cb.birthday},
                                      {"simplified", cb.simplified},
                                      {"chain_ok", cb.chain_ok}};
    summary["survival_bound"] = surv;
    summary["collision_mc"] = estimate_json(mc);
  }
  em.add_file("bounds.csv", bounds_csv);
  em.set_summary(summary);
  std::printf("wrote %s\n", em.finish().c_str());
  if (weighted > bound + 1e-9)
    throw InvariantViolation("weighted occupation sum exceeds its closed-form bound");
}

// ---------------------------------------------------------------- percolation

struct PercolationOpts {
  double gamma = 0.1;
  int k = 0, depth = 16, width = -1;
  std::vector<int> w0{0};
  bool dump = false;
  bool exact = false;
  long long gamma_num = 1, gamma_den = 10;
};

void run_percolation(const Global& g, const PercolationOpts& o) {
  RunEmitter em("percolation", g.out);
  em.set_config(json{{"gamma", o.gamma},
                     {"k", o.k},
                     {"depth", o.depth},
                     {"width", o.width},
                     {"w0", o.w0},
                     {"dump", o.dump},
                     {"exact", o.exact},
                     {"gamma_num", o.gamma_num},
                     {"gamma_den", o.gamma_den},
                     {"global", global_json(g)}});
  int width = o.width < 0 ? 4 * o.depth : o.width;
  McEstimate est = cluster_survival_mc(o.gamma, o.k, o.depth, g.replicas, o.w0,
                                       g.seed, width, g.threads);
  std::string csv =
      "gamma,k,depth,width,replicas,p_survive,se\n" +
      csv_row({format_double(o.gamma), std::to_string(o.k), std::to_string(o.depth),
               std::to_string(width), std::to_string(g.replicas),
               format_double(est.mean), format_double(est.se)});
  em.add_file("percolation.csv", csv);
  json summary{{"survival", estimate_json(est)}};
  bool mismatch = false;
  if (o.exact) {
    if (o.k != 0)
      throw ConfigError("percolation: exact enumeration requires k = 0");
    Rational gr(o.gamma_num, o.gamma_den);
    Rational brute = survival_exact(gr, o.depth, width, o.w0);
    Rational dp = survival_exact_dp(gr, o.depth, width, o.w0);
    mismatch = !(brute == dp);
    summary["exact"] = json{{"num", brute.num},
                            {"den", brute.den},
                            {"value", brute.to_double()},
                            {"dp_matches", !mismatch}};
  }
  if (o.dump) {
    OrientedGrid grid =
        make_grid(o.gamma, o.k, o.depth, width, CounterRng::substream(g.seed, 0));
    em.add_file("grid.csv", grid_csv(grid, evolve_wet(grid, o.w0)));
  }
  em.set_summary(summary);
  std::printf("wrote %s\n", em.finish().c_str());
  if (mismatch)
    throw InvariantViolation(
        "exact survival enumeration and subset recursion disagree");
}

// ------------------------------------------------------------ phase-portrait

struct PortraitOpts {
  double a_min = 0.5, a_max = 8.0, a_step = 0.25;
  double b_min = 0.25, b_max = 6.0, b_step = 0.25;
  int M = 1;
  double horizon = 60.0, tol = 1e-9;
};

void run_phase_portrait(const Global& g, const PortraitOpts& o) {
  if (!(o.a_step > 0.0) || !(o.b_step > 0.0) || o.a_max < o.a_min ||
      o.b_max < o.b_min)
    throw ConfigError("phase-portrait: bad grid bounds");
  std::vector<double> as, bs;
  for (int i = 0;; ++i) {
    double a = o.a_min + i * o.a_step;
    if (a > o.a_max + 1e-12) break;
    as.push_back(a);
  }
  for (int i = 0;; ++i) {
    double b = o.b_min + i * o.b_step;
    if (b > o.b_max + 1e-12) break;
    bs.push_back(b);
  }
  struct Cell {
    double a, b;
    bool expansion = false, retreat = false;
  };
  std::vector<Cell> cells;
  for (double a : as)
    for (double b : bs) cells.push_back({a, b});

  parallel_for(
      cells.size(),
      [&](std::size_t i) {
        ModelParams p{cells[i].a, cells[i].b, 2, o.M};
        cells[i].expansion = detect_expansion(p, {}, 1, o.horizon, o.tol).has_value();
        cells[i].retreat = detect_retreat(p, {}, {}, o.horizon, o.tol).has_value();
      },
      g.threads);

  RunEmitter em("phase-portrait", g.out);
  em.set_config(json{{"a_min", o.a_min},
                     {"a_max", o.a_max},
                     {"a_step", o.a_step},
                     {"b_min", o.b_min},
                     {"b_max", o.b_max},
                     {"b_step", o.b_step},
                     {"M", o.M},
                     {"horizon", o.horizon},
                     {"tol", o.tol},
                     {"global", global_json(g)}});
  std::string csv = "a,b,expansion,retreat,classification\n";
  std::size_t n_exp = 0, n_ret = 0, n_none = 0, n_both = 0;
  for (const Cell& c : cells) {
    const char* cls = c.expansion && c.retreat ? "conflict"
                      : c.expansion           ? "expansion"
                      : c.retreat             ? "retreat"
                                              : "inconclusive";
    (c.expansion && c.retreat ? n_both
     : c.expansion            ? n_exp
     : c.retreat              ? n_ret
                              : n_none)++;
    csv += csv_row({format_double(c.a), format_double(c.b), c.expansion ? "1" : "0",
                    c.retreat ? "1" : "0", cls});
  }
  em.add_file("portrait.csv", csv);
  em.set_summary(json{{"cells", cells.size()},
                      {"expansion", n_exp},
                      {"retreat", n_ret},
                      {"inconclusive", n_none},
                      {"conflict", n_both}});
  std::printf("wrote %s\n", em.finish().c_str());
  if (n_both > 0)
    throw InvariantViolation(std::to_string(n_both) +
                             " grid cells certified both expansion and retreat");
}

// ---------------------------------------------------------------- range-study

struct RangeStudyOpts {
  double a = 2.0, b = 1.0;
  int N = 5;
  std::vector<int> Ms{100, 1000, 10000};
  double horizon = 50.0;
};

void run_range_study(const Global& g, const RangeStudyOpts& o) {
  if (o.Ms.empty()) throw ConfigError("range-study: M ladder is empty");
  for (std::size_t i = 1; i < o.Ms.size(); ++i)
    if (o.Ms[i] <= o.Ms[i - 1])
      throw ConfigError("range-study: M ladder must be strictly increasing");
  RunEmitter em("range-study", g.out);
  em.set_config(json{{"a", o.a},
                     {"b", o.b},
                     {"N", o.N},
                     {"M_ladder", o.Ms},
                     {"horizon", o.horizon},
                     {"global", global_json(g)}});
  std::string csv = "M,p_survive,se,bound\n";
  json rows = json::array();
  bool violated = false;
  for (std::size_t i = 0; i < o.Ms.size(); ++i) {
    int M = o.Ms[i];
    ModelParams p{o.a, o.b, o.N, M};
    double bound = survival_upper_bound(p);
    SimConfig cfg;
    cfg.params = p;
    // Exports land within distance M and collision-born patches within 2M;
    // the lower-policy window [-2M, 2M] only suppresses survival further, so
    // the bound comparison stays valid.
    cfg.K = o.b > 0.0 ? 2 * M : 0;
    cfg.boundary = BoundaryPolicy::Lower;
    cfg.horizon = o.horizon;
    cfg.snapshot_dt = 0.0;
    cfg.seed = CounterRng::substream(g.seed, i);
    cfg.initial = SingleFullPatch{};
    McEstimate est = survival_probability_mc(cfg, g.replicas, g.threads);
    csv += csv_row({std::to_string(M), format_double(est.mean),
                    format_double(est.se), format_double(bound)});
    rows.push_back(json{{"M", M},
                        {"p_survive", estimate_json(est)},
                        {"bound", bound}});
    if (est.mean > bound + 3.0 * est.se) violated = true;
  }
  em.add_file("range.csv", csv);
  em.set_summary(json{{"rows", rows}, {"bound_violated", violated}});
  std::printf("wrote %s\n", em.finish().c_str());
  if (violated)
    throw InvariantViolation("MC survival exceeded the closed-form bound + 3 s.e.");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and analysis toolkit for a contact process with "
               "pair births on a lattice of patches"};
  app.fallthrough();
  app.set_config("--config", "", "read options from an INI file");
  app.require_subcommand(1);

  Global g;
  app.add_option("--seed", g.seed, "base RNG seed")->capture_default_str();
  app.add_option("--replicas", g.replicas, "Monte Carlo replica count")
      ->capture_default_str();
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (0 = all hardware threads)")
      ->capture_default_str();

  SimulateOpts sim;
  CLI::App* c_sim = app.add_subcommand(
      "simulate", "event-driven runs of the patch chain on a window");
  c_sim->add_option("-a,--a", sim.a, "inner birth rate")->capture_default_str();
  c_sim->add_option("-b,--b", sim.b, "outer birth rate")->capture_default_str();
  c_sim->add_option("-N,--patch-size", sim.N, "individuals per patch")
      ->capture_default_str();
  c_sim->add_option("-M,--range", sim.M, "dispersal range")->capture_default_str();
  c_sim->add_option("-K,--window", sim.K, "window radius")->capture_default_str();
  c_sim->add_option("--boundary", sim.boundary, "lower|upper")->capture_default_str();
  c_sim->add_option("--horizon", sim.horizon, "time horizon")->capture_default_str();
  c_sim->add_option("--snapshot-dt", sim.snapshot_dt,
                    "snapshot cadence (<=0: endpoints only)")
      ->capture_default_str();
  c_sim->add_option("--init-block", sim.init_block,
                    "fill [-L, L] initially (default: single patch)")
      ->capture_default_str();
  c_sim->add_flag("--survival", sim.survival,
                  "estimate survival probability over --replicas runs");
  c_sim->add_option("--sweep-N", sim.sweep_N,
                    "run a survival sweep over these patch sizes");
  c_sim->callback([&] { run_simulate(g, sim); });

  MeanfieldOpts mf;
  CLI::App* c_mf = app.add_subcommand(
      "meanfield", "deterministic density-equation flows and diagnostics");
  c_mf->add_option("-a,--a", mf.a, "inner birth rate")->capture_default_str();
  c_mf->add_option("-b,--b", mf.b, "outer birth rate")->capture_default_str();
  c_mf->add_option("-M,--range", mf.M, "dispersal range")->capture_default_str();
  c_mf->add_option("-K,--window", mf.K, "window radius")->capture_default_str();
  c_mf->add_option("--boundary", mf.boundary, "lower|upper")->capture_default_str();
  c_mf->add_option("--init", mf.init, "const:u | step:u | twolevel:hi,lo")
      ->capture_default_str();
  c_mf->add_option("--t-end", mf.t_end, "integration time")->capture_default_str();
  c_mf->add_option("--tol", mf.tol, "integration tolerance")->capture_default_str();
  c_mf->add_option("--front-speed-level", mf.front_speed_level,
                   "estimate front speed at this level (needs a+b > 4)")
      ->capture_default_str();
  c_mf->add_option("--front-horizon", mf.front_horizon,
                   "horizon for the speed estimate")
      ->capture_default_str();
  c_mf->add_flag("--check-front", mf.check_front,
                 "verify the flow keeps the initial wave-front shape");
  c_mf->add_option("--ladder", mf.ladder, "truncation-study window radii");
  c_mf->callback([&] { run_meanfield(g, mf); });

  DualCheckOpts dc;
  CLI::App* c_dc = app.add_subcommand(
      "dual-check", "exact pathwise duality gate on small instances");
  c_dc->add_option("-a,--a", dc.a, "inner birth rate")->capture_default_str();
  c_dc->add_option("-b,--b", dc.b, "outer birth rate")->capture_default_str();
  c_dc->add_option("-N,--patch-size", dc.N, "individuals per patch (1..3)")
      ->capture_default_str();
  c_dc->add_option("-M,--range", dc.M, "dispersal range")->capture_default_str();
  c_dc->add_option("--patches", dc.patches, "number of patches (1..3)")
      ->capture_default_str();
  c_dc->add_option("-t,--t", dc.t, "time horizon (<= 16)")->capture_default_str();
  c_dc->add_option("--seeds", dc.seeds, "number of seeds to check")
      ->capture_default_str();
  c_dc->add_flag("--emit-log", dc.emit_log, "also write one dual event log");
  c_dc->callback([&] { run_dual_check(g, dc); });

  AgreementOpts ag;
  CLI::App* c_ag = app.add_subcommand(
      "agreement", "forward density vs dual estimate at one site");
  c_ag->add_option("-a,--a", ag.a, "inner birth rate")->capture_default_str();
  c_ag->add_option("-b,--b", ag.b, "outer birth rate")->capture_default_str();
  c_ag->add_option("-N,--patch-size", ag.N, "individuals per patch")
      ->capture_default_str();
  c_ag->add_option("-M,--range", ag.M, "dispersal range")->capture_default_str();
  c_ag->add_option("-K,--window", ag.K, "window radius")->capture_default_str();
  c_ag->add_option("-x,--site", ag.x, "query site")->capture_default_str();
  c_ag->add_option("-t,--t", ag.t, "query time")->capture_default_str();
  c_ag->add_option("--epsilon", ag.epsilon, "deviation threshold")
      ->capture_default_str();
  c_ag->add_option("--u0", ag.u0, "constant initial density")->capture_default_str();
  c_ag->add_option("--dual-replicas", ag.dual_replicas, "dual-side replicas")
      ->capture_default_str();
  c_ag->add_flag("--limiting", ag.limiting,
                 "use the limiting dual with collision correction");
  c_ag->callback([&] { run_agreement(g, ag); });

  IsolatedOpts iso;
  CLI::App* c_iso = app.add_subcommand(
      "isolated", "single-patch exact occupation analysis and range bounds");
  c_iso->add_option("-a,--a", iso.a, "inner birth rate")->capture_default_str();
  c_iso->add_option("-b,--b", iso.b, "outer birth rate (0: no export analysis)")
      ->capture_default_str();
  c_iso->add_option("-N,--patch-size", iso.N, "individuals per patch")
      ->capture_default_str();
  c_iso->add_option("-M,--range", iso.M, "dispersal range")->capture_default_str();
  c_iso->callback([&] { run_isolated(g, iso); });

  PercolationOpts perc;
  CLI::App* c_perc = app.add_subcommand(
      "percolation", "oriented site percolation wet-set evolution");
  c_perc->add_option("--gamma", perc.gamma, "closed-site density")
      ->capture_default_str();
  c_perc->add_option("-k,--k", perc.k, "dependency range")->capture_default_str();
  c_perc->add_option("--depth", perc.depth, "levels to evolve")
      ->capture_default_str();
  c_perc->add_option("--width", perc.width, "lateral boundary (-1: 4*depth)")
      ->capture_default_str();
  c_perc->add_option("--w0", perc.w0, "level-0 wet sites (even)")
      ->capture_default_str();
  c_perc->add_flag("--dump", perc.dump, "write one grid/wet-set CSV");
  c_perc->add_flag("--exact", perc.exact,
                   "verify against exact enumeration (k=0, small grids)");
  c_perc->add_option("--gamma-num", perc.gamma_num, "exact gamma numerator")
      ->capture_default_str();
  c_perc->add_option("--gamma-den", perc.gamma_den, "exact gamma denominator")
      ->capture_default_str();
  c_perc->callback([&] { run_percolation(g, perc); });

  PortraitOpts por;
  CLI::App* c_por = app.add_subcommand(
      "phase-portrait", "front-behavior certificates over an (a, b) grid");
  c_por->add_option("--a-min", por.a_min, "")->capture_default_str();
  c_por->add_option("--a-max", por.a_max, "")->capture_default_str();
  c_por->add_option("--a-step", por.a_step, "")->capture_default_str();
  c_por->add_option("--b-min", por.b_min, "")->capture_default_str();
  c_por->add_option("--b-max", por.b_max, "")->capture_default_str();
  c_por->add_option("--b-step", por.b_step, "")->capture_default_str();
  c_por->add_option("-M,--range", por.M, "dispersal range")->capture_default_str();
  c_por->add_option("--horizon", por.horizon, "detector horizon")
      ->capture_default_str();
  c_por->add_option("--tol", por.tol, "integration tolerance")
      ->capture_default_str();
  c_por->callback([&] { run_phase_portrait(g, por); });

  RangeStudyOpts rs;
  CLI::App* c_rs = app.add_subcommand(
      "range-study", "MC survival vs the long-range extinction bound");
  c_rs->add_option("-a,--a", rs.a, "inner birth rate")->capture_default_str();
  c_rs->add_option("-b,--b", rs.b, "outer birth rate")->capture_default_str();
  c_rs->add_option("-N,--patch-size", rs.N, "individuals per patch")
      ->capture_default_str();
  c_rs->add_option("--M-ladder", rs.Ms, "increasing dispersal ranges")
      ->capture_default_str();
  c_rs->add_option("--horizon", rs.horizon, "survival horizon")
      ->capture_default_str();
  c_rs->callback([&] { run_range_study(g, rs); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const InvariantViolation& e) {
    std::fprintf(stderr, "invariant violation: %s\n", e.what());
    return 2;
  } catch (const ResourceCapError& e) {
    std::fprintf(stderr, "resource cap: %s\n", e.what());
    return 3;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
