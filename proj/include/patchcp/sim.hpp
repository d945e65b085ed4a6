#ifndef PATCHCP_SIM_HPP
#define PATCHCP_SIM_HPP

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "patchcp/model.hpp"
#include "patchcp/rng.hpp"
#include "patchcp/util.hpp"

namespace patchcp {

/// Initial occupancy profiles for a windowed run.
struct SingleFullPatch {};           ///< N individuals at the origin
struct Block { int L = 0; };         ///< N individuals at every site in [-L, L]
struct Explicit { std::vector<int> xi; };  ///< occupancies for lo..hi in order

using InitialCondition = std::variant<SingleFullPatch, Block, Explicit>;

struct SimConfig {
  ModelParams params;
  int K = 10;                        ///< window is {-K, ..., K}
  BoundaryPolicy boundary = BoundaryPolicy::Lower;
  double horizon = 10.0;             ///< simulated time limit
  uint64_t seed = 1;
  InitialCondition initial = SingleFullPatch{};
  double snapshot_dt = 1.0;          ///< cadence of stored snapshots (<=0: only endpoints)
};

enum class Terminal { Extinct, HorizonReached };

struct Snapshot {
  double t = 0.0;
  std::vector<int> xi;  ///< occupancies at window sites lo..hi
};

/**
 * Result of one event-driven run.  `window_exit_warning` is set when, under
 * the Lower policy, a patch within distance M of the window edge becomes
 * occupied: from then on the law of the windowed chain may differ from the
 * unbounded one (the window only suppresses births, so occupation is
 * stochastically below the unbounded process either way).
 */
struct Trajectory {
  std::vector<Snapshot> snapshots;
  Terminal terminal = Terminal::HorizonReached;
  bool window_exit_warning = false;
  double final_time = 0.0;
  long long event_count = 0;
  long long null_event_count = 0;  ///< thinned candidate events with no effect
};

/// Called after every effective event; return false to stop the run early.
using EventVisitor = std::function<bool(double t, const Event& e, const MesoState& s)>;

/// Exact (Gillespie-style, thinned-candidate) event-driven run.
Trajectory run(const SimConfig& cfg);

/// Same, with an observer invoked after each effective event.
Trajectory run(const SimConfig& cfg, const EventVisitor& visit);

/// Fraction of replicas whose window is still occupied at the horizon.
/// Replica i uses substream(cfg.seed, i); the reduction is by replica index.
McEstimate survival_probability_mc(const SimConfig& cfg, std::size_t replicas,
                                   unsigned threads = 0);

/**
 * Earliest snapshot time at which every patch in [-L, L] is simultaneously
 * empty, or nullopt if no snapshot shows a vacant center.  `window_lo` is
 * the window's first site (snapshots store occupancies from it upward).
 */
std::optional<double> vacant_zone_detector(const Trajectory& traj, int half_width,
                                           int window_lo);

/**
 * Monotone coupling of two runs that share one event stream.  Requires
 * a1 <= a2, b1 <= b2, identical N, M, K, boundary, horizon and initial
 * condition ordering xi1(0) <= xi2(0).  Candidate events are generated at
 * the pointwise maximum rate; each path accepts with probability
 * rate_i/rate_max using one shared uniform, and coupled deaths decrement
 * the dominated path with probability xi1/xi2.  Each marginal is exact.
 */
struct CoupledResult {
  Trajectory lower, upper;
  bool dominated_throughout = true;  ///< xi1 <= xi2 held at every event time
};

CoupledResult coupled_run(const SimConfig& cfg1, const SimConfig& cfg2);

/// Expands an InitialCondition into a state on the window.
MesoState make_initial_state(const SimConfig& cfg);

/// CSV serialization (long format, header "t,x,xi"; one row per site per snapshot).
std::string trajectory_csv(const Trajectory& tr, int window_lo);

}  // namespace patchcp

#endif  // PATCHCP_SIM_HPP
