#ifndef PATCHCP_DUAL_HPP
#define PATCHCP_DUAL_HPP

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "patchcp/meanfield.hpp"
#include "patchcp/model.hpp"
#include "patchcp/rng.hpp"
#include "patchcp/util.hpp"

namespace patchcp {

/**
 * One point of the influence set.  Personal labels are unique positive
 * integers never reused; a branching event carries a generation number
 * shared by exactly its two children, and generations increase with event
 * time, so generation(parent's creation) < generation(child).  Location
 * labels exist only in the bucketed dual (N > 0): marks are grouped into the
 * N intervals [j/N, (j+1)/N) via floor(mark*N), and points sharing a live
 * (site, bucket) cell share a location label.
 */
struct DualPoint {
  int site = 0;
  double mark = 0.0;
  int label = 0;           ///< personal label (index+1 into InfluenceSet::points)
  int generation = 0;      ///< branching event that created it; 0 for roots
  int parent_label = 0;    ///< 0 for roots
  int location_label = 0;  ///< 0 in the limiting dual
  bool alive = false;      ///< live at the run's end time
};

struct BranchRecord {
  double t = 0.0;
  int parent_label = 0;
  int generation = 0;       ///< unique per branching; shared by the two children
  int child1 = 0, child2 = 0;
};

struct DeathRecord {
  double t = 0.0;
  std::vector<int> removed;  ///< personal labels removed together
};

/// Starting condition of a dual run: one point at `site` (or two independent
/// ones when `pair`), with explicit mark(s) or marks drawn uniformly.
struct DualStart {
  int site = 0;
  std::optional<double> mark;   ///< root mark; drawn when absent
  std::optional<double> mark2;  ///< second root's mark (pair starts)
  bool pair = false;
};

/**
 * Full record of one dual path: every point ever created (indexed by
 * personal label), the time-ordered branching/death log, and — for the
 * bucketed dual — the first collision time (a new point landing in a live
 * point's (site, bucket) cell).  `truncated` marks paths that hit the
 * live-point cap; statistics must discard such paths.
 */
struct InfluenceSet {
  std::vector<DualPoint> points;       ///< points[l-1] has personal label l
  std::vector<int> roots;              ///< labels of the initial point(s)
  std::vector<BranchRecord> branches;  ///< time-ordered, generations increasing
  std::vector<DeathRecord> deaths;     ///< time-ordered
  double t_end = 0.0;
  int bucket_count = 0;  ///< N of the bucketed dual; 0 for the limiting dual
  bool collided = false;
  double collision_time = std::numeric_limits<double>::infinity();
  bool truncated = false;

  std::vector<int> live_labels() const;
  std::size_t live_count() const;
};

inline constexpr std::size_t kDualPointCap = 1000000;

/**
 * Influence-set path: every live point independently branches at rate a
 * (pair of fresh-marked points at its own site), at rate b/2M per offset
 * 0 < |m| <= M (pair at the offset site), and dies at rate 1.  Each point
 * consumes its own deterministic substream of `seed` keyed by its personal
 * label, so paths are reproducible and label-aligned across variants.
 */
InfluenceSet simulate_limiting_dual(const ModelParams& p, const DualStart& start,
                                    double t_end, uint64_t seed,
                                    std::size_t cap = kDualPointCap);

/**
 * Bucketed dual driven by the same per-label streams as
 * simulate_limiting_dual(seed): identical branchings and marks, with marks
 * bucketed by floor(mark*N) to assign location labels.  A death event in the
 * stream of a location label's first holder removes every point sharing the
 * label (death draws in later holders' streams are null), so each location
 * label dies at rate exactly 1.  Until the first collision every label has
 * one holder and the path is identical to the limiting dual's.
 * `stop_at_collision` ends the run at the collision time (for collision-time
 * statistics).
 */
InfluenceSet simulate_n_dual(const ModelParams& p, int N, const DualStart& start,
                             double t_end, uint64_t seed,
                             std::size_t cap = kDualPointCap,
                             bool stop_at_collision = false);

/**
 * Exponential growth rate of E[sum over live points of e^{theta*(site-x0)}]:
 * each branching adds two points, so the rate is
 * 2a + (2b/2M) * sum_{0<|m|<=M} e^{theta m} - 1.
 */
double influence_moment_rate(const ModelParams& p, double theta);

/// sum over live points of e^{theta*(site-origin)} (0 for empty sets).
double spatial_moment(const InfluenceSet& iset, double theta, int origin);

/**
 * Active-label resolution against a target density profile: a live point's
 * label is active when its mark is at most the profile density at its site
 * (sites outside the profile's window read the boundary fill); when both
 * children of one branching are active, the parent's label becomes active.
 * One pass over branchings in decreasing generation order reaches the fixed
 * point.  Returns (and stores) whether every root label is active.
 */
struct ActiveLabelQuery {
  Profile u;
  std::vector<char> active;  ///< by personal label after resolution (index l)
  bool root_active = false;
};

bool resolve_active(ActiveLabelQuery& q, const InfluenceSet& iset);

/**
 * Monte Carlo estimate of the probability that a single dual point started
 * at x is root-active against u after time t.  Sampled lazily: subtrees are
 * explored only while they can still decide the root (children of a
 * branching are independent, so AND/OR short-circuiting preserves the law);
 * no path cap is needed.  Replica i uses substream(seed, i).
 */
McEstimate phi_mc(const ModelParams& p, const Profile& u, int x, double t,
                  std::size_t replicas, uint64_t seed, unsigned threads = 0);

/// Pair-start variant: two independent points at x, both roots active.
McEstimate phi2_mc(const ModelParams& p, const Profile& u, int x, double t,
                   std::size_t replicas, uint64_t seed, unsigned threads = 0);

/// Same estimate as phi_mc but via materialized paths and resolve_active
/// (cross-check of the lazy sampler; replicas hitting the cap are discarded).
McEstimate phi_mc_materialized(const ModelParams& p, const Profile& u, int x, double t,
                               std::size_t replicas, uint64_t seed,
                               unsigned threads = 0);

/**
 * Pathwise duality gate on a small instance: builds one graphical
 * representation (Poisson birth triples and deaths) for `patches` patches of
 * capacity p.N (p.N <= 3, patches <= 3), runs the individual-level process
 * forward from a seed-drawn initial configuration and the set-of-sets dual
 * backward from every (location, t), and verifies that the state at a
 * location at time t matches the dual requirement against the forward state
 * at t-s for every s in [0, t] (checked at segment midpoints, which covers
 * all s since both sides are piecewise constant).  Must always return true.
 */
bool duality_check_exact(const ModelParams& p, int patches, double t, uint64_t seed);

/**
 * Forward/dual agreement at one site: forward-simulates the patch chain from
 * a product-binomial initial law (each individual independently occupied
 * with probability u0 at its site) and compares the density at x and time t
 * with the bucketed-dual estimate of the same quantity.  `deviation_freq` is
 * the fraction of forward replicas deviating from the dual estimate by more
 * than epsilon; `chebyshev_bound` is 2*eps^-2*P(collision by t) with the
 * collision probability estimated on the same dual replicas.  With
 * `use_limiting_dual` the estimate comes from phi_mc instead and
 * `collision_prob` doubles as the substitution's correction term.
 */
struct AgreementReport {
  McEstimate forward;        ///< MC of the forward density at (x, t)
  McEstimate dual;           ///< dual estimate of the same quantity
  double deviation = 0.0;    ///< |forward.mean - dual.mean|
  double epsilon = 0.0;
  double deviation_freq = 0.0;
  double chebyshev_bound = 0.0;
  McEstimate collision_prob;  ///< P(collision time <= t)
  bool used_limiting_dual = false;
};

AgreementReport occupation_agreement_mc(const ModelParams& p, int N, const Profile& u0,
                                        int x, double t,
                                        std::size_t forward_replicas,
                                        std::size_t dual_replicas, double epsilon,
                                        uint64_t seed, bool use_limiting_dual = false,
                                        unsigned threads = 0);

/// Event-log export, one JSON object per line ({t, kind, labels, sites, marks}).
std::string event_log_jsonl(const InfluenceSet& iset);

}  // namespace patchcp

#endif  // PATCHCP_DUAL_HPP
