#ifndef PATCHCP_MEANFIELD_HPP
#define PATCHCP_MEANFIELD_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "patchcp/model.hpp"

namespace patchcp {

/**
 * Density profile on a finite window of patches.  Sites outside the window
 * read a constant per the boundary policy: 0 (Lower) or 1 (Upper), so the
 * truncated flow brackets the untruncated one from below resp. above.
 */
struct Profile {
  int lo = 0, hi = 0;
  std::vector<double> u;  ///< densities for sites lo..hi, each in [0,1]
  BoundaryPolicy boundary = BoundaryPolicy::Lower;
  double time = 0.0;

  Profile() = default;
  Profile(int lo_, int hi_, BoundaryPolicy pol);

  int size() const { return hi - lo + 1; }
  bool in_window(int x) const { return x >= lo && x <= hi; }

  /// Density at x, with ghost reads outside the window.
  double value(int x) const {
    if (!in_window(x)) return boundary == BoundaryPolicy::Upper ? 1.0 : 0.0;
    return u[static_cast<std::size_t>(x - lo)];
  }
  double& at(int x) { return u[static_cast<std::size_t>(x - lo)]; }
};

/// Constant profile on [-K, K].
Profile constant_profile(int K, double level, BoundaryPolicy pol);
/// Step profile level*1(x <= 0) on [-K, K].
Profile step_profile(int K, double level, BoundaryPolicy pol);
/// Two-level step hi_level*1(x < 0) + lo_level*1(x >= 0) on [-K, K].
Profile two_level_profile(int K, double hi_level, double lo_level, BoundaryPolicy pol);

enum class Stability { Stable, Unstable, Semistable };

struct EquilibriumPoint {
  double value = 0.0;
  Stability stability = Stability::Stable;
};

/**
 * Equilibria of the spatially constant flow u' = r u^2 (1-u) - u.
 * r < 4: only 0.  r = 4: {0, 1/2} with 1/2 semistable.  r > 4: {0, u-, u+}
 * with u± = 1/2 ± sqrt(1/4 - 1/r); 0 and u+ stable, u- unstable;
 * 0 < u- < 1/2 < u+ < 1 and u- + u+ = 1.
 */
struct Equilibria {
  double r = 0.0;
  std::vector<EquilibriumPoint> roots;  ///< ascending by value
};

Equilibria equilibria(double r);

/// Scalar drift r u^2 (1-u) - u.
double scalar_rhs(double r, double u);

/// Componentwise time derivative of the profile:
/// u_x' = (a u_x^2 + (b/2M) sum_{0<|m|<=M} u_{x+m}^2)(1 - u_x) - u_x.
std::vector<double> rhs(const ModelParams& p, const Profile& prof);

/**
 * One accepted integrator step endpoint: time, state, and derivative there.
 * Consecutive StepPoints define a cubic Hermite interpolant (see
 * hermite_component) used for dense output and crossing location.
 */
struct StepPoint {
  double t = 0.0;
  std::vector<double> u, du;
};

/// Cubic Hermite evaluation of component i at time t in [a.t, b.t].
double hermite_component(const StepPoint& a, const StepPoint& b, std::size_t i, double t);

/// Called after every accepted step with the step's endpoints; return false
/// to stop the integration early (the result is then the state at b).
using StepObserver = std::function<bool(const StepPoint& a, const StepPoint& b)>;

/**
 * Adaptive Dormand-Prince 4/5 flow of the truncated system up to t_end.
 * Error control uses the max norm with scale tol + tol*|u| per component
 * (max-norm keeps the step sequence invariant under translations of the
 * window).  The returned profile is clamped to [0,1]; internal states can
 * exceed the range only within integrator tolerance.  Throws on step-size
 * underflow (not expected: the right side is a bounded polynomial).
 */
Profile integrate(const ModelParams& p, const Profile& prof0, double t_end,
                  double tol = 1e-9);
Profile integrate(const ModelParams& p, const Profile& prof0, double t_end, double tol,
                  const StepObserver& observe);

/**
 * Truncation study: the same compactly supported initial data is flowed on a
 * ladder of window radii under both boundary policies, and sup-norm
 * differences between consecutive radii are measured on the core window
 * (the support window of `core0`).  Lower-policy flows increase with the
 * radius and upper-policy flows decrease, so the pair brackets the
 * untruncated flow.
 */
struct TruncationLadder {
  std::vector<int> radii;
  std::vector<double> lower_diffs, upper_diffs;  ///< size radii.size()-1
  bool lower_nondecreasing = true;  ///< in radius, pointwise on core, 10*tol slack
  bool upper_nonincreasing = true;
  std::vector<Profile> lower_flows, upper_flows;  ///< final profiles per radius
};

TruncationLadder truncation_error_ladder(const ModelParams& p, const Profile& core0,
                                         const std::vector<int>& radii, double t_end,
                                         double tol = 1e-9);

/// Monotone nonincreasing in x within 1e-9.
bool is_wave_front(const Profile& prof);

/// Integrates prof (which must be a wave front) to t_end and reports whether
/// every accepted step endpoint is still a wave front (1e-9 tolerance).
bool front_preserved(const ModelParams& p, const Profile& prof, double t_end,
                     double tol = 1e-9);

enum class CertificateKind { Expansion, Retreat };

/**
 * Evidence that the front of the mean-field flow moves outward (expansion:
 * starting from level*1(x <= 0) the density at site +1 reaches the level) or
 * inward (retreat: starting from upper_level*1(x < 0) + level*1(x >= 0) the
 * density at site -1 falls to the lower level).  Retreat at r < 4 holds by
 * definition (no positive equilibrium); such certificates are axiomatic.
 */
struct FrontCertificate {
  CertificateKind kind = CertificateKind::Expansion;
  double level = 0.0;        ///< expansion level u, or retreat lower level u_*
  double upper_level = 0.0;  ///< retreat upper level u^*; unset for expansion
  double t0 = 0.0;           ///< first crossing time (bisected to 1e-10)
  ModelParams params;
  bool axiomatic = false;
};

/**
 * Searches a grid of levels strictly inside (u-, u+) (33 evenly spaced by
 * default, tried middle-outward) for one whose step initial condition
 * level*1(x <= 0) reaches the level at site +1 before the horizon.  The flow
 * uses the Lower policy on a window of radius L + ceil(c*horizon) + 2M with
 * c from spread_rate_bound at gamma = 1, so the (suppressing) boundary makes
 * the detection conservative.  Returns nullopt when r <= 4 or when no grid
 * level crosses (inconclusive, not a disproof).
 */
std::optional<FrontCertificate> detect_expansion(const ModelParams& p,
                                                 std::vector<double> levels, int L,
                                                 double horizon, double tol = 1e-9);

/**
 * Searches grid pairs u_* < u- <= u+ < u^* (3x3 by default) for a two-level
 * step u^**1(x < 0) + u_**1(x >= 0) whose density at site -1 falls to u_*
 * before the horizon, under the Upper policy (pinned-full boundaries make
 * the detection conservative).  r < 4 returns an axiomatic certificate;
 * r = 4 uses u- = u+ = 1/2.  Returns nullopt when inconclusive.
 */
std::optional<FrontCertificate> detect_retreat(const ModelParams& p,
                                               std::vector<double> lower_levels,
                                               std::vector<double> upper_levels,
                                               double horizon, double tol = 1e-9);

/**
 * Deterministic bound on the spread rate of the influence cone: the minimal
 * c on the grid with theta*c - ell(theta) >= gamma, where
 * ell(theta) = a + (2M)^{-1} sum_{0<|m|<=M} b e^{theta m} - 1
 * is the exponential growth rate of the moment generating function of the
 * dual's spatial extent.  b = 0 collapses the cone to a point: c = 0.
 */
double spread_rate_bound(const ModelParams& p, const std::vector<double>& theta_grid,
                         double gamma);
double spread_rate_bound(const ModelParams& p, double gamma = 1.0);

/**
 * Empirical front speed: least-squares slope of the rightmost level-crossing
 * position against time over the second half of the horizon, starting from
 * u+ * 1(x <= 0).  Requires r > 4 and u- < level < u+ (throws ConfigError
 * otherwise).
 */
double front_speed_estimate(const ModelParams& p, double level, double horizon,
                            double tol = 1e-9);

/// Planar drift F(u, v) = (a u^2 + (b/2) v^2)(1 - u) - u of the two-patch
/// system u' = F(u, v), v' = F(v, u).
double two_patch_rhs(const ModelParams& p, double u, double v);

/// Equilibria of the diagonal flow: F(u, u) = -rt * u (u - u-)(u - u+) with
/// rt = a + b/2, so the roots are those of equilibria(a + b/2).
Equilibria two_patch_equilibria(const ModelParams& p);

struct TwoPatchPoint {
  double t = 0.0, u = 0.0, v = 0.0;
};

/// Numerical solution of the planar system, sampled at accepted steps
/// (first and last points are exactly t = 0 and t = t_end).
std::vector<TwoPatchPoint> two_patch_flow(const ModelParams& p, double u0, double v0,
                                          double t_end, double tol = 1e-9);

/// CSV serialization (header "x,u").
std::string profile_csv(const Profile& prof);

}  // namespace patchcp

#endif  // PATCHCP_MEANFIELD_HPP
