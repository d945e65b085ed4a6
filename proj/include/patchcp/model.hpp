#ifndef PATCHCP_MODEL_HPP
#define PATCHCP_MODEL_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace patchcp {

/**
 * Parameters of the patch process with pair births.
 *
 * Each lattice site ("patch") holds between 0 and N individuals.  Every
 * individual dies at rate 1.  An ordered pair of distinct individuals in the
 * same patch produces offspring into its own patch, or into a patch at
 * distance 1..M, scaled by the vacancy fraction of the receiving patch:
 *   inner birth rate  a * k(k-1)(N-k) / (N(N-1))
 *   outer birth rate  (b/2M) * k_src(k_src-1)(N-k_tgt) / (N(N-1))
 * The combined fecundity r = a + b controls the mean-field phase structure.
 */
struct ModelParams {
  double a = 0.0;  ///< within-patch pair birth rate
  double b = 0.0;  ///< dispersing pair birth rate (split over 2M neighbors)
  int N = 2;       ///< patch capacity, at least 2
  int M = 1;       ///< dispersal range, at least 1

  double r() const { return a + b; }
};

/// Reads outside a finite window: vacant ghosts (lower) or full ghosts (upper).
enum class BoundaryPolicy { Lower, Upper };

/// Elementary transitions of the patch chain.
enum class EventKind { Death, InnerBirth, OuterBirth };

struct Event {
  EventKind kind;
  int source;  ///< patch whose occupants act (equals target for Death/InnerBirth)
  int target;  ///< patch whose occupancy changes
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A hard resource limit was hit (enumeration too large, point cap reached).
struct ResourceCapError : std::runtime_error {
  explicit ResourceCapError(const std::string& what) : std::runtime_error(what) {}
};

/// Throws ConfigError unless a,b >= 0 (finite), N >= 2, M >= 1.
void validate_params(const ModelParams& p);

/**
 * Occupancy state on a contiguous window of sites with a boundary policy.
 * Sites outside the window read 0 under Lower and N under Upper; they are
 * never written.  Under Upper, ghost sites act as permanently full birth
 * sources into the window; under Lower all events involving outside sites
 * are suppressed.  The common case is the symmetric window {-K, ..., K}.
 */
class MesoState {
 public:
  MesoState() = default;
  /// Symmetric window {-K, ..., K}.
  MesoState(const ModelParams& p, int K, BoundaryPolicy policy);
  /// General window {lo, ..., hi}.
  MesoState(const ModelParams& p, int lo, int hi, BoundaryPolicy policy);

  int lo() const { return lo_; }
  int hi() const { return hi_; }
  int K() const { return hi_; }  ///< radius when the window is symmetric
  BoundaryPolicy policy() const { return policy_; }
  const ModelParams& params() const { return params_; }
  double time() const { return time_; }
  void set_time(double t) { time_ = t; }

  bool in_window(int x) const { return x >= lo_ && x <= hi_; }

  /// Occupancy at x, including ghost reads outside the window.
  int occupancy(int x) const {
    if (!in_window(x)) return policy_ == BoundaryPolicy::Upper ? params_.N : 0;
    return xi_[static_cast<size_t>(x - lo_)];
  }

  /// Sets occupancy at an in-window site (0 <= v <= N).
  void set_occupancy(int x, int v);

  /// Applies one event (births increment the target, deaths decrement it).
  void apply(const Event& e);

  /// Total number of individuals in the window.
  long long population() const;

  const std::vector<int>& raw() const { return xi_; }

 private:
  ModelParams params_;
  int lo_ = 0;
  int hi_ = 0;
  BoundaryPolicy policy_ = BoundaryPolicy::Lower;
  double time_ = 0.0;
  std::vector<int> xi_;
};

/// Death rate of a patch at occupancy k (= k).
double death_rate(const ModelParams& p, int k);

/// Within-patch birth rate a*k(k-1)(N-k)/(N(N-1)) at occupancy k.
double inner_birth_rate(const ModelParams& p, int k);

/// Birth rate (b/2M)*k_src(k_src-1)(N-k_tgt)/(N(N-1)) from one patch into another.
double outer_birth_rate(const ModelParams& p, int k_source, int k_target);

/// State-based forms; sites may be ghost reads where noted.
double death_rate(const MesoState& s, int x);                    // x in window
double inner_birth_rate(const MesoState& s, int x);              // x in window
/// Source y may be a boundary ghost. Throws ConfigError if x == y or |x-y| > M.
double outer_birth_rate(const MesoState& s, int y, int x);

/**
 * Exact per-event rate table of a windowed state: every event with positive
 * rate, including (under the Upper policy) births from ghost sources into
 * boundary-adjacent sites, reported with source = the ghost site.
 */
struct RateTable {
  std::vector<std::pair<Event, double>> entries;
  double total = 0.0;
};

RateTable rate_table(const MesoState& s);

/// Sum of all event rates of the state (equals rate_table(s).total).
double total_rate(const MesoState& s);

}  // namespace patchcp

#endif  // PATCHCP_MODEL_HPP
