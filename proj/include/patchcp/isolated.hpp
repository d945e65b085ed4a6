#ifndef PATCHCP_ISOLATED_HPP
#define PATCHCP_ISOLATED_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "patchcp/model.hpp"
#include "patchcp/util.hpp"

namespace patchcp {

/// Exact rational arithmetic on 64-bit numerator/denominator (128-bit
/// intermediates, always gcd-reduced, denominator positive).  Throws
/// std::overflow_error if a reduced value leaves the 64-bit range.
struct Rational {
  long long num = 0;
  long long den = 1;

  Rational() = default;
  Rational(long long n) : num(n) {}
  Rational(long long n, long long d);

  Rational operator+(const Rational& o) const;
  Rational operator-(const Rational& o) const;
  Rational operator*(const Rational& o) const;
  Rational operator/(const Rational& o) const;
  bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
  bool operator!=(const Rational& o) const { return !(*this == o); }
  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
};

enum class ChainFlavor {
  Exact,       ///< up-rate a*j*(j-1)*(N-j)/(N*(N-1))
  Dominating,  ///< up-rate (a/4)*j, truncated at N
};

/**
 * Single-patch birth-death chain on {0,...,N} with per-individual death rate
 * 1 (down-rate j) and one of two up-rate flavors.  State 0 is absorbing and
 * up-transitions stop at N, so beta(0) = beta(N) = 0 in both flavors.
 */
struct BirthDeathSpec {
  int N = 2;
  double a = 0.0;
  ChainFlavor flavor = ChainFlavor::Exact;

  double beta(int j) const;
  double mu(int j) const { return j; }
};

BirthDeathSpec exact_chain(double a, int N);
BirthDeathSpec dominating_chain(double a, int N);

/**
 * Expected time spent in each state j = 1..N (index j-1) before absorption,
 * started from N, via the tridiagonal occupation-measure system
 * beta_{j-1} tau_{j-1} - (beta_j + mu_j) tau_j + mu_{j+1} tau_{j+1} = -[j = N].
 */
std::vector<double> occupation_times_exact(const BirthDeathSpec& spec);

/// Expected number of visits to each state, v_j = tau_j * (beta_j + mu_j).
std::vector<double> expected_visits(const BirthDeathSpec& spec);

/**
 * Expected visits of the dominating chain started from N in exact rational
 * arithmetic: v_j = 1 + q + ... + q^j for j < N with q = a/4, and
 * v_N = 1 + beta_{N-1} (beta_{N-1} + mu_{N-1})^{-1} v_{N-1} (the extra visit
 * is the start at N).
 */
std::vector<Rational> visits_dominating_rational(const Rational& a, int N);

/// Closed-form upper bound on sum_j j*tau_j: sum_{j=1..N} sum_{i=0..j} (a/4)^i.
double weighted_occupation_bound(double a, int N);

/// sum_j j * tau_j for a computed occupation-time vector.
double weighted_occupation_sum(const std::vector<double>& tau);

struct ExportMean {
  double exact;        ///< (b/(N-1)) * sum_{j>=2} j(j-1) tau_j from the exact chain
  double closed_form;  ///< three-branch bound: bN/(1-a/4), (b/2)(N+2)^2, b(a/4-1)^{-2}(a/4)^{N+2}
};

/// Mean number of offspring a fully occupied patch sends outside before it
/// dies out, with the matching closed-form upper bound.
ExportMean export_count_mean(double a, double b, int N);

struct CollisionBound {
  double x_threshold;    ///< export-count threshold (default M^{1/3})
  double product_exact;  ///< 1 - prod_{j<x} (1 - j/2M)
  double birthday;       ///< 1 - (1 - x/2M)^x
  double simplified;     ///< (1/2) M^{-1/3}
  bool chain_ok;         ///< product_exact <= birthday <= simplified held numerically
};

CollisionBound collision_probability_bound(double M, double x_threshold = -1.0);

/**
 * Upper bound on the survival probability starting from one fully occupied
 * patch: min(1, M^{-1/3} (1/2 + export closed-form bound)).
 */
double survival_upper_bound(const ModelParams& p);

/**
 * Monte Carlo estimate of the probability that two offspring exported from a
 * single occupied source patch land on the same target patch.  Exported
 * individuals do not feed back (singleton patches cannot reproduce before a
 * collision), so the source runs the exact single-patch chain and exports at
 * rate b j(j-1)/(N-1), each export choosing one of the 2M neighbors uniformly.
 */
McEstimate collision_mc(const ModelParams& p, std::size_t replicas, uint64_t seed,
                        unsigned threads = 0);

/// CSV table "j,tau_exact,v_dominating,sigma_dominating" for j = 1..N.
std::string occupation_table_csv(double a, int N);

}  // namespace patchcp

#endif  // PATCHCP_ISOLATED_HPP
