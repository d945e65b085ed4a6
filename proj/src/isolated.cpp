#include "patchcp/isolated.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "patchcp/rng.hpp"

namespace patchcp {

namespace {

using Wide = __int128;

long long narrow(Wide v) {
  if (v > Wide(INT64_MAX) || v < Wide(INT64_MIN))
    throw std::overflow_error("Rational: value exceeds 64-bit range");
  return static_cast<long long>(v);
}

Rational reduce(Wide n, Wide d) {
  if (d == 0) throw std::domain_error("Rational: zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  Wide g = n < 0 ? -n : n, h = d;
  while (h != 0) {
    Wide t = g % h;
    g = h;
    h = t;
  }
  if (g == 0) g = 1;
  Rational r;
  r.num = narrow(n / g);
  r.den = narrow(d / g);
  return r;
}

}  // namespace

Rational::Rational(long long n, long long d) { *this = reduce(n, d); }

Rational Rational::operator+(const Rational& o) const {
  return reduce(Wide(num) * o.den + Wide(o.num) * den, Wide(den) * o.den);
}

Rational Rational::operator-(const Rational& o) const {
  return reduce(Wide(num) * o.den - Wide(o.num) * den, Wide(den) * o.den);
}

Rational Rational::operator*(const Rational& o) const {
  return reduce(Wide(num) * o.num, Wide(den) * o.den);
}

Rational Rational::operator/(const Rational& o) const {
  if (o.num == 0) throw std::domain_error("Rational: division by zero");
  return reduce(Wide(num) * o.den, Wide(den) * o.num);
}

double BirthDeathSpec::beta(int j) const {
  if (j <= 0 || j >= N) return 0.0;
  if (flavor == ChainFlavor::Dominating) return a / 4.0 * j;
  return a * j * (j - 1.0) * (N - j) / (static_cast<double>(N) * (N - 1));
}

BirthDeathSpec exact_chain(double a, int N) {
  if (N < 1 || a < 0.0) throw ConfigError("exact_chain: need N >= 1 and a >= 0");
  return {N, a, ChainFlavor::Exact};
}

BirthDeathSpec dominating_chain(double a, int N) {
  if (N < 1 || a < 0.0) throw ConfigError("dominating_chain: need N >= 1 and a >= 0");
  return {N, a, ChainFlavor::Dominating};
}

std::vector<double> occupation_times_exact(const BirthDeathSpec& spec) {
  const int N = spec.N;
  // Thomas elimination on the occupation-measure system over states 1..N:
  // sub-diagonal beta_{j-1}, diagonal -(beta_j + mu_j), super-diagonal
  // mu_{j+1}, right-hand side -[j = N] (the chain starts at N).
  std::vector<double> diag(N), upper(N), rhs(N, 0.0);
  for (int j = 1; j <= N; ++j) {
    diag[j - 1] = -(spec.beta(j) + spec.mu(j));
    upper[j - 1] = j < N ? spec.mu(j + 1) : 0.0;
  }
  rhs[N - 1] = -1.0;
  for (int j = 2; j <= N; ++j) {
    double w = spec.beta(j - 1) / diag[j - 2];
    diag[j - 1] -= w * upper[j - 2];
    rhs[j - 1] -= w * rhs[j - 2];
  }
  std::vector<double> tau(N);
  tau[N - 1] = rhs[N - 1] / diag[N - 1];
  for (int j = N - 1; j >= 1; --j)
    tau[j - 1] = (rhs[j - 1] - upper[j - 1] * tau[j]) / diag[j - 1];
  return tau;
}

std::vector<double> expected_visits(const BirthDeathSpec& spec) {
  std::vector<double> v = occupation_times_exact(spec);
  for (int j = 1; j <= spec.N; ++j) v[j - 1] *= spec.beta(j) + spec.mu(j);
  return v;
}

std::vector<Rational> visits_dominating_rational(const Rational& a, int N) {
  if (N < 1 || a.num < 0)
    throw ConfigError("visits_dominating_rational: need N >= 1 and a >= 0");
  const Rational q = a / Rational(4);
  std::vector<Rational> v(static_cast<std::size_t>(N));
  Rational sum(1), power(1);
  for (int j = 1; j <= N; ++j) {
    power = power * q;
    sum = sum + power;
    v[static_cast<std::size_t>(j - 1)] = sum;  // 1 + q + ... + q^j
  }
  if (N >= 2) {
    // Start at N contributes one visit; the rest arrive from N-1 with
    // probability beta_{N-1} / (beta_{N-1} + mu_{N-1}) = q(N-1) / (q(N-1)+(N-1)).
    Rational up = q * Rational(N - 1);
    v[static_cast<std::size_t>(N - 1)] =
        Rational(1) + up / (up + Rational(N - 1)) * v[static_cast<std::size_t>(N - 2)];
  } else {
    v[0] = Rational(1);
  }
  return v;
}

double weighted_occupation_bound(double a, int N) {
  if (N < 1 || a < 0.0)
    throw ConfigError("weighted_occupation_bound: need N >= 1 and a >= 0");
  double q = a / 4.0, bound = 0.0, inner = 1.0, power = 1.0;
  for (int j = 1; j <= N; ++j) {
    power *= q;
    inner += power;  // sum_{i=0..j} q^i
    bound += inner;
  }
  return bound;
}

double weighted_occupation_sum(const std::vector<double>& tau) {
  double s = 0.0;
  for (std::size_t j = 0; j < tau.size(); ++j) s += static_cast<double>(j + 1) * tau[j];
  return s;
}

ExportMean export_count_mean(double a, double b, int N) {
  if (N < 1 || a < 0.0 || b < 0.0)
    throw ConfigError("export_count_mean: need N >= 1, a >= 0, b >= 0");
  ExportMean out{0.0, 0.0};
  if (b == 0.0) return out;
  if (N >= 2) {
    std::vector<double> tau = occupation_times_exact(exact_chain(a, N));
    double s = 0.0;
    for (int j = 2; j <= N; ++j) s += j * (j - 1.0) * tau[j - 1];
    out.exact = b * s / (N - 1);
  }
  const double q = a / 4.0;
  if (std::abs(a - 4.0) < 1e-12) {
    out.closed_form = b / 2.0 * (N + 2.0) * (N + 2.0);
  } else if (a < 4.0) {
    out.closed_form = b * N / (1.0 - q);
  } else {
    out.closed_form = b / ((q - 1.0) * (q - 1.0)) * std::pow(q, N + 2);
  }
  return out;
}

CollisionBound collision_probability_bound(double M, double x_threshold) {
  if (!(M >= 1.0)) throw ConfigError("collision_probability_bound: need M >= 1");
  CollisionBound cb;
  cb.x_threshold = x_threshold > 0.0 ? x_threshold : std::cbrt(M);
  const double x = cb.x_threshold;
  double prod = 1.0;
  for (long long j = 0; j < static_cast<long long>(std::floor(x + 1e-9)); ++j)
    prod *= 1.0 - static_cast<double>(j) / (2.0 * M);
  cb.product_exact = 1.0 - prod;
  cb.birthday = 1.0 - std::pow(1.0 - x / (2.0 * M), x);
  cb.simplified = 0.5 / std::cbrt(M);
  cb.chain_ok = cb.product_exact <= cb.birthday + 1e-15 &&
                cb.birthday <= cb.simplified + 1e-15;
  return cb;
}

double survival_upper_bound(const ModelParams& p) {
  validate_params(p);
  double bound = std::cbrt(1.0 / p.M) *
                 (0.5 + export_count_mean(p.a, p.b, p.N).closed_form);
  return std::min(1.0, bound);
}

McEstimate collision_mc(const ModelParams& p, std::size_t replicas, uint64_t seed,
                        unsigned threads) {
  validate_params(p);
  if (replicas == 0) throw ConfigError("collision_mc: replicas must be >= 1");
  if (p.b == 0.0) return {0.0, 0.0};  // no exports, so never a shared target
  const int N = p.N;
  std::vector<char> hit(replicas, 0);
  parallel_for(
      replicas,
      [&](std::size_t i) {
        CounterRng rng(CounterRng::substream(seed, i));
        BirthDeathSpec chain = exact_chain(p.a, N);
        std::vector<char> used(static_cast<std::size_t>(2 * p.M), 0);
        int j = N;
        while (j > 0) {
          double death = j;
          double birth = chain.beta(j);
          double exp_rate = p.b * j * (j - 1.0) / (N - 1);
          double total = death + birth + exp_rate;
          double u = rng.next_unit() * total;
          if (u < death) {
            --j;
          } else if (u < death + birth) {
            ++j;
          } else {
            auto target = static_cast<std::size_t>(
                rng.next_below(static_cast<uint64_t>(2 * p.M)));
            if (used[target]) {
              hit[i] = 1;
              break;
            }
            used[target] = 1;
          }
        }
      },
      threads);
  std::size_t n = 0;
  for (char h : hit) n += h;
  return bernoulli_estimate(n, replicas);
}

std::string occupation_table_csv(double a, int N) {
  std::vector<double> tau = occupation_times_exact(exact_chain(a, N));
  BirthDeathSpec dom = dominating_chain(a, N);
  std::vector<double> v = expected_visits(dom);
  std::ostringstream out;
  out << "j,tau_exact,v_dominating,sigma_dominating\n";
  for (int j = 1; j <= N; ++j) {
    double sigma = v[j - 1] / (dom.beta(j) + dom.mu(j));
    out << j << ',' << format_double(tau[j - 1]) << ',' << format_double(v[j - 1])
        << ',' << format_double(sigma) << '\n';
  }
  return out.str();
}

}  // namespace patchcp
