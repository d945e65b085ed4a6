#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "patchcp/isolated.hpp"
#include "patchcp/rng.hpp"
#include "patchcp/sim.hpp"
#include "patchcp/util.hpp"

using namespace patchcp;

namespace {

// P(absorbed at 0 by time t | start at N) for a birth-death chain, via RK4 on
// the backward equations p_j' = beta_j (p_{j+1} - p_j) + mu_j (p_{j-1} - p_j)
// with p_0 held at 1.
std::vector<double> absorption_cdf(const BirthDeathSpec& spec,
                                   const std::vector<double>& times) {
  const int N = spec.N;
  std::vector<double> p(static_cast<std::size_t>(N) + 1, 0.0);
  p[0] = 1.0;
  auto deriv = [&](const std::vector<double>& y, std::vector<double>& dy) {
    dy[0] = 0.0;
    for (int j = 1; j <= N; ++j) {
      double up = j < N ? spec.beta(j) * (y[j + 1] - y[j]) : 0.0;
      dy[j] = up + spec.mu(j) * (y[j - 1] - y[j]);
    }
  };
  std::vector<double> out;
  std::vector<double> k1(p.size()), k2(p.size()), k3(p.size()), k4(p.size()), tmp(p.size());
  double t = 0.0;
  const double dt = 1e-4;
  for (double target : times) {
    while (t < target - 1e-12) {
      double h = std::min(dt, target - t);
      deriv(p, k1);
      for (std::size_t i = 0; i < p.size(); ++i) tmp[i] = p[i] + 0.5 * h * k1[i];
      deriv(tmp, k2);
      for (std::size_t i = 0; i < p.size(); ++i) tmp[i] = p[i] + 0.5 * h * k2[i];
      deriv(tmp, k3);
      for (std::size_t i = 0; i < p.size(); ++i) tmp[i] = p[i] + h * k3[i];
      deriv(tmp, k4);
      for (std::size_t i = 0; i < p.size(); ++i)
        p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      t += h;
    }
    out.push_back(p[static_cast<std::size_t>(N)]);
  }
  return out;
}

}  // namespace

TEST_CASE("rational arithmetic reduces, normalizes, and overflows loudly") {
  CHECK(Rational(2, 4) == Rational(1, 2));
  CHECK(Rational(1, -2) == Rational(-1, 2));
  CHECK(Rational(0, 7) == Rational(0));
  CHECK(Rational(1, 2) + Rational(1, 3) == Rational(5, 6));
  CHECK(Rational(1, 2) - Rational(1, 3) == Rational(1, 6));
  CHECK(Rational(2, 3) * Rational(9, 4) == Rational(3, 2));
  CHECK(Rational(2, 3) / Rational(4, 3) == Rational(1, 2));
  CHECK(Rational(7, 3).to_double() == doctest::Approx(7.0 / 3.0).epsilon(1e-16));
  CHECK(Rational(3, 6) != Rational(2, 6));

  Rational big(1LL << 62);
  CHECK_THROWS_AS(big + big, std::overflow_error);
  CHECK_THROWS_AS(big * Rational(4), std::overflow_error);
}

TEST_CASE("chain specs expose the intended rates") {
  BirthDeathSpec ex = exact_chain(3.0, 5);
  CHECK(ex.beta(0) == 0.0);
  CHECK(ex.beta(1) == 0.0);  // a lone individual cannot pair up
  CHECK(ex.beta(5) == 0.0);  // full patch has no vacancy
  CHECK(ex.beta(3) == doctest::Approx(3.0 * 3.0 * 2.0 * 2.0 / 20.0).epsilon(1e-15));
  CHECK(ex.mu(4) == 4.0);

  BirthDeathSpec dom = dominating_chain(3.0, 5);
  CHECK(dom.beta(0) == 0.0);
  CHECK(dom.beta(5) == 0.0);
  CHECK(dom.beta(2) == doctest::Approx(1.5).epsilon(1e-15));  // (a/4) j
  // the dominating chain bounds the exact one rate-for-rate
  for (int j = 0; j <= 5; ++j) CHECK(dom.beta(j) >= ex.beta(j) - 1e-15);
}

TEST_CASE("pure-death occupation times are the reciprocals") {
  for (int N : {1, 3, 6}) {
    std::vector<double> tau = occupation_times_exact(exact_chain(0.0, N));
    REQUIRE(tau.size() == static_cast<std::size_t>(N));
    for (int j = 1; j <= N; ++j)
      CHECK(tau[j - 1] == doctest::Approx(1.0 / j).epsilon(1e-14));
    CHECK(weighted_occupation_sum(tau) == doctest::Approx(N).epsilon(1e-14));
    CHECK(weighted_occupation_bound(0.0, N) == doctest::Approx(N).epsilon(1e-15));
    // on the way down every state is visited exactly once
    for (double v : expected_visits(exact_chain(0.0, N)))
      CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("dominating-chain visits in exact arithmetic") {
  // q = 1/2: geometric partial sums, and the top state's extra return term
  std::vector<Rational> v = visits_dominating_rational(Rational(2), 3);
  REQUIRE(v.size() == 3);
  CHECK(v[0] == Rational(3, 2));
  CHECK(v[1] == Rational(7, 4));
  CHECK(v[2] == Rational(19, 12));

  // q = 1: interior visits are j + 1, the top is 1 + N/2
  std::vector<Rational> u = visits_dominating_rational(Rational(4), 4);
  CHECK(u[0] == Rational(2));
  CHECK(u[1] == Rational(3));
  CHECK(u[2] == Rational(4));
  CHECK(u[3] == Rational(3));

  // interior recursion v_j = (1+q) v_{j-1} - q v_{j-2} holds exactly
  Rational a(1);
  Rational q = a / Rational(4);
  std::vector<Rational> w = visits_dominating_rational(a, 6);
  for (int j = 2; j <= 4; ++j)
    CHECK(w[j] == (Rational(1) + q) * w[j - 1] - q * w[j - 2]);

  // The tridiagonal solve returns the true expected visit counts, which have
  // their own closed form via first-return probabilities: the embedded jump
  // chain moves up with probability q/(1+q) at every interior state, so
  // gambler's ruin gives escape probability 1/((1+q) S_{j-1}) from state j
  // and 1/S_{N-1} from the top, with S_k = 1 + q + ... + q^k.  The geometric
  // values above are a conservative elementwise lower bound on these (their
  // recursion keeps the interior up/down ratio at the top state), equal at
  // the bottom state and for a = 0.
  for (double av : {0.0, 1.0, 2.0, 4.0, 6.0}) {
    for (int N : {3, 5, 10}) {
      std::vector<Rational> vr = visits_dominating_rational(
          Rational(static_cast<long long>(av)), N);
      std::vector<double> vd = expected_visits(dominating_chain(av, N));
      REQUIRE(vr.size() == vd.size());
      double qd = av / 4.0;
      std::vector<double> S(static_cast<std::size_t>(N), 1.0);
      for (int k = 1; k < N; ++k)
        S[static_cast<std::size_t>(k)] =
            S[static_cast<std::size_t>(k - 1)] + std::pow(qd, k);
      for (int j = 1; j < N; ++j)
        CHECK(vd[static_cast<std::size_t>(j - 1)] ==
              doctest::Approx((1.0 + qd) * S[static_cast<std::size_t>(j - 1)])
                  .epsilon(1e-10));
      CHECK(vd[static_cast<std::size_t>(N - 1)] ==
            doctest::Approx(S[static_cast<std::size_t>(N - 1)]).epsilon(1e-10));
      CHECK(vr[0].to_double() == doctest::Approx(vd[0]).epsilon(1e-12));
      for (std::size_t i = 0; i < vd.size(); ++i) {
        CHECK(vr[i].to_double() <= vd[i] + 1e-12);
        if (av == 0.0) CHECK(vr[i] == Rational(1));
      }
    }
  }
}

TEST_CASE("occupation bound chain: exact <= dominating <= closed form") {
  for (double a : {1.0, 2.0, 4.0, 6.0}) {
    for (int N : {3, 5, 10}) {
      double exact = weighted_occupation_sum(occupation_times_exact(exact_chain(a, N)));
      double dom = weighted_occupation_sum(occupation_times_exact(dominating_chain(a, N)));
      double bound = weighted_occupation_bound(a, N);
      CHECK(exact <= dom + 1e-9);
      CHECK(dom <= bound + 1e-9);
    }
  }
  // closed forms: a = 2, N = 3 gives 1.5 + 1.75 + 1.875; a = 4 gives N(N+3)/2
  CHECK(weighted_occupation_bound(2.0, 3) == 5.125);
  CHECK(weighted_occupation_bound(4.0, 4) == doctest::Approx(14.0).epsilon(1e-15));
}

TEST_CASE("export means: reference chains solved by hand") {
  // N = 2: no pair can form below the top state, so the source spends
  // Exp(2) time at 2 exporting at rate 2b: mean b
  ExportMean two = export_count_mean(3.7, 1.3, 2);
  CHECK(two.exact == doctest::Approx(1.3).epsilon(1e-12));

  // N = 3, a = 3: tau = (1, 1/2, 1/2), so the mean is (b/2)(2*1/2 + 6*1/2)
  ExportMean three = export_count_mean(3.0, 1.5, 3);
  CHECK(three.exact == doctest::Approx(3.0).epsilon(1e-12));

  // closed-form branches
  CHECK(export_count_mean(2.0, 1.0, 5).closed_form == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(export_count_mean(4.0, 1.0, 4).closed_form == doctest::Approx(18.0).epsilon(1e-15));
  CHECK(export_count_mean(6.0, 1.0, 5).closed_form == 68.34375);

  // the closed form really is an upper bound
  for (double a : {0.5, 2.0, 4.0, 6.0})
    for (int N : {2, 4, 8}) {
      ExportMean em = export_count_mean(a, 0.7, N);
      CHECK(em.exact <= em.closed_form + 1e-9);
    }

  ExportMean none = export_count_mean(5.0, 0.0, 6);
  CHECK(none.exact == 0.0);
  CHECK(none.closed_form == 0.0);
}

TEST_CASE("collision probability bounds") {
  CollisionBound cb = collision_probability_bound(1e6);
  CHECK(cb.x_threshold == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(cb.simplified == doctest::Approx(0.005).epsilon(1e-12));
  CHECK(cb.chain_ok);
  CHECK(cb.product_exact <= cb.birthday + 1e-15);
  CHECK(cb.birthday <= cb.simplified + 1e-15);

  CollisionBound small = collision_probability_bound(1e3);
  CHECK(small.birthday ==
        doctest::Approx(1.0 - std::pow(1.0 - 10.0 / 2000.0, 10.0)).epsilon(1e-12));

  double prev = 1.0;
  for (double M : {1e3, 1e6, 1e9}) {
    CollisionBound b = collision_probability_bound(M);
    CHECK(b.chain_ok);
    CHECK(b.birthday < prev);
    prev = b.birthday;
  }
}

TEST_CASE("survival upper bound: closed values, floors, and range monotonicity") {
  CHECK(survival_upper_bound(ModelParams{2.0, 1.0, 5, 1000000}) ==
        doctest::Approx(0.105).epsilon(1e-12));
  CHECK(survival_upper_bound(ModelParams{4.0, 1.0, 4, 1000000000}) ==
        doctest::Approx(0.0185).epsilon(1e-12));
  // a huge export bound clips at 1
  CHECK(survival_upper_bound(ModelParams{2.0, 400.0, 5, 8}) == 1.0);

  double prev = 2.0;
  for (int M : {1000, 1000000, 1000000000}) {
    double s = survival_upper_bound(ModelParams{2.0, 1.0, 5, M});
    CHECK(s < prev);
    prev = s;
  }
}

TEST_CASE("collision sampling: degenerate and hand-solved cases") {
  McEstimate none = collision_mc(ModelParams{2.0, 0.0, 5, 1000}, 100, 1);
  CHECK(none.mean == 0.0);
  CHECK(none.se == 0.0);

  // N = 2, M = 1, b = 1: the export count is geometric(1/2) and two targets
  // exist, so P(collision) = P(X=2)/2 + P(X>=3) = 3/16
  McEstimate tiny = collision_mc(ModelParams{3.0, 1.0, 2, 1}, 40000, 5);
  CHECK(std::abs(tiny.mean - 3.0 / 16.0) <= 3.0 * tiny.se);

  // more room to land means fewer collisions
  McEstimate near = collision_mc(ModelParams{2.0, 1.0, 5, 100}, 20000, 7);
  McEstimate far = collision_mc(ModelParams{2.0, 1.0, 5, 10000}, 20000, 7);
  CHECK(far.mean < near.mean);
  CHECK(near.mean <= 1.0);
  CHECK(near.mean >= 0.0);
}

TEST_CASE("occupation table serializes one row per state") {
  std::string csv = occupation_table_csv(2.0, 3);
  std::istringstream in(csv);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "j,tau_exact,v_dominating,sigma_dominating");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(line.rfind(std::to_string(rows) + ",", 0) == 0);
  }
  CHECK(rows == 3);
}

TEST_CASE("simulated single-patch extinction matches the exact chain") {
  // cross-check: the windowless simulator run on one patch must reproduce
  // the birth-death chain's absorption-time law and expected lifetime
  const double a = 2.0;
  const int N = 4;
  SimConfig cfg;
  cfg.params = ModelParams{a, 0.0, N, 1};
  cfg.K = 0;
  cfg.horizon = 60.0;
  cfg.seed = 2024;
  cfg.snapshot_dt = 0.0;
  const std::size_t n = 40000;
  std::vector<double> times(n, -1.0);
  parallel_for(n, [&](std::size_t i) {
    SimConfig c = cfg;
    c.seed = CounterRng::substream(cfg.seed, i);
    Trajectory tr = run(c);
    if (tr.terminal == Terminal::Extinct) times[i] = tr.final_time;
  });

  std::vector<double> tau = occupation_times_exact(exact_chain(a, N));
  double expect_mean = 0.0;
  for (double t : tau) expect_mean += t;

  double mean = 0.0;
  for (double v : times) {
    REQUIRE(v >= 0.0);
    mean += v;
  }
  mean /= static_cast<double>(n);
  double sq = 0.0;
  for (double v : times) sq += (v - mean) * (v - mean);
  double se = std::sqrt(sq / (n - 1.0) / static_cast<double>(n));
  CHECK(std::abs(mean - expect_mean) <= 3.0 * se);

  // distribution checkpoints against the integrated backward equations
  std::vector<double> checkpoints{0.5, 1.0, 2.0, 4.0};
  std::vector<double> cdf = absorption_cdf(exact_chain(a, N), checkpoints);
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    double hit = 0.0;
    for (double v : times)
      if (v <= checkpoints[c]) hit += 1.0;
    double frac = hit / static_cast<double>(n);
    double fse = std::sqrt(std::max(frac * (1.0 - frac), 1e-12) / static_cast<double>(n));
    CHECK(std::abs(frac - cdf[c]) <= 3.0 * fse + 1e-4);
  }
}
