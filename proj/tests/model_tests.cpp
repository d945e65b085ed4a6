#include <cmath>
#include <limits>

#include "doctest.h"
#include "patchcp/model.hpp"

using namespace patchcp;

namespace {

// Independent oracle for pair-birth rates: count ordered pairs of distinct
// occupied slots in the source patch times empty slots in the target patch,
// each micro triple firing at rate(a or b/2M) / (N(N-1)).
long long ordered_pairs_times_empties(int k_source, int k_target, int N) {
  long long pairs = 0;
  for (int i = 0; i < k_source; ++i)
    for (int j = 0; j < k_source; ++j)
      if (i != j) ++pairs;
  return pairs * (N - k_target);
}

}  // namespace

TEST_CASE("parameter validation") {
  CHECK_NOTHROW(validate_params(ModelParams{2.0, 1.0, 10, 1}));
  CHECK(ModelParams{2.0, 1.0, 10, 1}.r() == 3.0);
  CHECK_THROWS_AS(validate_params(ModelParams{2.0, 1.0, 1, 1}), ConfigError);
  CHECK_THROWS_AS(validate_params(ModelParams{-1.0, 0.0, 5, 2}), ConfigError);
  CHECK_THROWS_AS(validate_params(ModelParams{0.0, -0.5, 5, 2}), ConfigError);
  CHECK_THROWS_AS(validate_params(ModelParams{1.0, 1.0, 5, 0}), ConfigError);
  double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(validate_params(ModelParams{nan, 0.0, 5, 1}), ConfigError);
  CHECK_THROWS_AS(
      validate_params(ModelParams{std::numeric_limits<double>::infinity(), 0.0, 5, 1}),
      ConfigError);
}

TEST_CASE("death rate is the occupancy") {
  ModelParams p{1.0, 1.0, 10, 1};
  CHECK(death_rate(p, 0) == 0.0);
  CHECK(death_rate(p, 10) == 10.0);
  CHECK(death_rate(p, 7) == 7.0);
}

TEST_CASE("inner birth rate matches the micro pair enumeration") {
  ModelParams p{2.0, 0.0, 10, 1};
  CHECK(inner_birth_rate(p, 0) == 0.0);
  CHECK(inner_birth_rate(p, 1) == 0.0);
  CHECK(inner_birth_rate(p, 10) == 0.0);
  // a=2, N=10, k=5: 2*5*4*5/90 = 20/9
  CHECK(inner_birth_rate(p, 5) == doctest::Approx(20.0 / 9.0).epsilon(1e-15));
  for (int N : {2, 3, 4, 7}) {
    ModelParams q{1.75, 0.0, N, 1};
    for (int k = 0; k <= N; ++k) {
      double micro = static_cast<double>(ordered_pairs_times_empties(k, k, N)) *
                     q.a / (N * (N - 1.0));
      CHECK(inner_birth_rate(q, k) == doctest::Approx(micro).epsilon(1e-14));
    }
  }
}

TEST_CASE("outer birth rate matches the micro pair enumeration") {
  ModelParams p{0.0, 1.0, 4, 1};
  CHECK(outer_birth_rate(p, 1, 0) == 0.0);   // single parent
  CHECK(outer_birth_rate(p, 4, 4) == 0.0);   // full target
  // ghost source at N=4 into empty target: (1/2)*4*3*4/12 = 2
  CHECK(outer_birth_rate(p, 4, 0) == doctest::Approx(2.0).epsilon(1e-15));
  for (int N : {2, 3, 4}) {
    ModelParams q{0.0, 2.5, N, 3};
    for (int ks = 0; ks <= N; ++ks)
      for (int kt = 0; kt <= N; ++kt) {
        double micro = static_cast<double>(ordered_pairs_times_empties(ks, kt, N)) *
                       q.b / (2.0 * q.M) / (N * (N - 1.0));
        CHECK(outer_birth_rate(q, ks, kt) == doctest::Approx(micro).epsilon(1e-14));
      }
  }
}

TEST_CASE("state ghost reads follow the boundary policy") {
  ModelParams p{1.0, 1.0, 5, 2};
  MesoState lower(p, 3, BoundaryPolicy::Lower);
  MesoState upper(p, 3, BoundaryPolicy::Upper);
  CHECK(lower.occupancy(4) == 0);
  CHECK(lower.occupancy(-10) == 0);
  CHECK(upper.occupancy(4) == 5);
  CHECK(upper.occupancy(-10) == 5);
  lower.set_occupancy(2, 4);
  CHECK(lower.occupancy(2) == 4);
  CHECK_THROWS_AS(lower.set_occupancy(2, 6), ConfigError);
  CHECK_THROWS_AS(lower.set_occupancy(2, -1), ConfigError);
}

TEST_CASE("outer birth rejects bad site pairs") {
  ModelParams p{1.0, 1.0, 4, 1};
  MesoState s(p, 3, BoundaryPolicy::Lower);
  CHECK_THROWS_AS(outer_birth_rate(s, 0, 0), ConfigError);
  CHECK_THROWS_AS(outer_birth_rate(s, 0, 2), ConfigError);
}

TEST_CASE("total rate: hand-checked windows") {
  // All-empty window is absorbing.
  ModelParams p{1.0, 1.0, 2, 1};
  MesoState empty(p, 2, BoundaryPolicy::Lower);
  CHECK(total_rate(empty) == 0.0);
  CHECK(rate_table(empty).entries.empty());

  // Single full patch with b=0: only N deaths.
  ModelParams pd{3.0, 0.0, 6, 1};
  MesoState full(pd, 0, 0, BoundaryPolicy::Lower);
  full.set_occupancy(0, 6);
  CHECK(total_rate(full) == doctest::Approx(6.0).epsilon(1e-15));

  // Window {0,1}, xi=(2,0), N=2, a=1, b=1, M=1, lower boundary:
  // deaths 2, inner 0 (source full), outer 0->1 = (1/2)*2*1*2/2 = 1; total 3.
  MesoState two(p, 0, 1, BoundaryPolicy::Lower);
  two.set_occupancy(0, 2);
  CHECK(total_rate(two) == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("rate table sums to the total and preserves bounds") {
  ModelParams p{2.0, 1.5, 4, 2};
  for (BoundaryPolicy pol : {BoundaryPolicy::Lower, BoundaryPolicy::Upper}) {
    MesoState s(p, 3, pol);
    int vals[] = {1, 0, 4, 2, 3, 0, 1};
    for (int x = -3; x <= 3; ++x) s.set_occupancy(x, vals[x + 3]);
    RateTable table = rate_table(s);
    double sum = 0.0;
    for (const auto& [e, rate] : table.entries) {
      CHECK(rate > 0.0);
      sum += rate;
      MesoState t = s;
      t.apply(e);
      for (int x = -3; x <= 3; ++x) {
        CHECK(t.occupancy(x) >= 0);
        CHECK(t.occupancy(x) <= p.N);
      }
    }
    CHECK(table.total == doctest::Approx(sum).epsilon(1e-13));
    CHECK(total_rate(s) == doctest::Approx(table.total).epsilon(1e-13));
  }
}

TEST_CASE("upper policy adds ghost-source births at the window edge") {
  // Window {0}, N=2, b=1, M=1, upper: ghosts at +-1 are full (k=2), so each
  // contributes (b/2)*2*1*(2-k0)/2 into site 0.
  ModelParams p{0.0, 1.0, 2, 1};
  MesoState s(p, 0, 0, BoundaryPolicy::Upper);
  CHECK(total_rate(s) == doctest::Approx(2.0 * 0.5 * 2.0 * 1.0 * 2.0 / 2.0));
  RateTable table = rate_table(s);
  int ghost_births = 0;
  for (const auto& [e, rate] : table.entries)
    if (e.kind == EventKind::OuterBirth && !s.in_window(e.source)) ++ghost_births;
  CHECK(ghost_births == 2);

  MesoState sl(p, 0, 0, BoundaryPolicy::Lower);
  CHECK(total_rate(sl) == 0.0);
}
