#include "patchcp/model.hpp"

#include <cmath>

namespace patchcp {

void validate_params(const ModelParams& p) {
  if (!(p.a >= 0.0) || !std::isfinite(p.a))
    throw ConfigError("model: a must be finite and >= 0");
  if (!(p.b >= 0.0) || !std::isfinite(p.b))
    throw ConfigError("model: b must be finite and >= 0");
  if (p.N < 2) throw ConfigError("model: N must be >= 2");
  if (p.M < 1) throw ConfigError("model: M must be >= 1");
}

MesoState::MesoState(const ModelParams& p, int K, BoundaryPolicy policy)
    : MesoState(p, -K, K, policy) {}

MesoState::MesoState(const ModelParams& p, int lo, int hi, BoundaryPolicy policy)
    : params_(p), lo_(lo), hi_(hi), policy_(policy) {
  validate_params(p);
  if (hi < lo) throw ConfigError("state: window is empty");
  xi_.assign(static_cast<size_t>(hi - lo + 1), 0);
}

void MesoState::set_occupancy(int x, int v) {
  if (!in_window(x)) throw ConfigError("state: write outside window");
  if (v < 0 || v > params_.N) throw ConfigError("state: occupancy outside [0,N]");
  xi_[static_cast<size_t>(x - lo_)] = v;
}

void MesoState::apply(const Event& e) {
  int k = occupancy(e.target);
  if (e.kind == EventKind::Death) {
    if (k <= 0) throw std::logic_error("state: death at empty patch");
    set_occupancy(e.target, k - 1);
  } else {
    if (k >= params_.N) throw std::logic_error("state: birth into full patch");
    set_occupancy(e.target, k + 1);
  }
}

long long MesoState::population() const {
  long long n = 0;
  for (int v : xi_) n += v;
  return n;
}

double death_rate(const ModelParams&, int k) { return static_cast<double>(k); }

double inner_birth_rate(const ModelParams& p, int k) {
  double pairs = static_cast<double>(k) * (k - 1);
  double denom = static_cast<double>(p.N) * (p.N - 1);
  return p.a * pairs * (p.N - k) / denom;
}

double outer_birth_rate(const ModelParams& p, int k_source, int k_target) {
  double pairs = static_cast<double>(k_source) * (k_source - 1);
  double denom = static_cast<double>(p.N) * (p.N - 1);
  return (p.b / (2.0 * p.M)) * pairs * (p.N - k_target) / denom;
}

double death_rate(const MesoState& s, int x) {
  if (!s.in_window(x)) throw ConfigError("death_rate: site outside window");
  return death_rate(s.params(), s.occupancy(x));
}

double inner_birth_rate(const MesoState& s, int x) {
  if (!s.in_window(x)) throw ConfigError("inner_birth_rate: site outside window");
  return inner_birth_rate(s.params(), s.occupancy(x));
}

double outer_birth_rate(const MesoState& s, int y, int x) {
  int d = y > x ? y - x : x - y;
  if (d == 0) throw ConfigError("outer_birth_rate: source equals target");
  if (d > s.params().M) throw ConfigError("outer_birth_rate: |x-y| exceeds range M");
  return outer_birth_rate(s.params(), s.occupancy(y), s.occupancy(x));
}

RateTable rate_table(const MesoState& s) {
  const ModelParams& p = s.params();
  RateTable table;
  for (int x = s.lo(); x <= s.hi(); ++x) {
    int k = s.occupancy(x);
    if (k > 0) {
      double d = death_rate(p, k);
      table.entries.push_back({{EventKind::Death, x, x}, d});
      table.total += d;
    }
    double ib = inner_birth_rate(p, k);
    if (ib > 0.0) {
      table.entries.push_back({{EventKind::InnerBirth, x, x}, ib});
      table.total += ib;
    }
    // Dispersal out of x into targets within range.  Births whose target
    // lies outside the window are suppressed: vacant ghosts are not tracked
    // and full ghosts have no room.  Under the Upper policy, ghost sites are
    // pinned at N and export into the window at the full-source rate.
    for (int m = -p.M; m <= p.M; ++m) {
      if (m == 0) continue;
      int y = x + m;
      if (s.in_window(y)) {
        double ob = outer_birth_rate(p, k, s.occupancy(y));
        if (ob > 0.0) {
          table.entries.push_back({{EventKind::OuterBirth, x, y}, ob});
          table.total += ob;
        }
      } else if (s.policy() == BoundaryPolicy::Upper) {
        double ob = outer_birth_rate(p, p.N, k);
        if (ob > 0.0) {
          table.entries.push_back({{EventKind::OuterBirth, y, x}, ob});
          table.total += ob;
        }
      }
    }
  }
  return table;
}

double total_rate(const MesoState& s) { return rate_table(s).total; }

}  // namespace patchcp
