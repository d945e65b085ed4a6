#include "patchcp/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "patchcp/util.hpp"

namespace patchcp {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA2[1] = {1.0 / 5};
constexpr double kA3[2] = {3.0 / 40, 9.0 / 40};
constexpr double kA4[3] = {44.0 / 45, -56.0 / 15, 32.0 / 9};
constexpr double kA5[4] = {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561,
                           -212.0 / 729};
constexpr double kA6[5] = {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176,
                           -5103.0 / 18656};
constexpr double kB[7] = {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192,
                          -2187.0 / 6784, 11.0 / 84, 0.0};
constexpr double kE[7] = {71.0 / 57600, 0.0, -71.0 / 16695, 71.0 / 1920,
                          -17253.0 / 339200, 22.0 / 525, -1.0 / 40};

using Rhs = std::function<void(double, const std::vector<double>&, std::vector<double>&)>;

/**
 * Adaptive Dormand-Prince 4/5 with FSAL.  The error test uses the max norm
 * with per-component scale tol*(1 + |y|): the norm is invariant under
 * permuting components, so translated windows reproduce the exact same step
 * sequence.  `observe` (optional) sees each accepted step and may stop the
 * run.  On return, `y` holds the state at the final time (t_end, or the end
 * of the step on which the observer stopped); the reached time is returned.
 */
double dopri5(const Rhs& f, std::vector<double>& y, double t_end, double tol,
              const StepObserver& observe) {
  if (!(tol > 0.0)) throw ConfigError("integrate: tolerance must be > 0");
  if (t_end < 0.0) throw ConfigError("integrate: t_end must be >= 0");
  if (t_end == 0.0) return 0.0;

  const std::size_t n = y.size();
  const double max_h = 0.5;
  std::vector<double> k[7];
  for (auto& ki : k) ki.assign(n, 0.0);
  std::vector<double> y1(n), yerr(n);

  double t = 0.0;
  f(t, y, k[0]);

  double ynorm = 0.0, fnorm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ynorm = std::max(ynorm, std::abs(y[i]));
    fnorm = std::max(fnorm, std::abs(k[0][i]));
  }
  double h = std::min({0.01 * (1.0 + ynorm) / (1.0 + fnorm), max_h, t_end});

  StepPoint prev{t, y, k[0]};
  while (t < t_end) {
    double rem = t_end - t;
    h = std::min(h, rem);
    // a clamped final step must land on t_end exactly: t + (t_end - t) can
    // round one ulp short, which would re-enter the loop with an untakeable
    // remainder
    bool last = h == rem;
    if (h < 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, t))
      throw std::runtime_error("integrate: step-size underflow");

    auto stage = [&](int s, const double* a) {
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < s; ++j) acc += a[j] * k[j][i];
        y1[i] = y[i] + h * acc;
      }
      f(t + kC[s] * h, y1, k[s]);
    };
    stage(1, kA2);
    stage(2, kA3);
    stage(3, kA4);
    stage(4, kA5);
    stage(5, kA6);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < 6; ++j) acc += kB[j] * k[j][i];
      y1[i] = y[i] + h * acc;
    }
    f(t + h, y1, k[6]);  // FSAL stage; also the derivative at the new point

    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < 7; ++j) acc += kE[j] * k[j][i];
      double scale = tol * (1.0 + std::max(std::abs(y[i]), std::abs(y1[i])));
      err = std::max(err, std::abs(h * acc) / scale);
    }

    if (err <= 1.0) {
      t = last ? t_end : t + h;
      y.swap(y1);
      k[0].swap(k[6]);
      if (observe) {
        StepPoint cur{t, y, k[0]};
        bool go = observe(prev, cur);
        prev = std::move(cur);
        if (!go) return t;
      }
    }
    double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
    h *= std::clamp(fac, 0.2, 5.0);
    h = std::min(h, max_h);
  }
  return t;
}

void validate_profile(const Profile& prof) {
  if (prof.hi < prof.lo || prof.u.size() != static_cast<std::size_t>(prof.size()))
    throw ConfigError("profile: window/value size mismatch");
  for (double v : prof.u)
    if (!(v >= 0.0 && v <= 1.0))
      throw ConfigError("profile: densities must lie in [0,1]");
}

Rhs profile_rhs(const ModelParams& p, int lo, int hi, BoundaryPolicy pol) {
  const double ghost = pol == BoundaryPolicy::Upper ? 1.0 : 0.0;
  const double coupling = p.b / (2.0 * p.M);
  const int M = p.M, n = hi - lo + 1;
  const double a = p.a;
  return [=](double, const std::vector<double>& y, std::vector<double>& dy) {
    auto val = [&](int i) { return (i < 0 || i >= n) ? ghost : y[static_cast<std::size_t>(i)]; };
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int m = 1; m <= M; ++m) {
        double l = val(i - m), r = val(i + m);
        s += l * l + r * r;
      }
      double ui = y[static_cast<std::size_t>(i)];
      dy[static_cast<std::size_t>(i)] = (a * ui * ui + coupling * s) * (1.0 - ui) - ui;
    }
  };
}

std::vector<double> default_theta_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 240; ++i) g.push_back(0.05 * i);
  return g;
}

/**
 * Propagation-speed bound for sizing integration windows.  Disturbances
 * spread through the flow no faster than the influence cone of the
 * pair-branching dual, whose moment rate is 2*ell(theta)+1 in terms of the
 * single-offspring rate ell exposed by spread_rate_bound; evaluating the
 * latter at doubled (a, b) yields exactly that (margins stay conservative).
 */
double cone_speed(const ModelParams& p, double gamma) {
  ModelParams q = p;
  q.a *= 2.0;
  q.b *= 2.0;
  return spread_rate_bound(q, gamma);
}

bool nonincreasing(const std::vector<double>& u, std::size_t from, std::size_t to,
                   double slack) {
  for (std::size_t i = from; i + 1 <= to; ++i)
    if (u[i + 1] > u[i] + slack) return false;
  return true;
}

/// Earliest time in [a.t, b.t] where component i crosses the level in the
/// given direction (+1: rises to >= level, -1: falls to <= level), located
/// by bisection on the Hermite interpolant to 1e-10 in time.
double locate_crossing(const StepPoint& a, const StepPoint& b, std::size_t i,
                       double level, int dir) {
  double t_lo = a.t, t_hi = b.t;
  while (t_hi - t_lo > 1e-10) {
    double mid = 0.5 * (t_lo + t_hi);
    double v = hermite_component(a, b, i, mid);
    bool crossed = dir > 0 ? v >= level : v <= level;
    (crossed ? t_hi : t_lo) = mid;
  }
  return t_hi;
}

}  // namespace

Profile::Profile(int lo_, int hi_, BoundaryPolicy pol)
    : lo(lo_), hi(hi_), u(static_cast<std::size_t>(hi_ - lo_ + 1), 0.0), boundary(pol) {
  if (hi_ < lo_) throw ConfigError("profile: empty window");
}

Profile constant_profile(int K, double level, BoundaryPolicy pol) {
  Profile p(-K, K, pol);
  std::fill(p.u.begin(), p.u.end(), level);
  return p;
}

Profile step_profile(int K, double level, BoundaryPolicy pol) {
  Profile p(-K, K, pol);
  for (int x = -K; x <= 0; ++x) p.at(x) = level;
  return p;
}

Profile two_level_profile(int K, double hi_level, double lo_level, BoundaryPolicy pol) {
  Profile p(-K, K, pol);
  for (int x = -K; x <= K; ++x) p.at(x) = x < 0 ? hi_level : lo_level;
  return p;
}

double scalar_rhs(double r, double u) { return r * u * u * (1.0 - u) - u; }

Equilibria equilibria(double r) {
  if (!(r >= 0.0)) throw ConfigError("equilibria: r must be >= 0");
  Equilibria eq;
  eq.r = r;
  eq.roots.push_back({0.0, Stability::Stable});
  if (r == 4.0) {
    eq.roots.push_back({0.5, Stability::Semistable});
  } else if (r > 4.0) {
    double w = std::sqrt(0.25 - 1.0 / r);
    eq.roots.push_back({0.5 - w, Stability::Unstable});
    eq.roots.push_back({0.5 + w, Stability::Stable});
  }
  return eq;
}

std::vector<double> rhs(const ModelParams& p, const Profile& prof) {
  validate_params(p);
  validate_profile(prof);
  std::vector<double> dy(prof.u.size());
  profile_rhs(p, prof.lo, prof.hi, prof.boundary)(prof.time, prof.u, dy);
  return dy;
}

double hermite_component(const StepPoint& a, const StepPoint& b, std::size_t i,
                         double t) {
  double h = b.t - a.t;
  if (h <= 0.0) return b.u[i];
  double s = (t - a.t) / h;
  double s2 = s * s, s3 = s2 * s;
  double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  return h00 * a.u[i] + h * h10 * a.du[i] + h01 * b.u[i] + h * h11 * b.du[i];
}

Profile integrate(const ModelParams& p, const Profile& prof0, double t_end, double tol,
                  const StepObserver& observe) {
  validate_params(p);
  validate_profile(prof0);
  Profile out = prof0;
  double reached = dopri5(profile_rhs(p, prof0.lo, prof0.hi, prof0.boundary), out.u,
                          t_end, tol, observe);
  out.time = prof0.time + reached;  // t_end unless the observer stopped the run early
  for (double& v : out.u) v = std::clamp(v, 0.0, 1.0);
  return out;
}

Profile integrate(const ModelParams& p, const Profile& prof0, double t_end,
                  double tol) {
  return integrate(p, prof0, t_end, tol, StepObserver());
}

TruncationLadder truncation_error_ladder(const ModelParams& p, const Profile& core0,
                                         const std::vector<int>& radii, double t_end,
                                         double tol) {
  validate_params(p);
  validate_profile(core0);
  if (radii.size() < 2) throw ConfigError("ladder: need at least two radii");
  int core_r = std::max(std::abs(core0.lo), std::abs(core0.hi));
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (radii[i] < core_r) throw ConfigError("ladder: radius smaller than core");
    if (i > 0 && radii[i] <= radii[i - 1])
      throw ConfigError("ladder: radii must be strictly increasing");
  }

  TruncationLadder lad;
  lad.radii = radii;
  for (BoundaryPolicy pol : {BoundaryPolicy::Lower, BoundaryPolicy::Upper}) {
    std::vector<Profile>& flows =
        pol == BoundaryPolicy::Lower ? lad.lower_flows : lad.upper_flows;
    for (int K : radii) {
      Profile init(-K, K, pol);
      for (int x = core0.lo; x <= core0.hi; ++x) init.at(x) = core0.value(x);
      flows.push_back(integrate(p, init, t_end, tol));
    }
  }
  double slack = 10.0 * tol;
  for (std::size_t i = 0; i + 1 < radii.size(); ++i) {
    double dl = 0.0, du = 0.0;
    for (int x = core0.lo; x <= core0.hi; ++x) {
      double l0 = lad.lower_flows[i].value(x), l1 = lad.lower_flows[i + 1].value(x);
      double u0 = lad.upper_flows[i].value(x), u1 = lad.upper_flows[i + 1].value(x);
      dl = std::max(dl, std::abs(l1 - l0));
      du = std::max(du, std::abs(u1 - u0));
      if (l1 < l0 - slack) lad.lower_nondecreasing = false;
      if (u1 > u0 + slack) lad.upper_nonincreasing = false;
    }
    lad.lower_diffs.push_back(dl);
    lad.upper_diffs.push_back(du);
  }
  return lad;
}

bool is_wave_front(const Profile& prof) {
  validate_profile(prof);
  return nonincreasing(prof.u, 0, prof.u.size() - 1, 1e-9);
}

bool front_preserved(const ModelParams& p, const Profile& prof, double t_end,
                     double tol) {
  validate_params(p);
  validate_profile(prof);
  if (!is_wave_front(prof)) throw ConfigError("front_preserved: initial not a front");
  // Truncation erodes monotonicity near the window edges, so the check is
  // confined to the core the boundary cannot reach: the exclusion margin is
  // sized so the boundary's influence there is below the 1e-9 tolerance.
  double gamma = (21.0 + t_end) / std::max(t_end, 1e-9);
  int margin =
      static_cast<int>(std::ceil(cone_speed(p, gamma) * t_end)) + 2 * p.M;
  std::size_t n = prof.u.size();
  if (2 * static_cast<std::size_t>(margin) + 2 > n)
    throw ConfigError("front_preserved: window too small for the horizon");
  std::size_t from = static_cast<std::size_t>(margin);
  std::size_t to = n - 1 - static_cast<std::size_t>(margin);

  bool ok = true;
  integrate(p, prof, t_end, tol, [&](const StepPoint&, const StepPoint& b) {
    if (!nonincreasing(b.u, from, to, 1e-9)) {
      ok = false;
      return false;
    }
    return true;
  });
  return ok;
}

double spread_rate_bound(const ModelParams& p, const std::vector<double>& theta_grid,
                         double gamma) {
  validate_params(p);
  if (!(gamma > 0.0)) throw ConfigError("spread_rate_bound: gamma must be > 0");
  if (p.b == 0.0) return 0.0;
  if (theta_grid.empty()) throw ConfigError("spread_rate_bound: empty grid");
  double best = std::numeric_limits<double>::infinity();
  for (double th : theta_grid) {
    if (!(th > 0.0)) throw ConfigError("spread_rate_bound: grid must be positive");
    double sum = 0.0;
    for (int m = 1; m <= p.M; ++m) sum += 2.0 * std::cosh(th * m);
    double ell = p.a + (p.b / (2.0 * p.M)) * sum - 1.0;
    best = std::min(best, (ell + gamma) / th);
  }
  return best;
}

double spread_rate_bound(const ModelParams& p, double gamma) {
  return spread_rate_bound(p, default_theta_grid(), gamma);
}

std::optional<FrontCertificate> detect_expansion(const ModelParams& p,
                                                 std::vector<double> levels, int L,
                                                 double horizon, double tol) {
  validate_params(p);
  if (L < 0 || !(horizon > 0.0)) throw ConfigError("detect_expansion: bad arguments");
  if (p.r() <= 4.0) return std::nullopt;  // no interval (u-, u+) to certify in

  Equilibria eq = equilibria(p.r());
  double um = eq.roots[1].value, up = eq.roots[2].value;
  if (levels.empty()) {
    for (int i = 1; i <= 33; ++i) levels.push_back(um + i * (up - um) / 34.0);
  }
  for (double u : levels)
    if (!(u > um && u < up))
      throw ConfigError("detect_expansion: level outside (u-, u+)");

  // Middle levels usually cross first; try them before the extremes.
  std::vector<std::size_t> order(levels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    double mid = 0.5 * (levels.size() - 1);
    return std::abs(x - mid) < std::abs(y - mid);
  });

  double c = cone_speed(p, 1.0);
  int K = L + static_cast<int>(std::ceil(c * horizon)) + 2 * p.M;
  for (std::size_t idx : order) {
    double u = levels[idx];
    Profile init = step_profile(K, u, BoundaryPolicy::Lower);
    std::size_t watch = static_cast<std::size_t>(1 - init.lo);  // site +1
    std::optional<double> t0;
    integrate(p, init, horizon, tol, [&](const StepPoint& a, const StepPoint& b) {
      if (b.u[watch] >= u) {
        t0 = locate_crossing(a, b, watch, u, +1);
        return false;
      }
      return true;
    });
    if (t0) {
      FrontCertificate cert;
      cert.kind = CertificateKind::Expansion;
      cert.level = u;
      cert.t0 = *t0;
      cert.params = p;
      return cert;
    }
  }
  return std::nullopt;
}

std::optional<FrontCertificate> detect_retreat(const ModelParams& p,
                                               std::vector<double> lower_levels,
                                               std::vector<double> upper_levels,
                                               double horizon, double tol) {
  validate_params(p);
  if (!(horizon > 0.0)) throw ConfigError("detect_retreat: bad horizon");
  if (p.r() < 4.0) {  // no positive equilibrium: retreat holds by definition
    FrontCertificate cert;
    cert.kind = CertificateKind::Retreat;
    cert.params = p;
    cert.axiomatic = true;
    return cert;
  }

  Equilibria eq = equilibria(p.r());
  double um = eq.roots[1].value, up = eq.roots.back().value;
  if (lower_levels.empty())
    lower_levels = {0.75 * um, 0.5 * um, 0.25 * um};  // easiest (largest) first
  if (upper_levels.empty())
    upper_levels = {up + 0.25 * (1 - up), up + 0.5 * (1 - up), up + 0.75 * (1 - up)};
  for (double u : lower_levels)
    if (!(u > 0.0 && u < um)) throw ConfigError("detect_retreat: u_* not in (0, u-)");
  for (double u : upper_levels)
    if (!(u > up && u < 1.0)) throw ConfigError("detect_retreat: u^* not in (u+, 1)");

  double c = cone_speed(p, 1.0);
  int K = 2 + static_cast<int>(std::ceil(c * horizon)) + 2 * p.M;
  for (double ustar : lower_levels) {
    for (double uupper : upper_levels) {
      Profile init = two_level_profile(K, uupper, ustar, BoundaryPolicy::Upper);
      std::size_t watch = static_cast<std::size_t>(-1 - init.lo);  // site -1
      std::optional<double> t0;
      integrate(p, init, horizon, tol, [&](const StepPoint& a, const StepPoint& b) {
        if (b.u[watch] <= ustar) {
          t0 = locate_crossing(a, b, watch, ustar, -1);
          return false;
        }
        return true;
      });
      if (t0) {
        FrontCertificate cert;
        cert.kind = CertificateKind::Retreat;
        cert.level = ustar;
        cert.upper_level = uupper;
        cert.t0 = *t0;
        cert.params = p;
        return cert;
      }
    }
  }
  return std::nullopt;
}

double front_speed_estimate(const ModelParams& p, double level, double horizon,
                            double tol) {
  validate_params(p);
  if (!(horizon > 0.0)) throw ConfigError("front_speed_estimate: bad horizon");
  if (p.r() <= 4.0)
    throw ConfigError("front_speed_estimate: requires r > 4 (no traveling level set)");
  Equilibria eq = equilibria(p.r());
  double um = eq.roots[1].value, up = eq.roots[2].value;
  if (!(level > um && level < up))
    throw ConfigError("front_speed_estimate: level must lie in (u-, u+)");

  double c = cone_speed(p, 1.0);
  int K = 4 + static_cast<int>(std::ceil(c * horizon)) + 2 * p.M;
  Profile init = step_profile(K, up, BoundaryPolicy::Lower);

  // Rightmost level-crossing position with linear interpolation between sites.
  auto position = [&](const std::vector<double>& u) -> std::optional<double> {
    for (std::size_t i = u.size(); i-- > 0;) {
      if (u[i] >= level) {
        double pos = static_cast<double>(init.lo) + static_cast<double>(i);
        if (i + 1 < u.size() && u[i] > u[i + 1])
          pos += (u[i] - level) / (u[i] - u[i + 1]);
        return pos;
      }
    }
    return std::nullopt;
  };

  const int samples = 21;
  std::vector<double> ts, xs;
  int next = 0;
  auto sample_time = [&](int j) {
    return 0.5 * horizon + 0.5 * horizon * j / (samples - 1);
  };
  std::vector<double> interp(init.u.size());
  integrate(p, init, horizon, tol, [&](const StepPoint& a, const StepPoint& b) {
    while (next < samples && sample_time(next) <= b.t) {
      double tq = sample_time(next);
      if (tq >= a.t) {
        for (std::size_t i = 0; i < interp.size(); ++i)
          interp[i] = hermite_component(a, b, i, tq);
        if (auto pos = position(interp)) {
          ts.push_back(tq);
          xs.push_back(*pos);
        }
      }
      ++next;
    }
    return true;
  });
  if (ts.size() < 2)
    throw std::runtime_error("front_speed_estimate: level set vanished");

  double mt = 0.0, mx = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    mt += ts[i];
    mx += xs[i];
  }
  mt /= ts.size();
  mx /= xs.size();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    num += (ts[i] - mt) * (xs[i] - mx);
    den += (ts[i] - mt) * (ts[i] - mt);
  }
  return num / den;
}

double two_patch_rhs(const ModelParams& p, double u, double v) {
  return (p.a * u * u + 0.5 * p.b * v * v) * (1.0 - u) - u;
}

Equilibria two_patch_equilibria(const ModelParams& p) {
  validate_params(p);
  return equilibria(p.a + 0.5 * p.b);
}

std::vector<TwoPatchPoint> two_patch_flow(const ModelParams& p, double u0, double v0,
                                          double t_end, double tol) {
  validate_params(p);
  if (!(u0 >= 0.0 && u0 <= 1.0 && v0 >= 0.0 && v0 <= 1.0))
    throw ConfigError("two_patch_flow: initial point outside [0,1]^2");
  std::vector<TwoPatchPoint> out{{0.0, u0, v0}};
  std::vector<double> y{u0, v0};
  dopri5(
      [&](double, const std::vector<double>& yy, std::vector<double>& dy) {
        dy[0] = two_patch_rhs(p, yy[0], yy[1]);
        dy[1] = two_patch_rhs(p, yy[1], yy[0]);
      },
      y, t_end, tol, [&](const StepPoint&, const StepPoint& b) {
        out.push_back({b.t, b.u[0], b.u[1]});
        return true;
      });
  if (out.back().t != t_end) out.push_back({t_end, y[0], y[1]});
  return out;
}

std::string profile_csv(const Profile& prof) {
  std::ostringstream outs;
  outs << "x,u\n";
  for (int x = prof.lo; x <= prof.hi; ++x)
    outs << x << ',' << format_double(prof.value(x)) << '\n';
  return outs.str();
}

}  // namespace patchcp
