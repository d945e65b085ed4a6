#include "patchcp/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace patchcp {

namespace {

/// Fenwick (binary indexed) tree over per-patch rates: point update and
/// inverse-CDF selection in O(log n).
class RateIndex {
 public:
  explicit RateIndex(std::size_t n) : n_(n), tree_(n + 1, 0.0), leaf_(n, 0.0) {}

  void set(std::size_t i, double v) {
    double delta = v - leaf_[i];
    if (delta == 0.0) return;
    leaf_[i] = v;
    for (std::size_t j = i + 1; j <= n_; j += j & (~j + 1)) tree_[j] += delta;
  }

  double get(std::size_t i) const { return leaf_[i]; }

  double total() const {
    double s = 0.0;
    for (std::size_t j = n_; j > 0; j -= j & (~j + 1)) s += tree_[j];
    return s;
  }

  /// Index whose rate block contains `target`; `residual` receives the
  /// offset of target inside that block (the descent computes it for free).
  std::size_t find(double target, double& residual) const {
    std::size_t pos = 0;
    std::size_t mask = 1;
    while ((mask << 1) <= n_) mask <<= 1;
    for (; mask > 0; mask >>= 1) {
      std::size_t next = pos + mask;
      if (next <= n_ && tree_[next] <= target) {
        pos = next;
        target -= tree_[next];
      }
    }
    if (pos >= n_) pos = n_ - 1;
    residual = target < 0.0 ? 0.0 : target;
    return pos;
  }

  /// Recompute internal sums from the leaves (roundoff control on long runs).
  void rebuild() {
    std::fill(tree_.begin(), tree_.end(), 0.0);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j <= n_; j += j & (~j + 1)) tree_[j] += leaf_[i];
  }

 private:
  std::size_t n_;
  std::vector<double> tree_;
  std::vector<double> leaf_;
};

/**
 * Per-patch candidate rates.  Outer births are generated by thinning: each
 * source proposes at the vacancy-independent cap b*k(k-1)/(N-1) (its exact
 * rate if all 2M targets were empty), the target offset is drawn uniformly,
 * and the proposal is accepted with probability (N - xi(target))/N, which
 * restores the exact law.  Out-of-window targets are always rejected: vacant
 * ghosts are suppressed and full ghosts have no room, so one rule covers
 * both boundary policies.  Ghost inflow under the Upper policy needs no
 * thinning (sources are pinned at N): rate (b/2M)*ghosts*(N - xi(x)).
 */
struct LocalRates {
  double death = 0.0, inner = 0.0, outer_cap = 0.0, ghost_in = 0.0;
  double sum() const { return death + inner + outer_cap + ghost_in; }
};

LocalRates local_rates(const ModelParams& p, int k, int ghosts, BoundaryPolicy policy) {
  LocalRates r;
  r.death = static_cast<double>(k);
  r.inner = inner_birth_rate(p, k);
  r.outer_cap = p.b * static_cast<double>(k) * (k - 1) / (p.N - 1);
  if (policy == BoundaryPolicy::Upper && ghosts > 0)
    r.ghost_in = (p.b / (2.0 * p.M)) * ghosts * (p.N - k);
  return r;
}

/// Number of out-of-window sites within distance M of x.
int ghost_count(int x, int lo, int hi, int M) {
  int left = (x - M < lo) ? lo - (x - M) : 0;
  int right = (x + M > hi) ? (x + M) - hi : 0;
  return left + right;
}

/// Two-phase event engine: sample the waiting time first (so callers can
/// snapshot the pre-event state), then select and apply the event.
struct Engine {
  SimConfig cfg;
  MesoState state;
  RateIndex index;
  CounterRng rng;
  bool warned = false;
  bool absorbed = false;
  long long events = 0, nulls = 0;
  double pending_t = 0.0;

  explicit Engine(const SimConfig& c)
      : cfg(c),
        state(make_initial_state(c)),
        index(static_cast<std::size_t>(2 * c.K + 1)),
        rng(c.seed) {
    for (int x = -cfg.K; x <= cfg.K; ++x) refresh(x);
    for (int x = -cfg.K; x <= cfg.K; ++x)
      if (state.occupancy(x) > 0) note_occupied(x);
  }

  void refresh(int x) {
    int g = ghost_count(x, -cfg.K, cfg.K, cfg.params.M);
    LocalRates r = local_rates(cfg.params, state.occupancy(x), g, cfg.boundary);
    index.set(static_cast<std::size_t>(x + cfg.K), r.sum());
  }

  void note_occupied(int x) {
    if (warned || cfg.boundary != BoundaryPolicy::Lower) return;
    if (x - cfg.params.M < -cfg.K || x + cfg.params.M > cfg.K) warned = true;
  }

  /// Samples the next candidate event time (infinity when absorbed).
  double sample_next_time() {
    double total = index.total();
    if (total <= 0.0) {
      absorbed = true;
      return std::numeric_limits<double>::infinity();
    }
    pending_t = state.time() + rng.next_exponential(total);
    return pending_t;
  }

  /// Selects and applies the pending event; returns whether the state changed.
  bool apply_pending(Event& ev) {
    state.set_time(pending_t);
    if (++events % (1 << 20) == 0) index.rebuild();
    double total = index.total();
    double residual = 0.0;
    std::size_t slot = index.find(rng.next_unit() * total, residual);
    int x = static_cast<int>(slot) - cfg.K;
    const ModelParams& p = cfg.params;
    int k = state.occupancy(x);
    int g = ghost_count(x, -cfg.K, cfg.K, p.M);
    LocalRates r = local_rates(p, k, g, cfg.boundary);

    if (residual < r.death) {
      ev = {EventKind::Death, x, x};
      state.apply(ev);
      refresh(x);
      return true;
    }
    residual -= r.death;
    if (residual < r.inner) {
      ev = {EventKind::InnerBirth, x, x};
      state.apply(ev);
      refresh(x);
      note_occupied(x);
      return true;
    }
    residual -= r.inner;
    if (residual < r.outer_cap) {
      uint64_t pick = rng.next_below(static_cast<uint64_t>(2 * p.M));
      int m = static_cast<int>(pick) - p.M;
      if (m >= 0) ++m;  // offsets -M..-1, 1..M
      int y = x + m;
      if (state.in_window(y)) {
        int kt = state.occupancy(y);
        if (rng.next_unit() * p.N < static_cast<double>(p.N - kt)) {
          ev = {EventKind::OuterBirth, x, y};
          state.apply(ev);
          refresh(y);
          note_occupied(y);
          return true;
        }
      }
      ++nulls;
      return false;
    }
    // ghost inflow (Upper policy): a pinned-full source just outside the
    // window gives birth into x; the rate is exact, no thinning needed.
    int src = (x + p.M > cfg.K) ? cfg.K + 1 : -cfg.K - 1;
    ev = {EventKind::OuterBirth, src, x};
    state.apply(ev);
    refresh(x);
    return true;
  }
};

}  // namespace

MesoState make_initial_state(const SimConfig& cfg) {
  validate_params(cfg.params);
  if (!(cfg.horizon > 0.0)) throw ConfigError("sim: horizon must be > 0");
  if (cfg.K < 0) throw ConfigError("sim: window radius K must be >= 0");
  MesoState s(cfg.params, cfg.K, cfg.boundary);
  if (std::holds_alternative<SingleFullPatch>(cfg.initial)) {
    s.set_occupancy(0, cfg.params.N);
  } else if (const Block* b = std::get_if<Block>(&cfg.initial)) {
    if (b->L < 0 || b->L > cfg.K) throw ConfigError("sim: block half-width outside window");
    for (int x = -b->L; x <= b->L; ++x) s.set_occupancy(x, cfg.params.N);
  } else {
    const Explicit& e = std::get<Explicit>(cfg.initial);
    if (e.xi.size() != static_cast<std::size_t>(2 * cfg.K + 1))
      throw ConfigError("sim: explicit initial length != window size");
    for (int x = -cfg.K; x <= cfg.K; ++x)
      s.set_occupancy(x, e.xi[static_cast<std::size_t>(x + cfg.K)]);
  }
  return s;
}

Trajectory run(const SimConfig& cfg, const EventVisitor& visit) {
  Engine eng(cfg);
  Trajectory tr;
  tr.snapshots.push_back({0.0, eng.state.raw()});
  double next_snap =
      cfg.snapshot_dt > 0.0 ? cfg.snapshot_dt : std::numeric_limits<double>::infinity();

  for (;;) {
    double te = eng.sample_next_time();
    if (eng.absorbed) break;  // trajectory ends at the absorption time
    double t_stop = std::min(te, cfg.horizon);
    // the state is constant until t_stop; emit cadence snapshots inside
    while (next_snap < t_stop) {
      tr.snapshots.push_back({next_snap, eng.state.raw()});
      next_snap += cfg.snapshot_dt;
    }
    if (te > cfg.horizon) {
      eng.state.set_time(cfg.horizon);
      break;
    }
    Event ev{};
    bool effective = eng.apply_pending(ev);
    if (next_snap == te) {  // right-continuous sampling at exact ties
      tr.snapshots.push_back({next_snap, eng.state.raw()});
      next_snap += cfg.snapshot_dt;
    }
    if (effective && visit && !visit(eng.state.time(), ev, eng.state)) break;
  }

  tr.final_time = eng.state.time();
  tr.event_count = eng.events;
  tr.null_event_count = eng.nulls;
  tr.window_exit_warning = eng.warned;
  tr.terminal = eng.absorbed ? Terminal::Extinct : Terminal::HorizonReached;
  if (tr.snapshots.back().t != tr.final_time || tr.snapshots.back().xi != eng.state.raw())
    tr.snapshots.push_back({tr.final_time, eng.state.raw()});
  return tr;
}

Trajectory run(const SimConfig& cfg) { return run(cfg, EventVisitor()); }

McEstimate survival_probability_mc(const SimConfig& cfg, std::size_t replicas,
                                   unsigned threads) {
  std::vector<char> survived(replicas, 0);
  parallel_for(
      replicas,
      [&](std::size_t i) {
        SimConfig c = cfg;
        c.seed = CounterRng::substream(cfg.seed, i);
        c.snapshot_dt = 0.0;  // endpoints only
        Trajectory tr = run(c);
        long long pop = 0;
        for (int v : tr.snapshots.back().xi) pop += v;
        survived[i] = pop > 0 ? 1 : 0;
      },
      threads);
  std::size_t n = 0;
  for (std::size_t i = 0; i < replicas; ++i) n += survived[i];
  return bernoulli_estimate(n, replicas);
}

std::optional<double> vacant_zone_detector(const Trajectory& traj, int half_width,
                                           int window_lo) {
  for (const Snapshot& s : traj.snapshots) {
    bool vacant = true;
    for (int x = -half_width; x <= half_width && vacant; ++x) {
      long long i = static_cast<long long>(x) - window_lo;
      if (i < 0 || i >= static_cast<long long>(s.xi.size()))
        throw ConfigError("vacant_zone_detector: half_width exceeds window");
      if (s.xi[static_cast<std::size_t>(i)] != 0) vacant = false;
    }
    if (vacant) return s.t;
  }
  return std::nullopt;
}

std::string trajectory_csv(const Trajectory& tr, int window_lo) {
  std::ostringstream out;
  out << "t,x,xi\n";
  for (const Snapshot& s : tr.snapshots) {
    for (std::size_t i = 0; i < s.xi.size(); ++i) {
      out << format_double(s.t) << ',' << (window_lo + static_cast<int>(i)) << ','
          << s.xi[i] << '\n';
    }
  }
  return out.str();
}

CoupledResult coupled_run(const SimConfig& cfg1, const SimConfig& cfg2) {
  const ModelParams &p1 = cfg1.params, &p2 = cfg2.params;
  if (p1.a > p2.a || p1.b > p2.b)
    throw ConfigError("coupled_run: requires a1 <= a2 and b1 <= b2");
  if (p1.N != p2.N || p1.M != p2.M || cfg1.K != cfg2.K ||
      cfg1.boundary != cfg2.boundary || cfg1.horizon != cfg2.horizon)
    throw ConfigError("coupled_run: N, M, K, boundary, horizon must match");

  MesoState s1 = make_initial_state(cfg1);
  MesoState s2 = make_initial_state(cfg2);
  for (int x = -cfg1.K; x <= cfg1.K; ++x)
    if (s1.occupancy(x) > s2.occupancy(x))
      throw ConfigError("coupled_run: initial states not ordered");

  const int K = cfg1.K, N = p1.N, M = p1.M;
  const double horizon = cfg1.horizon;
  CounterRng rng(cfg1.seed);  // one shared stream drives both paths
  RateIndex index(static_cast<std::size_t>(2 * K + 1));

  // Candidate rate per patch: category-wise max of the two paths' rates.
  // Each candidate is accepted per path with probability rate_i/rate_max
  // using one shared uniform, so acceptance is nested whenever the local
  // occupancies coincide, and domination is preserved pathwise while each
  // marginal stays exact (thinning).
  auto rates_of = [&](const MesoState& s, const ModelParams& p, int x) {
    int g = ghost_count(x, -K, K, M);
    return local_rates(p, s.occupancy(x), g, s.policy());
  };
  auto combined = [&](int x) {
    LocalRates r1 = rates_of(s1, p1, x), r2 = rates_of(s2, p2, x), c;
    c.death = std::max(r1.death, r2.death);
    c.inner = std::max(r1.inner, r2.inner);
    c.outer_cap = std::max(r1.outer_cap, r2.outer_cap);
    c.ghost_in = std::max(r1.ghost_in, r2.ghost_in);
    return c;
  };
  auto refresh = [&](int x) {
    index.set(static_cast<std::size_t>(x + K), combined(x).sum());
  };
  for (int x = -K; x <= K; ++x) refresh(x);

  CoupledResult res;
  double t = 0.0;
  long long events = 0;
  double snap_dt = cfg1.snapshot_dt > 0.0 ? cfg1.snapshot_dt
                                          : std::numeric_limits<double>::infinity();
  double next_snap = snap_dt;
  std::vector<Snapshot> snaps1{{0.0, s1.raw()}}, snaps2{{0.0, s2.raw()}};
  auto emit_snaps = [&](double upto) {
    while (next_snap < upto && next_snap <= horizon) {
      snaps1.push_back({next_snap, s1.raw()});
      snaps2.push_back({next_snap, s2.raw()});
      next_snap += snap_dt;
    }
  };

  for (;;) {
    double total = index.total();
    if (total <= 0.0) break;  // both paths extinct
    double te = t + rng.next_exponential(total);
    emit_snaps(std::min(te, horizon));
    if (te > horizon) {
      t = horizon;
      break;
    }
    t = te;
    if (++events % (1 << 20) == 0) index.rebuild();
    double residual = 0.0;
    std::size_t slot = index.find(rng.next_unit() * total, residual);
    int x = static_cast<int>(slot) - K;
    LocalRates r1 = rates_of(s1, p1, x), r2 = rates_of(s2, p2, x);
    LocalRates c = combined(x);

    bool ch1 = false, ch2 = false;
    int y = x;
    if (residual < c.death) {
      double v = rng.next_unit() * c.death;
      if (v < r1.death) { s1.apply({EventKind::Death, x, x}); ch1 = true; }
      if (v < r2.death) { s2.apply({EventKind::Death, x, x}); ch2 = true; }
    } else if ((residual -= c.death) < c.inner) {
      double v = rng.next_unit() * c.inner;
      if (v < r1.inner) { s1.apply({EventKind::InnerBirth, x, x}); ch1 = true; }
      if (v < r2.inner) { s2.apply({EventKind::InnerBirth, x, x}); ch2 = true; }
    } else if ((residual -= c.inner) < c.outer_cap) {
      uint64_t pick = rng.next_below(static_cast<uint64_t>(2 * M));
      int m = static_cast<int>(pick) - M;
      if (m >= 0) ++m;
      y = x + m;
      if (s1.in_window(y)) {
        double acc1 = r1.outer_cap * (N - s1.occupancy(y));
        double acc2 = r2.outer_cap * (N - s2.occupancy(y));
        double v = rng.next_unit() * (c.outer_cap * N);
        if (v < acc1) { s1.apply({EventKind::OuterBirth, x, y}); ch1 = true; }
        if (v < acc2) { s2.apply({EventKind::OuterBirth, x, y}); ch2 = true; }
      }
    } else {
      double v = rng.next_unit() * c.ghost_in;
      if (v < r1.ghost_in) { s1.apply({EventKind::OuterBirth, x, x}); ch1 = true; }
      if (v < r2.ghost_in) { s2.apply({EventKind::OuterBirth, x, x}); ch2 = true; }
    }
    if (ch1 || ch2) {
      refresh(x);
      if (y != x) refresh(y);
      if (res.dominated_throughout) {
        for (int z = -K; z <= K && res.dominated_throughout; ++z)
          if (s1.occupancy(z) > s2.occupancy(z)) res.dominated_throughout = false;
      }
    }
  }

  snaps1.push_back({t, s1.raw()});
  snaps2.push_back({t, s2.raw()});
  res.lower.snapshots = std::move(snaps1);
  res.upper.snapshots = std::move(snaps2);
  res.lower.final_time = res.upper.final_time = t;
  res.lower.terminal =
      s1.population() == 0 ? Terminal::Extinct : Terminal::HorizonReached;
  res.upper.terminal =
      s2.population() == 0 ? Terminal::Extinct : Terminal::HorizonReached;
  return res;
}

}  // namespace patchcp
