#include "patchcp/dual.hpp"

#include <algorithm>
#include <array>
#include <bitset>
#include <cmath>
#include <queue>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "patchcp/sim.hpp"

namespace patchcp {

namespace {

/**
 * Event-driven influence-set simulation shared by the limiting (buckets = 0)
 * and bucketed duals.  Every point owns the substream keyed by its personal
 * label and consumes it in a fixed order (mark unless given, then
 * alternating waiting time / event type), so under one seed the two variants
 * produce identical points and events until the first collision.
 */
struct DualEngine {
  const ModelParams& p;
  int buckets;  // 0: limiting dual
  uint64_t seed;
  std::size_t cap;
  bool stop_at_collision;
  double t_end;

  InfluenceSet out;
  std::vector<CounterRng> streams;  // by label-1
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> queue;
  std::unordered_map<uint64_t, int> cell_owner;          // (site,bucket) -> label
  std::unordered_map<int, std::vector<int>> holders;     // location label -> labels
  std::size_t live = 0;
  int generations = 0;

  DualEngine(const ModelParams& pp, int n, const DualStart& start, double te,
             uint64_t sd, std::size_t cp, bool stop)
      : p(pp), buckets(n), seed(sd), cap(cp), stop_at_collision(stop), t_end(te) {
    validate_params(p);
    if (!(te >= 0.0)) throw ConfigError("dual: t_end must be >= 0");
    if (n < 0) throw ConfigError("dual: bucket count must be >= 0");
    if (cp == 0) throw ConfigError("dual: cap must be positive");
    out.t_end = te;
    out.bucket_count = n;
    out.roots.push_back(create(start.site, start.mark, 0, 0, 0.0));
    if (start.pair) out.roots.push_back(create(start.site, start.mark2, 0, 0, 0.0));
  }

  static uint64_t cell_key(int site, int bucket) {
    return (static_cast<uint64_t>(static_cast<uint32_t>(site)) << 32) |
           static_cast<uint32_t>(bucket);
  }

  int create(int site, std::optional<double> given_mark, int generation, int parent,
             double t) {
    int label = static_cast<int>(out.points.size()) + 1;
    streams.emplace_back(CounterRng::substream(seed, static_cast<uint64_t>(label)));
    double mark = given_mark ? *given_mark : streams.back().next_unit();
    if (!(mark >= 0.0 && mark < 1.0)) throw ConfigError("dual: mark must be in [0,1)");
    DualPoint pt;
    pt.site = site;
    pt.mark = mark;
    pt.label = label;
    pt.generation = generation;
    pt.parent_label = parent;
    pt.alive = true;
    if (buckets > 0) {
      int bucket = static_cast<int>(mark * buckets);
      if (bucket >= buckets) bucket = buckets - 1;
      auto it = cell_owner.find(cell_key(site, bucket));
      if (it != cell_owner.end()) {
        pt.location_label = it->second;
        holders[it->second].push_back(label);
        if (!out.collided) {
          out.collided = true;
          out.collision_time = t;
        }
      } else {
        pt.location_label = label;
        cell_owner.emplace(cell_key(site, bucket), label);
        holders.emplace(label, std::vector<int>{label});
      }
    }
    out.points.push_back(pt);
    ++live;
    queue.emplace(t + streams.back().next_exponential(1.0 + p.a + p.b), label);
    return label;
  }

  void kill(int label) {
    out.points[static_cast<std::size_t>(label - 1)].alive = false;
    --live;
  }

  void run() {
    const double total = 1.0 + p.a + p.b;
    while (!queue.empty()) {
      auto [t, label] = queue.top();
      if (t > t_end) break;
      queue.pop();
      DualPoint& pt = out.points[static_cast<std::size_t>(label - 1)];
      if (!pt.alive) continue;

      double e = streams[static_cast<std::size_t>(label - 1)].next_unit() * total;
      if (e < 1.0) {
        if (buckets == 0) {
          kill(label);
          out.deaths.push_back({t, {label}});
        } else {
          // The label's first holder owns the death clock: the whole group
          // dies with it (rate exactly 1 per location label); death draws in
          // later holders' streams are null events.
          int loc = pt.location_label;
          std::vector<int>& group = holders[loc];
          if (group.front() == label) {
            const DualPoint& owner = out.points[static_cast<std::size_t>(loc - 1)];
            int bucket = static_cast<int>(owner.mark * buckets);
            if (bucket >= buckets) bucket = buckets - 1;
            cell_owner.erase(cell_key(owner.site, bucket));
            for (int h : group) kill(h);
            out.deaths.push_back({t, group});
            holders.erase(loc);
            continue;  // no reschedule: the point is gone
          }
          queue.emplace(
              t + streams[static_cast<std::size_t>(label - 1)].next_exponential(total),
              label);
        }
        continue;
      }

      // branching: a pair of fresh points at the parent's site (inner) or at
      // one of the 2M neighbor offsets (each at rate b/2M)
      int y = pt.site;
      if (e >= 1.0 + p.a) {
        double v = e - (1.0 + p.a);  // in [0, b)
        int j = static_cast<int>(v * (2 * p.M) / p.b);
        if (j >= 2 * p.M) j = 2 * p.M - 1;
        int m = j - p.M;
        if (m >= 0) ++m;
        y += m;
      }
      int gen = ++generations;
      int c1 = create(y, std::nullopt, gen, label, t);
      int c2 = create(y, std::nullopt, gen, label, t);
      out.branches.push_back({t, label, gen, c1, c2});
      queue.emplace(
          t + streams[static_cast<std::size_t>(label - 1)].next_exponential(total),
          label);
      if (live > cap) {
        out.truncated = true;
        break;
      }
      if (stop_at_collision && out.collided) break;
    }
  }
};

/**
 * Lazy root-activity sample: equal in law to materializing the influence
 * set and resolving labels, because the two children of a branching evolve
 * independently of each other and of the parent's continuation, so the
 * point's value is an OR of independent terms — one AND-pair per branching
 * plus the leaf draw if the point survives.  Independence lets the terms be
 * evaluated in any order; doing the leaf first and then the pairs with the
 * shortest remaining duration keeps the explored tree small (chronological
 * order explores the largest subtrees first and blows up exponentially in
 * (a+b)t, which at a+b = 8, t = 2 is the difference between milliseconds
 * and hours per thousand replicas).
 */
bool active_sample(const ModelParams& p, const Profile& u, int x, double tau,
                   CounterRng& rng) {
  const double total = 1.0 + p.a + p.b;
  struct Branch {
    double tau;
    int y;
  };
  std::vector<Branch> branches;
  bool leaf_active = false;
  for (;;) {
    double s = rng.next_exponential(total);
    if (s >= tau) {
      leaf_active = rng.next_unit() < u.value(x);  // leaf rule on the mark
      break;
    }
    tau -= s;
    double e = rng.next_unit() * total;
    if (e < 1.0) break;  // the point dies before the query time
    int y = x;
    if (e >= 1.0 + p.a) {
      double v = e - (1.0 + p.a);
      int j = static_cast<int>(v * (2 * p.M) / p.b);
      if (j >= 2 * p.M) j = 2 * p.M - 1;
      int m = j - p.M;
      if (m >= 0) ++m;
      y += m;
    }
    branches.push_back({tau, y});
  }
  if (leaf_active) return true;
  // newest branchings (shortest remaining duration) first
  for (std::size_t i = branches.size(); i-- > 0;)
    if (active_sample(p, u, branches[i].y, branches[i].tau, rng) &&
        active_sample(p, u, branches[i].y, branches[i].tau, rng))
      return true;
  return false;
}

McEstimate bernoulli_mc(std::size_t replicas, unsigned threads,
                        const std::function<bool(std::size_t)>& trial) {
  std::vector<char> hit(replicas, 0);
  parallel_for(
      replicas, [&](std::size_t i) { hit[i] = trial(i) ? 1 : 0; }, threads);
  std::size_t n = 0;
  for (char h : hit) n += h;
  return bernoulli_estimate(n, replicas);
}

}  // namespace

std::vector<int> InfluenceSet::live_labels() const {
  std::vector<int> out;
  for (const DualPoint& pt : points)
    if (pt.alive) out.push_back(pt.label);
  return out;
}

std::size_t InfluenceSet::live_count() const {
  std::size_t n = 0;
  for (const DualPoint& pt : points) n += pt.alive ? 1 : 0;
  return n;
}

InfluenceSet simulate_limiting_dual(const ModelParams& p, const DualStart& start,
                                    double t_end, uint64_t seed, std::size_t cap) {
  DualEngine eng(p, 0, start, t_end, seed, cap, false);
  eng.run();
  return std::move(eng.out);
}

InfluenceSet simulate_n_dual(const ModelParams& p, int N, const DualStart& start,
                             double t_end, uint64_t seed, std::size_t cap,
                             bool stop_at_collision) {
  if (N < 1) throw ConfigError("dual: N must be >= 1");
  DualEngine eng(p, N, start, t_end, seed, cap, stop_at_collision);
  eng.run();
  return std::move(eng.out);
}

double influence_moment_rate(const ModelParams& p, double theta) {
  validate_params(p);
  double sum = 0.0;
  for (int m = 1; m <= p.M; ++m) sum += 2.0 * std::cosh(theta * m);
  return 2.0 * p.a + (2.0 * p.b / (2.0 * p.M)) * sum - 1.0;
}

double spatial_moment(const InfluenceSet& iset, double theta, int origin) {
  double s = 0.0;
  for (const DualPoint& pt : iset.points)
    if (pt.alive) s += std::exp(theta * (pt.site - origin));
  return s;
}

bool resolve_active(ActiveLabelQuery& q, const InfluenceSet& iset) {
  q.active.assign(iset.points.size() + 1, 0);
  for (const DualPoint& pt : iset.points)
    if (pt.alive && pt.mark <= q.u.value(pt.site))
      q.active[static_cast<std::size_t>(pt.label)] = 1;
  // Children are created by strictly later events than their parent, so one
  // pass over branchings in decreasing generation order reaches the fixed
  // point of the pairing rule.
  for (auto it = iset.branches.rbegin(); it != iset.branches.rend(); ++it)
    if (q.active[static_cast<std::size_t>(it->child1)] &&
        q.active[static_cast<std::size_t>(it->child2)])
      q.active[static_cast<std::size_t>(it->parent_label)] = 1;
  q.root_active = !iset.roots.empty();
  for (int r : iset.roots)
    if (!q.active[static_cast<std::size_t>(r)]) q.root_active = false;
  return q.root_active;
}

McEstimate phi_mc(const ModelParams& p, const Profile& u, int x, double t,
                  std::size_t replicas, uint64_t seed, unsigned threads) {
  validate_params(p);
  if (replicas == 0) throw ConfigError("phi_mc: replicas must be >= 1");
  return bernoulli_mc(replicas, threads, [&](std::size_t i) {
    CounterRng rng(CounterRng::substream(seed, i));
    return active_sample(p, u, x, t, rng);
  });
}

McEstimate phi2_mc(const ModelParams& p, const Profile& u, int x, double t,
                   std::size_t replicas, uint64_t seed, unsigned threads) {
  validate_params(p);
  if (replicas == 0) throw ConfigError("phi2_mc: replicas must be >= 1");
  return bernoulli_mc(replicas, threads, [&](std::size_t i) {
    CounterRng rng(CounterRng::substream(seed, i));
    return active_sample(p, u, x, t, rng) && active_sample(p, u, x, t, rng);
  });
}

McEstimate phi_mc_materialized(const ModelParams& p, const Profile& u, int x, double t,
                               std::size_t replicas, uint64_t seed, unsigned threads) {
  validate_params(p);
  if (replicas == 0) throw ConfigError("phi_mc_materialized: replicas must be >= 1");
  std::vector<char> result(replicas, 0);  // 0 discard, 1 inactive, 2 active
  parallel_for(
      replicas,
      [&](std::size_t i) {
        InfluenceSet iset =
            simulate_limiting_dual(p, DualStart{x, {}, {}, false}, t,
                                   CounterRng::substream(seed, i));
        if (iset.truncated) return;  // capped paths are discarded
        ActiveLabelQuery q{u, {}, false};
        result[i] = resolve_active(q, iset) ? 2 : 1;
      },
      threads);
  std::size_t kept = 0, hits = 0;
  for (char r : result) {
    kept += r != 0;
    hits += r == 2;
  }
  if (kept == 0)
    throw std::runtime_error("phi_mc_materialized: every replica hit the cap");
  return bernoulli_estimate(hits, kept);
}

namespace {

/// Submask table: bit s of kSubsets[m] is set iff s is a subset of m.
const std::array<std::bitset<512>, 512>& submask_table() {
  static const std::array<std::bitset<512>, 512> table = [] {
    std::array<std::bitset<512>, 512> t{};
    for (unsigned m = 0; m < 512; ++m) {
      for (unsigned s = m;; s = (s - 1) & m) {
        t[m].set(s);
        if (s == 0) break;
      }
    }
    return t;
  }();
  return table;
}

struct MicroEvent {
  double t;
  int target;  // death: the dying location; birth: the newborn location
  int v1 = -1, v2 = -1;  // birth parents (-1,-1 for deaths)
};

}  // namespace

bool duality_check_exact(const ModelParams& p, int patches, double t, uint64_t seed) {
  if (p.N < 1 || p.N > 3 || patches < 1 || patches > 3)
    throw ConfigError("duality_check_exact: needs 1 <= N <= 3 and 1 <= patches <= 3");
  if (!(p.a >= 0.0 && p.b >= 0.0) || p.M < 1)
    throw ConfigError("duality_check_exact: invalid rates");
  if (!(t >= 0.0 && t <= 16.0))
    throw ConfigError("duality_check_exact: t must lie in [0, 16]");

  const int N = p.N, n_loc = patches * N;
  auto loc = [&](int patch, int i) { return patch * N + i; };

  // Individual-level event families: each location dies at rate 1; each
  // ordered pair (v1, v2) of distinct locations in one patch gives birth
  // onto a target location at rate a/(N(N-1)) within the patch (target
  // distinct from the pair) and b/(2M N(N-1)) in a patch within distance M.
  // Aggregated over a patch state these reproduce the count-chain rates.
  struct Channel {
    double rate;
    int target, v1, v2;
  };
  std::vector<Channel> channels;
  for (int x = 0; x < n_loc; ++x) channels.push_back({1.0, x, -1, -1});
  if (N >= 2) {
    double inner = p.a / (N * (N - 1));
    double outer = p.b / (2.0 * p.M * N * (N - 1));
    for (int py = 0; py < patches; ++py)
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
          if (i == j) continue;
          for (int px = 0; px < patches; ++px) {
            int d = px > py ? px - py : py - px;
            if (d > p.M) continue;
            double rate = d == 0 ? inner : outer;
            if (rate == 0.0) continue;
            for (int k = 0; k < N; ++k) {
              if (px == py && (k == i || k == j)) continue;
              channels.push_back({rate, loc(px, k), loc(py, i), loc(py, j)});
            }
          }
        }
  }
  double total = 0.0;
  for (const Channel& c : channels) total += c.rate;

  CounterRng rng(seed);
  uint16_t eta0 = 0;
  for (int x = 0; x < n_loc; ++x)
    if (rng.next_unit() < 0.5) eta0 |= static_cast<uint16_t>(1u << x);

  std::vector<MicroEvent> events;
  std::vector<uint16_t> states;  // state after each event
  uint16_t state = eta0;
  for (double tc = 0.0;;) {
    tc += rng.next_exponential(total);
    if (tc > t) break;
    double pick = rng.next_unit() * total;
    std::size_t idx = 0;
    while (idx + 1 < channels.size() && pick >= channels[idx].rate)
      pick -= channels[idx].rate, ++idx;
    const Channel& c = channels[idx];
    if (c.v1 < 0) {
      state &= static_cast<uint16_t>(~(1u << c.target));
    } else if ((state >> c.v1 & 1u) && (state >> c.v2 & 1u)) {
      state |= static_cast<uint16_t>(1u << c.target);
    }
    events.push_back({tc, c.target, c.v1, c.v2});
    states.push_back(state);
  }
  const uint16_t eta_t = state;
  const auto& subsets = submask_table();

  // Backward set-of-sets requirement from each (w, t): a birth onto an
  // occupied requirement adds the pair-substituted variant, a death deletes
  // every requirement containing the dead location.  The relation
  //   w occupied at t  <=>  some requirement set at dual time s is contained
  //                         in the forward state at t - s
  // is piecewise constant in s on both sides, so checking the midpoint of
  // every segment between consecutive event times covers all s in [0, t].
  for (int w = 0; w < n_loc; ++w) {
    const bool lhs = (eta_t >> w) & 1u;
    std::bitset<512> dual;
    dual.set(1u << w);
    auto consistent = [&](uint16_t fwd) { return lhs == (dual & subsets[fwd]).any(); };
    for (std::size_t j = events.size(); j-- > 0;) {
      uint16_t fwd = states[j];  // forward state just after event j
      if (!consistent(fwd)) return false;
      const MicroEvent& ev = events[j];
      if (ev.v1 < 0) {
        for (unsigned m = 0; m < 512; ++m)
          if (dual.test(m) && (m >> ev.target & 1u)) dual.reset(m);
      } else {
        std::bitset<512> added;
        for (unsigned m = 0; m < 512; ++m)
          if (dual.test(m) && (m >> ev.target & 1u))
            added.set((m & ~(1u << ev.target)) | (1u << ev.v1) | (1u << ev.v2));
        dual |= added;
      }
    }
    if (!consistent(eta0)) return false;
  }
  return true;
}

AgreementReport occupation_agreement_mc(const ModelParams& p, int N, const Profile& u0,
                                        int x, double t,
                                        std::size_t forward_replicas,
                                        std::size_t dual_replicas, double epsilon,
                                        uint64_t seed, bool use_limiting_dual,
                                        unsigned threads) {
  ModelParams pn = p;
  pn.N = N;
  validate_params(pn);
  if (u0.lo != -u0.hi) throw ConfigError("occupation_agreement_mc: window not symmetric");
  if (!u0.in_window(x)) throw ConfigError("occupation_agreement_mc: x outside window");
  if (!(epsilon > 0.0)) throw ConfigError("occupation_agreement_mc: epsilon must be > 0");
  if (forward_replicas == 0 || dual_replicas == 0)
    throw ConfigError("occupation_agreement_mc: replicas must be >= 1");
  const int K = u0.hi;

  // Dual side: bucketed-dual activity against u0 plus collision statistics
  // (or the limiting dual's estimate with the collision term as correction).
  std::vector<char> dual_hit(dual_replicas, 0), collided(dual_replicas, 0),
      kept(dual_replicas, 0);
  parallel_for(
      dual_replicas,
      [&](std::size_t i) {
        uint64_t si = CounterRng::substream(seed, 2 * i + 1);
        InfluenceSet iset =
            simulate_n_dual(pn, N, DualStart{x, {}, {}, false}, t, si, kDualPointCap,
                            use_limiting_dual);
        if (iset.truncated && !use_limiting_dual) return;
        kept[i] = 1;
        collided[i] = iset.collided ? 1 : 0;
        if (use_limiting_dual) {
          CounterRng rng(CounterRng::substream(si, 1));
          dual_hit[i] = active_sample(pn, u0, x, t, rng) ? 1 : 0;
        } else {
          ActiveLabelQuery q{u0, {}, false};
          dual_hit[i] = resolve_active(q, iset) ? 1 : 0;
        }
      },
      threads);
  std::size_t n_kept = 0, n_hit = 0, n_coll = 0;
  for (std::size_t i = 0; i < dual_replicas; ++i) {
    n_kept += kept[i];
    n_hit += dual_hit[i] & kept[i];
    n_coll += collided[i] & kept[i];
  }
  if (n_kept == 0)
    throw std::runtime_error("occupation_agreement_mc: every dual replica capped");

  AgreementReport rep;
  rep.dual = bernoulli_estimate(n_hit, n_kept);
  rep.collision_prob = bernoulli_estimate(n_coll, n_kept);
  rep.epsilon = epsilon;
  rep.used_limiting_dual = use_limiting_dual;
  rep.chebyshev_bound = 2.0 / (epsilon * epsilon) * rep.collision_prob.mean;

  // Forward side: product-binomial initial occupancies, exact event-driven
  // runs, density at (x, t).
  std::vector<double> dens(forward_replicas, 0.0);
  parallel_for(
      forward_replicas,
      [&](std::size_t i) {
        CounterRng rng(CounterRng::substream(seed, 2 * i));
        SimConfig cfg;
        cfg.params = pn;
        cfg.K = K;
        cfg.boundary = u0.boundary;
        cfg.horizon = t;
        cfg.seed = CounterRng::substream(rng.key(), 1);
        cfg.snapshot_dt = 0.0;
        std::vector<int> xi(static_cast<std::size_t>(2 * K + 1), 0);
        for (int s = -K; s <= K; ++s) {
          int count = 0;
          double us = u0.value(s);
          for (int ind = 0; ind < N; ++ind) count += rng.next_unit() < us ? 1 : 0;
          xi[static_cast<std::size_t>(s + K)] = count;
        }
        cfg.initial = Explicit{std::move(xi)};
        Trajectory tr = run(cfg);
        dens[i] = tr.snapshots.back().xi[static_cast<std::size_t>(x + K)] /
                  static_cast<double>(N);
      },
      threads);
  double mean = 0.0;
  for (double d : dens) mean += d;
  mean /= static_cast<double>(forward_replicas);
  double var = 0.0;
  for (double d : dens) var += (d - mean) * (d - mean);
  var /= std::max<std::size_t>(1, forward_replicas - 1);
  rep.forward = {mean, std::sqrt(var / static_cast<double>(forward_replicas))};
  rep.deviation = std::abs(mean - rep.dual.mean);
  std::size_t over = 0;
  for (double d : dens) over += std::abs(d - rep.dual.mean) > epsilon ? 1 : 0;
  rep.deviation_freq = static_cast<double>(over) / static_cast<double>(forward_replicas);
  return rep;
}

std::string event_log_jsonl(const InfluenceSet& iset) {
  using nlohmann::json;
  std::ostringstream out;
  json meta{{"kind", "meta"},
            {"t_end", iset.t_end},
            {"buckets", iset.bucket_count},
            {"roots", iset.roots},
            {"truncated", iset.truncated}};
  if (iset.collided) meta["collision_time"] = iset.collision_time;
  out << meta.dump() << '\n';
  std::size_t bi = 0, di = 0;
  while (bi < iset.branches.size() || di < iset.deaths.size()) {
    bool take_branch =
        di >= iset.deaths.size() ||
        (bi < iset.branches.size() && iset.branches[bi].t <= iset.deaths[di].t);
    if (take_branch) {
      const BranchRecord& b = iset.branches[bi++];
      const DualPoint& c1 = iset.points[static_cast<std::size_t>(b.child1 - 1)];
      const DualPoint& c2 = iset.points[static_cast<std::size_t>(b.child2 - 1)];
      out << json{{"t", b.t},
                  {"kind", "branch"},
                  {"parent", b.parent_label},
                  {"generation", b.generation},
                  {"labels", {b.child1, b.child2}},
                  {"sites", {c1.site, c2.site}},
                  {"marks", {c1.mark, c2.mark}}}
                 .dump()
          << '\n';
    } else {
      const DeathRecord& d = iset.deaths[di++];
      out << json{{"t", d.t}, {"kind", "death"}, {"labels", d.removed}}.dump() << '\n';
    }
  }
  return out.str();
}

}  // namespace patchcp
