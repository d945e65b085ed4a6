#include "patchcp/percolation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "patchcp/model.hpp"
#include "patchcp/rng.hpp"

namespace patchcp {

bool OrientedGrid::in_grid(int z, int n) const {
  return n >= 0 && n <= depth && z >= -width && z <= width && ((z + n) & 1) == 0;
}

double OrientedGrid::site_uniform(int z, int n) const {
  uint64_t key = CounterRng::substream(
      CounterRng::substream(seed, static_cast<uint64_t>(static_cast<int64_t>(z))),
      static_cast<uint64_t>(static_cast<int64_t>(n)));
  return CounterRng(key).next_unit();
}

bool OrientedGrid::is_open(int z, int n) const {
  const int w = window_radius();
  const double window = (2.0 * w + 1.0) * (2.0 * w + 1.0);
  const double threshold = 1.0 - std::pow(1.0 - gamma, 1.0 / window);
  for (int dz = -w; dz <= w; ++dz)
    for (int dn = -w; dn <= w; ++dn)
      if (site_uniform(z + dz, n + dn) < threshold) return false;
  return true;
}

OrientedGrid make_grid(double gamma, int k, int depth, int width, uint64_t seed) {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw ConfigError("make_grid: gamma must lie in [0, 1]");
  if (k < 0 || depth < 1 || width < 1)
    throw ConfigError("make_grid: need k >= 0, depth >= 1, width >= 1");
  return {gamma, k, depth, width, seed};
}

bool WetSet::contains(int n, int z) const {
  if (n < 0 || static_cast<std::size_t>(n) >= levels.size()) return false;
  const std::vector<int>& lvl = levels[static_cast<std::size_t>(n)];
  return std::binary_search(lvl.begin(), lvl.end(), z);
}

WetSet evolve_wet(const OrientedGrid& grid, const std::vector<int>& w0) {
  WetSet wet;
  wet.levels.resize(static_cast<std::size_t>(grid.depth) + 1);
  std::vector<int>& base = wet.levels[0];
  for (int z : w0) {
    if ((z & 1) != 0) throw ConfigError("evolve_wet: level-0 sites must have even z");
    if (z >= -grid.width && z <= grid.width) base.push_back(z);
  }
  std::sort(base.begin(), base.end());
  base.erase(std::unique(base.begin(), base.end()), base.end());
  for (int n = 1; n <= grid.depth; ++n) {
    const std::vector<int>& prev = wet.levels[static_cast<std::size_t>(n - 1)];
    std::vector<int>& cur = wet.levels[static_cast<std::size_t>(n)];
    int last = INT32_MIN;
    for (std::size_t i = 0; i < prev.size(); ++i) {
      for (int z : {prev[i] - 1, prev[i] + 1}) {
        // prev is sorted, so candidates arrive nondecreasing; 'last' dedupes
        // prev[i]+1 == prev[i+1]-1.
        if (z <= last || z < -grid.width || z > grid.width) continue;
        if (grid.is_open(z, n)) cur.push_back(z);
        last = z;
      }
    }
    if (cur.empty()) break;  // extinction is absorbing
  }
  return wet;
}

McEstimate cluster_survival_mc(double gamma, int k, int depth, std::size_t replicas,
                               const std::vector<int>& w0, uint64_t seed, int width,
                               unsigned threads) {
  if (replicas == 0) throw ConfigError("cluster_survival_mc: replicas must be >= 1");
  if (width < 0) width = 4 * depth;
  OrientedGrid proto = make_grid(gamma, k, depth, width, seed);
  std::vector<char> hit(replicas, 0);
  parallel_for(
      replicas,
      [&](std::size_t i) {
        OrientedGrid g = proto;
        g.seed = CounterRng::substream(seed, i);
        WetSet wet = evolve_wet(g, w0);
        hit[i] = wet.levels[static_cast<std::size_t>(depth)].empty() ? 0 : 1;
      },
      threads);
  std::size_t n = 0;
  for (char h : hit) n += h;
  return bernoulli_estimate(n, replicas);
}

namespace {

/// Reachable (in-boundary) z positions per level 1..depth, ignoring openness.
std::vector<std::vector<int>> reachable_cone(int depth, int width,
                                             const std::vector<int>& w0) {
  std::vector<std::vector<int>> cone(static_cast<std::size_t>(depth) + 1);
  std::vector<int>& base = cone[0];
  for (int z : w0) {
    if ((z & 1) != 0)
      throw ConfigError("survival_exact: level-0 sites must have even z");
    if (z >= -width && z <= width) base.push_back(z);
  }
  std::sort(base.begin(), base.end());
  base.erase(std::unique(base.begin(), base.end()), base.end());
  for (int n = 1; n <= depth; ++n) {
    std::vector<int> cur;
    for (int z : cone[static_cast<std::size_t>(n - 1)])
      for (int c : {z - 1, z + 1})
        if (c >= -width && c <= width &&
            (cur.empty() || cur.back() != c))
          cur.push_back(c);
    cone[static_cast<std::size_t>(n)] = std::move(cur);
  }
  return cone;
}

}  // namespace

Rational survival_exact(const Rational& gamma, int depth, int width,
                        const std::vector<int>& w0) {
  if (depth < 1 || width < 1)
    throw ConfigError("survival_exact: need depth >= 1 and width >= 1");
  auto cone = reachable_cone(depth, width, w0);
  if (cone[0].empty()) return Rational(0);
  std::vector<std::pair<int, int>> sites;  // (n, z), levels 1..depth
  for (int n = 1; n <= depth; ++n)
    for (int z : cone[static_cast<std::size_t>(n)]) sites.emplace_back(n, z);
  if (sites.size() > 24)
    throw ResourceCapError("survival_exact: more than 24 enumerable sites");
  const Rational open_p = Rational(1) - gamma;
  std::vector<Rational> pow_closed(sites.size() + 1, Rational(1));
  std::vector<Rational> pow_open(sites.size() + 1, Rational(1));
  for (std::size_t i = 1; i <= sites.size(); ++i) {
    pow_closed[i] = pow_closed[i - 1] * gamma;
    pow_open[i] = pow_open[i - 1] * open_p;
  }
  Rational total(0);
  for (uint64_t assign = 0; assign < (uint64_t(1) << sites.size()); ++assign) {
    // bit i set: site i open
    std::vector<int> prev = cone[0];
    bool survive = true;
    std::size_t bit = 0;
    for (int n = 1; n <= depth && survive; ++n) {
      std::vector<int> cur;
      for (int z : cone[static_cast<std::size_t>(n)]) {
        bool open = (assign >> bit++) & 1u;
        if (!open) continue;
        bool fed = std::binary_search(prev.begin(), prev.end(), z - 1) ||
                   std::binary_search(prev.begin(), prev.end(), z + 1);
        if (fed) cur.push_back(z);
      }
      prev = std::move(cur);
      survive = !prev.empty();
    }
    if (!survive) continue;
    int open_count = 0;
    for (std::size_t i = 0; i < sites.size(); ++i) open_count += (assign >> i) & 1u;
    total = total + pow_open[static_cast<std::size_t>(open_count)] *
                        pow_closed[sites.size() - static_cast<std::size_t>(open_count)];
  }
  return total;
}

Rational survival_exact_dp(const Rational& gamma, int depth, int width,
                           const std::vector<int>& w0) {
  if (depth < 1 || width < 1)
    throw ConfigError("survival_exact_dp: need depth >= 1 and width >= 1");
  auto cone = reachable_cone(depth, width, w0);
  if (cone[0].empty()) return Rational(0);
  const Rational open_p = Rational(1) - gamma;
  // Distribution of the wet set as a mask over the level's cone positions;
  // only sites fed by the current wet set have their openness resolved at
  // each step, everything else integrates out by independence.
  std::map<uint64_t, Rational> dist;
  dist[(uint64_t(1) << cone[0].size()) - 1] = Rational(1);
  for (int n = 1; n <= depth; ++n) {
    const std::vector<int>& prev_pos = cone[static_cast<std::size_t>(n - 1)];
    const std::vector<int>& cur_pos = cone[static_cast<std::size_t>(n)];
    if (cur_pos.size() > 24)
      throw ResourceCapError("survival_exact_dp: level exceeds 24 sites");
    std::map<uint64_t, Rational> next;
    for (const auto& [mask, prob] : dist) {
      if (mask == 0) {
        auto [it, inserted] = next.try_emplace(0, prob);
        if (!inserted) it->second = it->second + prob;
        continue;
      }
      std::vector<std::size_t> fed;  // indices into cur_pos reachable from mask
      for (std::size_t i = 0; i < cur_pos.size(); ++i) {
        bool ok = false;
        for (std::size_t j = 0; j < prev_pos.size() && !ok; ++j)
          if ((mask >> j) & 1u)
            ok = cur_pos[i] == prev_pos[j] - 1 || cur_pos[i] == prev_pos[j] + 1;
        if (ok) fed.push_back(i);
      }
      for (uint64_t sub = 0; sub < (uint64_t(1) << fed.size()); ++sub) {
        uint64_t new_mask = 0;
        Rational p = prob;
        for (std::size_t i = 0; i < fed.size(); ++i) {
          if ((sub >> i) & 1u) {
            new_mask |= uint64_t(1) << fed[i];
            p = p * open_p;
          } else {
            p = p * gamma;
          }
        }
        auto [it, inserted] = next.try_emplace(new_mask, p);
        if (!inserted) it->second = it->second + p;
      }
    }
    dist = std::move(next);
  }
  Rational dead(0);
  if (auto it = dist.find(0); it != dist.end()) dead = it->second;
  return Rational(1) - dead;
}

McEstimate good_event_density(const std::function<bool(std::size_t)>& runner,
                              std::size_t replicas, unsigned threads) {
  if (replicas == 0) throw ConfigError("good_event_density: replicas must be >= 1");
  std::vector<char> hit(replicas, 0);
  parallel_for(
      replicas, [&](std::size_t i) { hit[i] = runner(i) ? 1 : 0; }, threads);
  std::size_t n = 0;
  for (char h : hit) n += h;
  return bernoulli_estimate(n, replicas);
}

std::string grid_csv(const OrientedGrid& grid, const WetSet& wet) {
  std::ostringstream out;
  out << "n,z,open,wet\n";
  for (int n = 0; n <= grid.depth; ++n)
    for (int z = -grid.width; z <= grid.width; ++z) {
      if (((z + n) & 1) != 0) continue;
      out << n << ',' << z << ',' << (grid.is_open(z, n) ? 1 : 0) << ','
          << (wet.contains(n, z) ? 1 : 0) << '\n';
    }
  return out.str();
}

}  // namespace patchcp
