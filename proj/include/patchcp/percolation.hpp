#ifndef PATCHCP_PERCOLATION_HPP
#define PATCHCP_PERCOLATION_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "patchcp/isolated.hpp"
#include "patchcp/util.hpp"

namespace patchcp {

/**
 * Oriented site percolation on the staggered lattice {(z, n): z + n even},
 * with edges (z, n) -> (z +- 1, n + 1), lateral boundary |z| <= width, and a
 * k-dependent openness field: every integer pair (z, n) carries an i.i.d.
 * uniform determined by (seed, z, n), and a site is open iff all uniforms in
 * the square window of radius ceil(k/2) around it reach the calibrated
 * threshold.  Sites at graph distance > k have disjoint windows, hence are
 * independent, and the marginal closed probability is exactly gamma.
 */
struct OrientedGrid {
  double gamma = 0.0;  ///< closed density in [0, 1]
  int k = 0;           ///< dependency range (0 = i.i.d.)
  int depth = 1;       ///< levels 0..depth
  int width = 4;       ///< |z| <= width
  uint64_t seed = 0;

  int window_radius() const { return (k + 1) / 2; }
  bool in_grid(int z, int n) const;
  double site_uniform(int z, int n) const;
  bool is_open(int z, int n) const;
};

OrientedGrid make_grid(double gamma, int k, int depth, int width, uint64_t seed);

/// Wet sites per level, each level sorted ascending in z.
struct WetSet {
  std::vector<std::vector<int>> levels;
  bool contains(int n, int z) const;
};

/**
 * Level-by-level wet-set evolution from the level-0 set w0 (even z only):
 * W_{n+1} = {z : z-1 or z+1 in W_n} intersected with the open sites of
 * level n+1 inside the lateral boundary.
 */
WetSet evolve_wet(const OrientedGrid& grid, const std::vector<int>& w0);

/**
 * Monte Carlo estimate of P(W_depth nonempty) over independent grids.
 * width < 0 selects the default 4 * depth, wide enough to keep the unit-slope
 * growth cone away from the boundary.
 */
McEstimate cluster_survival_mc(double gamma, int k, int depth, std::size_t replicas,
                               const std::vector<int>& w0, uint64_t seed,
                               int width = -1, unsigned threads = 0);

/**
 * Exact survival probability P(W_depth nonempty) for the i.i.d. field (k = 0)
 * by brute-force enumeration of all open/closed assignments of the sites
 * reachable from w0.  Throws if more than 24 sites would be enumerated.
 */
Rational survival_exact(const Rational& gamma, int depth, int width,
                        const std::vector<int>& w0);

/// Same probability via an independent subset-distribution recursion.
Rational survival_exact_dp(const Rational& gamma, int depth, int width,
                           const std::vector<int>& w0);

/**
 * Density of a seeded block-level "good event": runs the sampler on replica
 * indices 0..replicas-1 and returns the success frequency with its standard
 * error.  1 - mean is the closed density gamma to feed a percolation grid.
 */
McEstimate good_event_density(const std::function<bool(std::size_t)>& runner,
                              std::size_t replicas, unsigned threads = 0);

/// CSV dump "n,z,open,wet" over all grid sites.
std::string grid_csv(const OrientedGrid& grid, const WetSet& wet);

}  // namespace patchcp

#endif  // PATCHCP_PERCOLATION_HPP
