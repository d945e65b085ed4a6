#ifndef PATCHCP_RNG_HPP
#define PATCHCP_RNG_HPP

#include <cmath>
#include <cstdint>

namespace patchcp {

/**
 * Counter-based pseudo-random generator.
 *
 * The i-th output is mix64(key + i*GAMMA) where mix64 is the SplitMix64
 * finalizer.  Because the output is a pure function of (key, counter), a
 * stream can be replayed from any point, and independent substreams are
 * derived by hashing (key, stream-id) pairs instead of by jumping ahead.
 * Replica r of a Monte Carlo run uses substream(master, r); every label /
 * lattice-site stream used by the dual processes and percolation fields is
 * derived the same way.  Integer arithmetic only, so sequences are identical
 * across platforms.
 */
class CounterRng {
 public:
  CounterRng() : key_(0), ctr_(0) {}
  explicit CounterRng(uint64_t key) : key_(key), ctr_(0) {}

  /// SplitMix64 finalizer: bijective avalanche mix of a 64-bit word.
  static uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Deterministic substream key for (parent key, stream id).
  static uint64_t substream(uint64_t key, uint64_t id) {
    return mix64(key ^ mix64(id ^ 0x5851f42d4c957f2dull));
  }

  CounterRng split(uint64_t id) const { return CounterRng(substream(key_, id)); }

  uint64_t next_u64() { return mix64(key_ + 0x9e3779b97f4a7c15ull * (++ctr_)); }

  /// Uniform double in [0,1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in {0, ..., n-1}; n must be positive.
  uint64_t next_below(uint64_t n) {
    return static_cast<uint64_t>(next_unit() * static_cast<double>(n)) % n;
  }

  /// Exponential with the given rate (rate > 0).
  double next_exponential(double rate) {
    double u = next_unit();
    return -std::log1p(-u) / rate;
  }

  uint64_t key() const { return key_; }
  uint64_t counter() const { return ctr_; }

 private:
  uint64_t key_;
  uint64_t ctr_;
};

}  // namespace patchcp

#endif  // PATCHCP_RNG_HPP
