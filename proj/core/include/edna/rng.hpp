#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace edna {

/// Deterministic random source used everywhere randomness is needed
/// (parameter init, synthetic data, shuffles). Wraps mt19937_64 with
/// fixed transforms so streams are identical across platforms; the std
/// distribution classes are implementation-defined and never used.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Engine seeded from a (seed, stream) pair; used for per-epoch shuffles.
  static Rng substream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double next_unit() { return double(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  /// Standard normal via Box-Muller. No cached spare: one draw consumes
  /// exactly two engine outputs, which keeps resume accounting trivial.
  double normal();

  /// Uniform integer in [0, n) by rejection (unbiased).
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = std::size_t(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Engine state as the standard text dump; load() restores it exactly.
  std::string save_state() const;
  void load_state(const std::string& text);

private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to mix seeds for substreams.
std::uint64_t mix64(std::uint64_t x);

} // namespace edna
