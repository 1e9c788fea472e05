#pragma once

#include <cmath>
#include <cstdint>

namespace qwork {

// Counter-mode generator built on the SplitMix64 finalizer.  Each output is
// mix(key + counter), so the stream is a pure function of (key, counter) and
// bit-reproducible across platforms and thread schedules.  Keys are derived
// from (master_seed, sweep_index, trial_index) so every trial owns an
// independent stream regardless of execution order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static CounterRng stream(std::uint64_t master_seed, std::uint64_t sweep_index,
                           std::uint64_t trial_index) {
    return CounterRng(mix(mix(mix(master_seed) + sweep_index) + trial_index));
  }

  std::uint64_t next_u64() { return mix(key_ + counter_++); }

  // 53-bit mantissa uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the spare is cached so a stream of
  // gaussians consumes one uniform pair per two values.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Factory for per-trial streams below a fixed (master seed, sweep index).
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t sweep_index)
      : master_(master_seed), sweep_(sweep_index) {}

  CounterRng trial(std::uint64_t trial_index) const {
    return CounterRng::stream(master_, sweep_, trial_index);
  }

  std::uint64_t master_seed() const { return master_; }
  std::uint64_t sweep_index() const { return sweep_; }

 private:
  std::uint64_t master_;
  std::uint64_t sweep_;
};

}  // namespace qwork
