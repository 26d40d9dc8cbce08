#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace pgplan {

// Deterministic RNG wrapper. All distribution math is done here rather than
// with std:: distributions, whose output is implementation-defined; artifacts
// must be byte-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

  // standard normal via Box-Muller; caches the sine partner
  double normal();

  // uniform integer in [0, bound) without modulo bias
  std::uint64_t below(std::uint64_t bound);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Shortest round-trip decimal formatting (all numeric file artifacts go
// through this so that write→parse is bit-exact and output is stable).
std::string fmt_double(double v);

// Strict full-token parse; returns nullopt on trailing garbage, suffixes, etc.
std::optional<double> parse_double(std::string_view token);

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Peak resident-set size of this process in MiB (VmHWM), if the platform
// exposes it.
std::optional<double> peak_memory_mib();

// Runs fn(begin, end) over [0, n) split across `threads` workers. With
// threads <= 1 runs inline. Chunk boundaries are deterministic; callers must
// keep per-index writes disjoint so results do not depend on thread count.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace pgplan
