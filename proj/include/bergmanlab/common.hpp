#pragma once

#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <thread>
#include <vector>

namespace bergman {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

/// Global worker count for node-parallel loops. Fixed per run so that
/// reductions are bitwise reproducible at a given thread count.
inline int& thread_count_ref() {
  static int n = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  return n;
}
inline int thread_count() { return thread_count_ref(); }
inline void set_thread_count(int n) {
  if (n < 1) throw std::invalid_argument("thread count must be >= 1");
  thread_count_ref() = n;
}

/// Runs body(begin, end) over [0, count) split into one contiguous range per
/// worker. Each worker accumulates into its own Acc; partials are combined in
/// worker order, so results are deterministic for a fixed thread count and
/// agree across thread counts up to reordering roundoff.
template <class Acc, class Init, class Body, class Combine>
void parallel_ranges(std::size_t count, Acc& total, Init init, Body body, Combine combine) {
  const int nt = std::min<std::size_t>(thread_count(), std::max<std::size_t>(count, 1));
  if (nt <= 1) {
    body(total, std::size_t{0}, count);
    return;
  }
  std::vector<Acc> partials;
  partials.reserve(nt);
  for (int t = 0; t < nt; ++t) partials.push_back(init());
  const std::size_t per = (count + nt - 1) / nt;
  std::vector<std::thread> workers;
  workers.reserve(nt);
  for (int t = 0; t < nt; ++t) {
    const std::size_t b = std::min<std::size_t>(t * per, count);
    const std::size_t e = std::min<std::size_t>(b + per, count);
    workers.emplace_back([&, t, b, e] { body(partials[t], b, e); });
  }
  for (auto& w : workers) w.join();
  for (int t = 0; t < nt; ++t) combine(total, partials[t]);
}

/// Plain parallel for over index ranges (no reduction).
inline void parallel_for_ranges(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body) {
  int dummy = 0;
  parallel_ranges<int>(
      count, dummy, [] { return 0; },
      [&](int&, std::size_t b, std::size_t e) { body(b, e); }, [](int&, int) {});
}

/// Small deterministic PRNG for property tests (seed-stable across platforms,
/// unlike std distributions).
struct SplitMix64 {
  std::uint64_t s;
  explicit SplitMix64(std::uint64_t seed) : s(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  cplx complex_box(double r = 1.0) { return {uniform(-r, r), uniform(-r, r)}; }
};

inline int popcount32(std::uint32_t x) { return __builtin_popcount(x); }

}  // namespace bergman
