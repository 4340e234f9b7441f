#ifndef INTRIN_UTIL_HPP
#define INTRIN_UTIL_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

namespace intrin {

// Deterministic helpers shared by rendering, dataset generation and network
// init. Raw mt19937_64 output is mapped to [0,1) directly so results do not
// depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return double(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // open interval (lo, hi): resample the endpoints away
  double uniform_open(double lo, double hi) {
    double v;
    do {
      v = uniform(lo, hi);
    } while (v <= lo || v >= hi);
    return v;
  }
  std::uint64_t next_u64() { return eng_(); }
  std::uint32_t below(std::uint32_t n) {
    return std::uint32_t(eng_() % n);  // negligible bias at our ranges
  }
  double normal() {
    // Box-Muller, deterministic
    const double u1 = uniform_open(0.0, 1.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::mt19937_64 eng_;
};

// splitmix-style mixing for deriving per-object / per-sample seeds
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return mix_seed(a, h);
}

// Write-to-temp-then-rename so interrupted runs never leave truncated files.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace intrin

#endif  // INTRIN_UTIL_HPP
