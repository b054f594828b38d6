#pragma once

#include "dlm/types.hpp"

#include <cstdint>
#include <limits>
#include <random>

namespace dlm {

// mt19937_64 output is fixed by the standard, but the library's distribution
// adapters are not, so the uniform/normal/shuffle transforms are pinned here:
// 53-bit uniforms, Box-Muller (cosine branch first), Fisher-Yates with
// rejection sampling. Byte-identical streams across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  double uniform() {  // [0, 1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  std::uint64_t below(std::uint64_t n) {  // unbiased integer in [0, n)
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t rem = (max % n + 1) % n;  // 2^64 mod n
    std::uint64_t x = eng_();
    while (rem != 0 && x > max - rem) x = eng_();
    return x % n;
  }

  Mat gaussian(Index rows, Index cols, double mean, double sd) {
    Mat m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = mean + sd * normal();
    return m;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::uint64_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dlm
