#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cratergan {

/// Invalid user input: bad config keys, violated preconditions, malformed
/// files. The CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure while executing a valid request (I/O, non-finite training loss).
/// The CLI maps this to exit code 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major single-channel image. Pixel (x, y) covers the unit square
/// [x, x+1) x [y, y+1); its center is at (x + 0.5, y + 0.5).
template <typename T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int w, int h, T fill = T{})
      : width(w), height(h),
        data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t size() const { return data.size(); }
  bool same_shape(int w, int h) const { return width == w && height == h; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Grayscale image with values in [0, 1].
using Image = Grid<float>;

/// Deterministic 64-bit generator (splitmix64). Used instead of the standard
/// distributions so that sampled sequences are identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n));
  }

  /// Standard normal (Box-Muller, one draw per call).
  double normal();

  /// Derives an independent stream for a sub-task.
  Rng fork(std::uint64_t salt) {
    return Rng(mix(next_u64() ^ mix(salt + 0x632BE59BD9B4E019ULL)));
  }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// In-place Fisher-Yates shuffle driven by Rng.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = rng.below(i);
    std::swap(v[i - 1], v[j]);
  }
}

/// Stable 64-bit FNV-1a digest.
std::uint64_t fnv1a64(const std::string& text);
/// fnv1a64 rendered as 16 hex chars.
std::string fnv1a_hex(const std::string& text);

/// Seed for the index-th item of a named sub-task of a run.
inline std::uint64_t derive_seed(std::uint64_t global, const std::string& tag,
                                 std::uint64_t index = 0) {
  return Rng::mix(global ^ Rng::mix(fnv1a64(tag) + index));
}

}  // namespace cratergan
