#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>

namespace regdiv {

// splitmix64 finalizer; turns (seed, stream index) into well-separated seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Independent generator for stream `index` of a run seeded with `seed`.
// Antithetic streams mirror their twin: normals change sign and the
// uniforms used for clocks are reflected.
class PathRng {
 public:
  PathRng(std::uint64_t seed, std::uint64_t index, bool mirror = false)
      : eng_(mix64(seed ^ mix64(index))), mirror_(mirror) {}

  double normal() {
    const double z = normal_(eng_);
    return mirror_ ? -z : z;
  }
  // Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1p-53; }
  // Exp(1), antithetic under mirroring.
  double exponential() {
    const double u = uniform();
    return mirror_ ? -std::log1p(-u) : -std::log(u);
  }

 private:
  std::mt19937_64 eng_;
  boost::random::normal_distribution<double> normal_;
  bool mirror_;
};

}  // namespace regdiv
