#ifndef ESLAB_RNG_HPP
#define ESLAB_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>

namespace eslab {

// Philox4x32-10 counter-based generator. A draw is a pure function of
// (seed, counter), so any worker layout produces identical streams.
namespace philox {

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline std::array<std::uint32_t, 4> block(std::uint64_t key, std::uint64_t c0, std::uint64_t c1) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  std::uint32_t k0 = static_cast<std::uint32_t>(key);
  std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
  std::array<std::uint32_t, 4> c = {
      static_cast<std::uint32_t>(c0), static_cast<std::uint32_t>(c0 >> 32),
      static_cast<std::uint32_t>(c1), static_cast<std::uint32_t>(c1 >> 32)};
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, c[0], hi0, lo0);
    mulhilo(kMul1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return c;
}

}  // namespace philox

// Stream tags keep independent uses of the same seed from colliding.
enum class RngStream : std::uint64_t {
  GaussianSampling = 1,
  Langevin = 2,
  ScenarioDraw = 3,
  TestProbes = 4,
};

namespace detail {

inline double to_unit(std::uint64_t bits) {
  // 53 random bits centered in (0,1); never returns 0 or 1, safe under log.
  return (static_cast<double>(bits >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

inline std::uint64_t join(std::uint32_t lo, std::uint32_t hi) {
  return static_cast<std::uint64_t>(lo) | (static_cast<std::uint64_t>(hi) << 32);
}

}  // namespace detail

struct UniformPair {
  double u0;
  double u1;
};

struct NormalPair {
  double z0;
  double z1;
};

// One block -> two uniforms. Counter layout: c0 carries the step/index axis,
// c1 packs (stream | item), so every (seed, stream, step, item) is distinct.
inline UniformPair uniform_pair(std::uint64_t seed, RngStream stream, std::uint64_t step,
                                std::uint64_t item) {
  const std::uint64_t c1 = (static_cast<std::uint64_t>(stream) << 56) | (item & 0x00FFFFFFFFFFFFFFull);
  const auto b = philox::block(seed, step, c1);
  return {detail::to_unit(detail::join(b[0], b[1])), detail::to_unit(detail::join(b[2], b[3]))};
}

inline double uniform01(std::uint64_t seed, RngStream stream, std::uint64_t step, std::uint64_t item) {
  return uniform_pair(seed, stream, step, item).u0;
}

// Box-Muller on one counter block.
inline NormalPair normal_pair(std::uint64_t seed, RngStream stream, std::uint64_t step,
                              std::uint64_t item) {
  const UniformPair u = uniform_pair(seed, stream, step, item);
  const double r = std::sqrt(-2.0 * std::log(u.u0));
  const double phi = 6.283185307179586476925286766559 * u.u1;
  return {r * std::cos(phi), r * std::sin(phi)};
}

}  // namespace eslab

#endif
