#pragma once

#include <cstdint>
#include <random>

namespace qspec {

//! SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

//! Seed of substream `index` of `seed`; streams are keyed by index only.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept
{
  return mix64(mix64(seed) ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

//! Random stream with a portable uniform draw.
class RngStream
{
public:
  explicit RngStream(std::uint64_t seed)
    : engine_(seed)
  {}
  RngStream(std::uint64_t seed, std::uint64_t index)
    : engine_(derive_seed(seed, index))
  {}

  //! Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  //! Uniform on (0, 1), for inverse-CDF sampling.
  double open_uniform()
  {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t next() { return engine_(); }

private:
  std::mt19937_64 engine_;
};

} // namespace qspec
