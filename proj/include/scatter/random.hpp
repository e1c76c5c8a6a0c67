#pragma once

#include <cstdint>
#include <random>

namespace scatter {

// One splitmix64 step: advances state and returns the next output word.
std::uint64_t splitmix64(std::uint64_t& state);

// Decorrelated child seed for a named substream of a master seed. Equal
// (seed, tag) pairs always map to the same child; distinct tags give
// statistically independent streams.
std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t tag);

namespace stream_tag {
inline constexpr std::uint64_t reference = 1;
inline constexpr std::uint64_t with_atom = 2;
inline constexpr std::uint64_t bootstrap = 3;
}  // namespace stream_tag

// Deterministic random source. std::mt19937_64 output is fixed by the
// standard, and the uniform mapping and Poisson sampler both live here, so
// equal seeds give identical draws on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform();

  // Poisson(mean) via multiplicative inversion for small means and Hormann's
  // PTRS transformed-rejection sampler otherwise.
  std::int64_t poisson(double mean);

 private:
  std::mt19937_64 engine_;
};

}  // namespace scatter
