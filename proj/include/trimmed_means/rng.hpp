#ifndef TRIMMED_MEANS_RNG_HPP
#define TRIMMED_MEANS_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace trimmed_means {

using Rng = std::mt19937_64;

// splitmix64 finalizer; decorrelates nearby seed inputs.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ (b + 0x9e3779b97f4a7c15ULL));
}

template <class... Rest>
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                       Rest... rest) {
  return mix_seed(mix_seed(a, b), c, rest...);
}

// Deterministic stream derivation: any worker evaluating unit (a, b, ...)
// gets the same generator regardless of scheduling.
template <class... Parts>
Rng make_stream(std::uint64_t seed, Parts... parts) {
  if constexpr (sizeof...(parts) == 0)
    return Rng(splitmix64(seed));
  else
    return Rng(mix_seed(seed, static_cast<std::uint64_t>(parts)...));
}

// FNV-1a, used to fold scenario ids into seed streams.
inline std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace trimmed_means

#endif
