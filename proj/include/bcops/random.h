#ifndef BCOPS_RANDOM_H_
#define BCOPS_RANDOM_H_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace bcops {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
inline std::uint64_t MixBits(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Child seed for a named sub-task. Every random stream in the library is
// derived from the run seed through this function, so a fixed --seed
// reproduces every draw.
inline std::uint64_t DeriveSeed(std::uint64_t seed,
                                std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = MixBits(seed);
  for (std::uint64_t p : path) s = MixBits(s ^ MixBits(p + 0x632be59bd9b4e019ULL));
  return s;
}

// Stream tags passed to DeriveSeed.
enum SeedTag : std::uint64_t {
  kTagTrainSplit = 1,
  kTagTestSplit = 2,
  kTagLearner = 3,
  kTagClassSplit = 4,
  kTagTree = 5,
  kTagTies = 6,
  kTagMixEstimate = 7,
  kTagSimulation = 8,
};

}  // namespace bcops

#endif  // BCOPS_RANDOM_H_
