//
// Copyright 2026 The dperm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef DPERM_RNG_H_
#define DPERM_RNG_H_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dperm {

// SplitMix64 finalizer. Used to derive independent child seeds so that a
// run's randomness depends only on (parent seed, key) and never on the order
// in which streams are consumed.
inline uint64_t MixSeed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t DeriveSeed(uint64_t parent, std::initializer_list<uint64_t> keys) {
  uint64_t s = MixSeed(parent);
  for (uint64_t k : keys) s = MixSeed(s ^ MixSeed(k));
  return s;
}

// Stream tags for DeriveSeed.
enum class SeedTag : uint64_t {
  kSplit = 0x5350,
  kInit = 0x494e,
  kInputNoise = 0x4950,
  kOutputNoise = 0x4f50,
  kObjectiveNoise = 0x4f42,
  kGradientNoise = 0x4744,
  kRepetition = 0x5245,
  kSynthetic = 0x5359,
};

inline uint64_t DeriveSeed(uint64_t parent, SeedTag tag) {
  return DeriveSeed(parent, {static_cast<uint64_t>(tag)});
}

using Engine = std::mt19937_64;

}  // namespace dperm

#endif  // DPERM_RNG_H_
