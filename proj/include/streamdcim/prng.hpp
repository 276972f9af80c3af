#pragma once

#include <cstdint>

namespace streamdcim {

// splitmix64: tiny deterministic generator with a portable output sequence.
// Used for synthetic operands so runs are byte-stable across platforms
// (std::uniform_int_distribution is implementation-defined, mt19937 is not
// needed here).
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [lo, hi] via modulo; bias is irrelevant for synthetic data.
  int32_t next_in(int32_t lo, int32_t hi) {
    uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
    return lo + static_cast<int32_t>(next() % span);
  }

 private:
  uint64_t state_;
};

// Stable 64-bit string hash (FNV-1a) for deriving per-matrix seeds.
inline uint64_t stable_hash(const char* s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (; *s; ++s) h = (h ^ static_cast<unsigned char>(*s)) * 0x100000001b3ULL;
  return h;
}

}  // namespace streamdcim
