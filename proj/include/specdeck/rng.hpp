#pragma once

#include <cstdint>

namespace specdeck {

// splitmix64 finalizer; the fixed 64-bit mix used for draws, stream
// derivation and context hashing.
inline constexpr uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Uniform in [0, 1) from 64 random bits, 53-bit resolution.
inline constexpr double u01_from_bits(uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Counter-based generator: draw k is a pure function of (seed, k), using the
// splitmix64 finalizer. Because draws are keyed rather than consumed from
// hidden state, a stream can be repositioned with seek() and replayed
// bit-identically, which is what the decoding schedulers rely on.
//
// Stream discipline for decoding: a root rng is split once per model role and
// every draw is keyed by the absolute sequence position it decides:
//   draft stream    - draft-token draws, key = position of the drafted token
//   target stream   - bonus/correction draws, key = position of the emitted token
//   verifier stream - acceptance-test uniforms, key = position under test
// Keyed draws make the randomness consumed by a decision independent of round
// boundaries and of any speculative work that later gets discarded, so the
// serial loop, the virtual-clock scheduler and the two-worker scheduler all
// see the same values for the same logical decision.
class SeededRng {
 public:
  SeededRng() = default;
  explicit SeededRng(uint64_t seed) : seed_(seed) {}

  uint64_t next_u64() { return mix64(seed_ + kGolden * (1 + counter_++)); }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return u01_from_bits(next_u64()); }

  // Derived stream, disjoint from this one for distinct ids; counter starts at 0.
  SeededRng split(uint64_t stream) const {
    return SeededRng(mix64(seed_ ^ mix64(kWeyl * (stream + 1))));
  }

  // Position the stream so that the next draw is draw number `key`.
  void seek(uint64_t key) { counter_ = key; }

  uint64_t counter() const { return counter_; }
  uint64_t seed() const { return seed_; }

 private:
  static constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ull;
  static constexpr uint64_t kWeyl = 0xD1B54A32D192ED03ull;

  uint64_t seed_ = 0;
  uint64_t counter_ = 0;
};

// Stream ids; one logical stream per model role.
inline constexpr uint64_t kDraftStream = 1;
inline constexpr uint64_t kTargetStream = 2;
inline constexpr uint64_t kVerifierStream = 3;

}  // namespace specdeck
