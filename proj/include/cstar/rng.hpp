#pragma once

#include <cstdint>
#include <random>

namespace cstar {

/// Seedable random stream with deterministic key-derived substreams.
///
/// Each substream is keyed by (seed, a, b); derivation mixes the key with
/// splitmix64 so replications can run in any order (or concurrently) and
/// still produce identical draws.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : key_(mix(0x9e3779b97f4a7c15ull, seed)) { reseed(); }

  /// Child stream for e.g. (cell index, replication index).
  RngStream derive(std::uint64_t a, std::uint64_t b = 0) const {
    return RngStream(mix(mix(key_, a ^ 0xd1b54a32d192ed03ull), b ^ 0x8cb92ba72f3d8dd7ull), Tag{});
  }

  double normal() { return normal_(gen_); }
  double normal(double sd) { return sd * normal_(gen_); }
  double uniform() { return uniform_(gen_); }  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Student-t draw with df degrees of freedom, unit scale.
  double student_t(double df) { return student_t_(gen_, std::student_t_distribution<double>::param_type(df)); }
  std::uint64_t next_u64() { return gen_(); }

 private:
  struct Tag {};
  RngStream(std::uint64_t key, Tag) : key_(key) { reseed(); }

  void reseed() {
    gen_.seed(key_);
    normal_.reset();
    student_t_.reset();
  }

  static std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    // splitmix64 finalizer over h ^ v
    std::uint64_t z = (h ^ v) + 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::student_t_distribution<double> student_t_{5.0};
};

}  // namespace cstar
