#pragma once

#include <array>
#include <cstdint>

#include "lsd/tensor.hpp"

namespace lsd {

/// Counter-based generator (Philox4x32-10) keyed by (seed, stream).
///
/// Output depends only on the key and the number of draws made so far, so two
/// generators with the same seed and stream produce the same sequence, and
/// split() hands out independent substreams for per-sample or per-chain work.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  double normal();
  /// Uniform on {0, ..., n-1}; n > 0.
  std::size_t uniform_index(std::size_t n);

  Rng split(std::uint64_t stream_id) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int block_pos_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// I.i.d. standard normal entries.
Tensor gaussian(Rng& rng, const Shape& shape);
/// I.i.d. uniform entries on [lo, hi).
Tensor uniform(Rng& rng, const Shape& shape, double lo = 0.0, double hi = 1.0);

}  // namespace lsd
