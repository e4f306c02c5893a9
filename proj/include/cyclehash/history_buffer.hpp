#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "cyclehash/linalg.hpp"

namespace cyclehash {

/// Pool of previously generated samples fed to a discriminator in place of
/// the newest ones. Until full, every fresh sample is stored and returned.
/// Once full, each fresh sample is returned with probability 1/2; otherwise a
/// uniformly chosen stored sample is returned and replaced by the fresh one.
/// Capacity 0 disables the pool.
class HistoryBuffer {
 public:
  using Sample = std::vector<double>;

  explicit HistoryBuffer(std::size_t capacity = 50) : capacity_(capacity) {}

  Sample push_sample(Sample fresh, std::mt19937_64& rng);
  /// push_sample on every row; returns the rows to use for the update.
  Matrix push_batch(const Matrix& fresh, std::mt19937_64& rng);

  std::size_t size() const { return samples_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::vector<Sample>& samples() const { return samples_; }
  void restore(std::vector<Sample> samples);

 private:
  std::size_t capacity_;
  std::vector<Sample> samples_;
};

}  // namespace cyclehash
