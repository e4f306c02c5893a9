#include "cyclehash/history_buffer.hpp"

#include "cyclehash/errors.hpp"
#include "cyclehash/tensor.hpp"

namespace cyclehash {

HistoryBuffer::Sample HistoryBuffer::push_sample(Sample fresh, std::mt19937_64& rng) {
  if (capacity_ == 0) return fresh;
  if (samples_.size() < capacity_) {
    samples_.push_back(fresh);
    return fresh;
  }
  if (uniform01(rng) < 0.5) return fresh;
  std::uniform_int_distribution<std::size_t> pick(0, capacity_ - 1);
  const std::size_t slot = pick(rng);
  Sample old = std::move(samples_[slot]);
  samples_[slot] = std::move(fresh);
  return old;
}

Matrix HistoryBuffer::push_batch(const Matrix& fresh, std::mt19937_64& rng) {
  Matrix out(fresh.rows(), fresh.cols());
  for (std::size_t i = 0; i < fresh.rows(); ++i) {
    const auto row = fresh.row(i);
    const Sample used = push_sample(Sample(row.begin(), row.end()), rng);
    if (used.size() != fresh.cols()) {
      throw ShapeError("HistoryBuffer: stored sample has a different width");
    }
    std::copy(used.begin(), used.end(), out.row(i).begin());
  }
  return out;
}

void HistoryBuffer::restore(std::vector<Sample> samples) {
  if (samples.size() > capacity_) {
    throw std::invalid_argument("HistoryBuffer::restore: more samples than capacity");
  }
  samples_ = std::move(samples);
}

}  // namespace cyclehash
