#pragma once

// Dense numeric kernels. Every kernel has a serial reference implementation
// and an OpenMP implementation. Both accumulate in the same order, so their
// results are bit-identical and either may back the tensor library.

#include <cstddef>
#include <cstdint>
#include <span>

namespace cyclehash::kernels {

enum class Backend { kSerial, kOpenMP };

/// Backend used by the tensor library and retrieval code. Defaults to kOpenMP.
Backend default_backend();
void set_default_backend(Backend backend);

/// Minimum m*n*k before gemm fans out to threads.
inline constexpr std::size_t kParallelGemmThreshold = 1u << 15;

/// C (m x n) = op(A) * op(B), or C += ... when accumulate is set.
/// op(A) is m x k; with trans_a, A is stored k x m. Likewise for B.
struct GemmArgs {
  bool trans_a = false;
  bool trans_b = false;
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  bool accumulate = false;
};

namespace serial {
void gemm(const GemmArgs& args, std::span<const double> a,
          std::span<const double> b, std::span<double> c);
void hamming_row(std::span<const std::uint64_t> query,
                 std::span<const std::uint64_t> database, std::size_t words,
                 std::span<std::uint32_t> out);
}  // namespace serial

namespace parallel {
void gemm(const GemmArgs& args, std::span<const double> a,
          std::span<const double> b, std::span<double> c);
void hamming_row(std::span<const std::uint64_t> query,
                 std::span<const std::uint64_t> database, std::size_t words,
                 std::span<std::uint32_t> out);
}  // namespace parallel

/// Dispatches on default_backend().
void gemm(const GemmArgs& args, std::span<const double> a,
          std::span<const double> b, std::span<double> c);

/// Hamming distances between one packed query (`words` 64-bit words) and
/// every packed code in `database` (row-major, `words` per code).
void hamming_row(std::span<const std::uint64_t> query,
                 std::span<const std::uint64_t> database, std::size_t words,
                 std::span<std::uint32_t> out);

int max_threads();

}  // namespace cyclehash::kernels
