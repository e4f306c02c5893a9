#include "cyclehash/kernels.hpp"

#include <atomic>
#include <bit>

#include "cyclehash/errors.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace cyclehash::kernels {

namespace {

std::atomic<Backend> g_backend{Backend::kOpenMP};

void check_gemm(const GemmArgs& args, std::span<const double> a,
                std::span<const double> b, std::span<double> c) {
  if (a.size() != args.m * args.k || b.size() != args.k * args.n ||
      c.size() != args.m * args.n) {
    throw ShapeError("gemm: buffer sizes do not match m, n, k");
  }
}

// Element (i, t) of op(A) where op(A) is m x k.
inline double elem_a(const GemmArgs& g, std::span<const double> a,
                     std::size_t i, std::size_t t) {
  return g.trans_a ? a[t * g.m + i] : a[i * g.k + t];
}

inline double elem_b(const GemmArgs& g, std::span<const double> b,
                     std::size_t t, std::size_t j) {
  return g.trans_b ? b[j * g.k + t] : b[t * g.n + j];
}

// One output row, summing over t in ascending order. Shared by both backends
// so that their rounding is identical.
inline void gemm_row(const GemmArgs& g, std::span<const double> a,
                     std::span<const double> b, std::span<double> c,
                     std::size_t i) {
  double* crow = c.data() + i * g.n;
  if (!g.accumulate) {
    for (std::size_t j = 0; j < g.n; ++j) crow[j] = 0.0;
  }
  if (!g.trans_b) {
    for (std::size_t t = 0; t < g.k; ++t) {
      const double av = elem_a(g, a, i, t);
      const double* brow = b.data() + t * g.n;
      for (std::size_t j = 0; j < g.n; ++j) crow[j] += av * brow[j];
    }
  } else {
    for (std::size_t j = 0; j < g.n; ++j) {
      double acc = crow[j];
      const double* bcol = b.data() + j * g.k;
      for (std::size_t t = 0; t < g.k; ++t) acc += elem_a(g, a, i, t) * bcol[t];
      crow[j] = acc;
    }
  }
}

inline std::uint32_t hamming_one(const std::uint64_t* q, const std::uint64_t* d,
                                 std::size_t words) {
  std::uint32_t dist = 0;
  for (std::size_t w = 0; w < words; ++w) {
    dist += static_cast<std::uint32_t>(std::popcount(q[w] ^ d[w]));
  }
  return dist;
}

void check_hamming(std::span<const std::uint64_t> query,
                   std::span<const std::uint64_t> database, std::size_t words,
                   std::span<std::uint32_t> out) {
  if (words == 0 || query.size() != words ||
      database.size() != out.size() * words) {
    throw ShapeError("hamming_row: buffer sizes do not match word count");
  }
}

}  // namespace

Backend default_backend() { return g_backend.load(); }
void set_default_backend(Backend backend) { g_backend.store(backend); }

int max_threads() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace serial {

void gemm(const GemmArgs& args, std::span<const double> a,
          std::span<const double> b, std::span<double> c) {
  check_gemm(args, a, b, c);
  // Reference triple loop, t innermost per (i, j).
  for (std::size_t i = 0; i < args.m; ++i) {
    for (std::size_t j = 0; j < args.n; ++j) {
      double acc = args.accumulate ? c[i * args.n + j] : 0.0;
      for (std::size_t t = 0; t < args.k; ++t) {
        acc += elem_a(args, a, i, t) * elem_b(args, b, t, j);
      }
      c[i * args.n + j] = acc;
    }
  }
}

void hamming_row(std::span<const std::uint64_t> query,
                 std::span<const std::uint64_t> database, std::size_t words,
                 std::span<std::uint32_t> out) {
  check_hamming(query, database, words, out);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t dist = 0;
    for (std::size_t w = 0; w < words; ++w) {
      std::uint64_t x = query[w] ^ database[i * words + w];
      while (x != 0) {
        x &= x - 1;
        ++dist;
      }
    }
    out[i] = dist;
  }
}

}  // namespace serial

namespace parallel {

void gemm(const GemmArgs& args, std::span<const double> a,
          std::span<const double> b, std::span<double> c) {
  check_gemm(args, a, b, c);
  const auto rows = static_cast<std::ptrdiff_t>(args.m);
  const bool fan_out = args.m * args.n * args.k >= kParallelGemmThreshold;
#pragma omp parallel for schedule(static) if (fan_out)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    gemm_row(args, a, b, c, static_cast<std::size_t>(i));
  }
}

void hamming_row(std::span<const std::uint64_t> query,
                 std::span<const std::uint64_t> database, std::size_t words,
                 std::span<std::uint32_t> out) {
  check_hamming(query, database, words, out);
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[i] = hamming_one(query.data(),
                         database.data() + static_cast<std::size_t>(i) * words,
                         words);
  }
}

}  // namespace parallel

void gemm(const GemmArgs& args, std::span<const double> a,
          std::span<const double> b, std::span<double> c) {
  if (default_backend() == Backend::kSerial) {
    serial::gemm(args, a, b, c);
  } else {
    parallel::gemm(args, a, b, c);
  }
}

void hamming_row(std::span<const std::uint64_t> query,
                 std::span<const std::uint64_t> database, std::size_t words,
                 std::span<std::uint32_t> out) {
  if (default_backend() == Backend::kSerial) {
    serial::hamming_row(query, database, words, out);
  } else {
    parallel::hamming_row(query, database, words, out);
  }
}

}  // namespace cyclehash::kernels
