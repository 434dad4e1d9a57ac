#ifndef PROBF_PARALLEL_HPP
#define PROBF_PARALLEL_HPP

#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace probf {

/// Execution policy for the data-parallel kernels. Every kernel has a serial
/// reference path and an OpenMP path; both produce bit-identical results
/// (entrywise writes, integer reductions, or fixed-block summation), so the
/// policy only affects speed.
enum class Exec { Serial, Parallel };

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline bool in_parallel_region() {
#ifdef _OPENMP
  return omp_in_parallel() != 0;
#else
  return false;
#endif
}

/// Nested regions fall back to serial; outer-level parallelism (experiment
/// runs) wins over inner loops on the small core counts this targets.
inline bool use_omp(Exec mode) {
#ifdef _OPENMP
  return mode == Exec::Parallel && !in_parallel_region();
#else
  (void)mode;
  return false;
#endif
}

template <class F>
void parallel_for(std::size_t n, Exec mode, F&& body) {
  if (use_omp(mode)) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      body(static_cast<std::size_t>(i));
    }
#endif
  } else {
    for (std::size_t i = 0; i < n; ++i) body(i);
  }
}

template <class F>
void parallel_for_dynamic(std::size_t n, Exec mode, F&& body) {
  if (use_omp(mode)) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      body(static_cast<std::size_t>(i));
    }
#endif
  } else {
    for (std::size_t i = 0; i < n; ++i) body(i);
  }
}

/// Deterministic sum of term(i) for i in [0, n): terms are accumulated
/// serially inside fixed 1024-wide blocks and the block partials combined in
/// index order. The grouping is independent of the thread count, so the
/// floating-point result is identical for Serial and Parallel modes.
template <class F>
double block_sum(std::size_t n, Exec mode, F&& term) {
  constexpr std::size_t kBlock = 1024;
  const std::size_t n_blocks = (n + kBlock - 1) / kBlock;
  std::vector<double> partial(n_blocks, 0.0);
  parallel_for(n_blocks, mode, [&](std::size_t b) {
    const std::size_t lo = b * kBlock;
    const std::size_t hi = lo + kBlock < n ? lo + kBlock : n;
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += term(i);
    partial[b] = acc;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

/// Integer count of indices satisfying pred; reduction is exact so the
/// parallel path is trivially deterministic.
template <class F>
long long count_if_index(std::size_t n, Exec mode, F&& pred) {
  long long total = 0;
  if (use_omp(mode)) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : total)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      if (pred(static_cast<std::size_t>(i))) ++total;
    }
#endif
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (pred(i)) ++total;
    }
  }
  return total;
}

}  // namespace probf

#endif  // PROBF_PARALLEL_HPP
