#include "bossopt/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bossopt::par {

namespace {

std::atomic<bool> g_serial{false};

int read_thread_cap() {
#ifdef _OPENMP
  int n = omp_get_max_threads();
#else
  int n = 1;
#endif
  if (const char* env = std::getenv("BOSS_OPT_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return std::max(1, n);
}

}  // namespace

int max_threads() {
  static const int cached = read_thread_cap();
  return cached;
}

void set_serial_mode(bool serial) { g_serial.store(serial); }
bool serial_mode() { return g_serial.load(); }

// Fixed function of n only; never of the thread count. At most 64 blocks so
// the per-block partial buffers stay cheap to zero and combine.
std::size_t block_size_for(std::size_t n) {
  return std::max<std::size_t>(32, (n + 63) / 64);
}

void for_each_index(std::size_t n, const std::function<void(std::size_t)>& body) {
  if (serial_mode() || max_threads() == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    body(static_cast<std::size_t>(i));
#else
  for (std::size_t i = 0; i < n; ++i) body(i);
#endif
}

double block_sum(std::size_t n, const std::function<double(std::size_t)>& term) {
  if (n == 0) return 0.0;
  const std::size_t bs = block_size_for(n);
  const std::size_t nblocks = (n + bs - 1) / bs;
  std::vector<double> partial(nblocks, 0.0);
  for_each_index(nblocks, [&](std::size_t b) {
    const std::size_t lo = b * bs;
    const std::size_t hi = std::min(n, lo + bs);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += term(i);
    partial[b] = s;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

void block_vec_sum(std::size_t n, std::size_t dim,
                   const std::function<void(std::size_t, std::span<double>)>& body,
                   std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (n == 0) return;
  const std::size_t bs = block_size_for(n);
  const std::size_t nblocks = (n + bs - 1) / bs;
  std::vector<double> partial(nblocks * dim, 0.0);
  for_each_index(nblocks, [&](std::size_t b) {
    const std::size_t lo = b * bs;
    const std::size_t hi = std::min(n, lo + bs);
    std::span<double> acc(partial.data() + b * dim, dim);
    for (std::size_t i = lo; i < hi; ++i) body(i, acc);
  });
  for (std::size_t b = 0; b < nblocks; ++b) {
    const double* p = partial.data() + b * dim;
    for (std::size_t j = 0; j < dim; ++j) out[j] += p[j];
  }
}

}  // namespace bossopt::par
