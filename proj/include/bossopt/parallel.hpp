#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace bossopt::par {

// Worker pool size: min(omp_get_max_threads(), BOSS_OPT_THREADS).
int max_threads();

// When true every kernel below runs its plain serial path. The numerical
// result is identical either way: reductions always use the same fixed block
// decomposition, so sums do not depend on the thread count or schedule.
void set_serial_mode(bool serial);
bool serial_mode();

std::size_t block_size_for(std::size_t n);

// Independent iterations over [0, n). Bodies must not share mutable state.
void for_each_index(std::size_t n, const std::function<void(std::size_t)>& body);

// Deterministic blocked sum of term(i) over [0, n).
double block_sum(std::size_t n, const std::function<double(std::size_t)>& term);

// Deterministic blocked accumulation of dim-vectors: body(i, acc) adds term i
// into acc. Block partials are combined in block order; out is overwritten.
void block_vec_sum(std::size_t n, std::size_t dim,
                   const std::function<void(std::size_t, std::span<double>)>& body,
                   std::span<double> out);

}  // namespace bossopt::par
