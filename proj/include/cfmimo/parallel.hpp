// cfmimo -- uplink cell-free massive MIMO spectral-efficiency simulator
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <armadillo>
#include <functional>

namespace cfmimo {

// Worker count: `requested` if nonzero, else the CFMIMO_WORKERS environment
// variable, else hardware concurrency.
unsigned resolve_workers(unsigned requested);

// Runs fn(0..n_tasks-1) on up to `workers` threads. Tasks write into
// preallocated slots; callers reduce in fixed task order afterwards, so the
// schedule never changes results.
void run_tasks(arma::uword n_tasks, unsigned workers, const std::function<void(arma::uword)>& fn);

} // namespace cfmimo
