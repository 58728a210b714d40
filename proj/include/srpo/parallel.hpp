// Copyright 2026 The SRPO Lab Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SRPO_PARALLEL_HPP_
#define SRPO_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace srpo {

/// Worker cap: SRPO_LAB_THREADS if set, else the hardware concurrency.
int worker_count();

/// Runs fn(i) for i in [0, n). Each index is processed by exactly one worker;
/// callers write results into per-index slots and reduce in index order, so
/// output never depends on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace srpo

#endif  // SRPO_PARALLEL_HPP_
