#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace kbt {

/// Runs body(i) for i in [0, n) over `workers` threads in contiguous shards.
///
/// Each index must write only its own output slot; with that discipline the
/// result is identical for every worker count.
template <typename Body>
void parallel_for(std::size_t n, int workers, Body&& body) {
  const std::size_t shards = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
  if (shards <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mu;
  {
    std::vector<std::jthread> threads;
    threads.reserve(shards);
    for (std::size_t s = 0; s < shards; ++s) {
      const std::size_t begin = n * s / shards;
      const std::size_t end = n * (s + 1) / shards;
      threads.emplace_back([&, begin, end] {
        try {
          for (std::size_t i = begin; i < end; ++i) body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace kbt
