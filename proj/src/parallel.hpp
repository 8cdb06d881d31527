#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace simile::detail {

/// Runs fn(worker, chunk) for every chunk; worker w takes chunks w, w+W, ...
/// The first exception thrown by any worker is rethrown.
template <class Fn>
void for_each_chunk(std::size_t n_chunks, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n_chunks));
  if (workers == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) fn(std::size_t{0}, c);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = w; c < n_chunks; c += workers) fn(w, c);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace simile::detail
