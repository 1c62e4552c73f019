#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace muxmem::detail {

/// Worker count: `requested` if non-zero, else hardware concurrency; capped by
/// the MUXMEM_THREADS environment variable when set.
inline unsigned resolve_workers(unsigned requested = 0) {
  unsigned workers = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MUXMEM_THREADS"); env != nullptr && *env != '\0') {
    try {
      const unsigned long cap = std::stoul(env);
      if (cap > 0) workers = std::min<unsigned>(workers, static_cast<unsigned>(cap));
    } catch (const std::exception&) {
      // ignore malformed values
    }
  }
  return std::max(1u, workers);
}

/// Splits [0, n) into `workers` contiguous chunks and runs `body(chunk, begin, end)`
/// on each. Chunk boundaries depend only on (n, workers).
template <typename Body>
void parallel_chunks(std::size_t n, unsigned workers, Body&& body) {
  workers = static_cast<unsigned>(std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1)));
  if (workers == 1) {
    body(0u, std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  threads.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = n * w / workers;
    const std::size_t end = n * (w + 1) / workers;
    threads.emplace_back([&, w, begin, end] {
      try {
        body(w, begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace muxmem::detail
