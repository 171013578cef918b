#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace acipf {

// Runs body(begin, end) over contiguous chunks of [0, n). With threads <= 1
// everything runs inline on the caller. Bodies must only write to their own
// index range.
template <typename Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  if (threads <= 1 || n < 2 * static_cast<std::size_t>(threads)) {
    body(std::size_t{0}, n);
    return;
  }
  const std::size_t chunk = (n + threads - 1) / threads;
  std::vector<std::jthread> workers;
  workers.reserve(threads - 1);
  for (unsigned t = 1; t < threads; ++t) {
    const std::size_t begin = std::min(n, t * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    if (begin < end) workers.emplace_back([&body, begin, end] { body(begin, end); });
  }
  body(std::size_t{0}, std::min(n, chunk));
}

}  // namespace acipf
