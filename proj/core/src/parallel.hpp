#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace svq::detail {

/// Samples per reduction chunk. Chunk boundaries never depend on the thread
/// count, so per-chunk partial sums combined in chunk order are reproducible.
inline constexpr std::size_t kChunkSize = 256;

inline std::size_t resolve_threads(std::size_t requested) {
  if (requested != 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Calls fn(chunk_index, begin, end) for every chunk of [0, count).
template <typename Fn>
void for_each_chunk(std::size_t count, std::size_t threads, Fn&& fn) {
  const std::size_t chunks = (count + kChunkSize - 1) / kChunkSize;
  const std::size_t workers = std::min(resolve_threads(threads), chunks);
  auto run = [&](std::size_t worker) {
    for (std::size_t c = worker; c < chunks; c += workers)
      fn(c, c * kChunkSize, std::min(count, (c + 1) * kChunkSize));
  };
  if (workers <= 1) {
    run(0);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run, w);
  run(0);
}

}  // namespace svq::detail
