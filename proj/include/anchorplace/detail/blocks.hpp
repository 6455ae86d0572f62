#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "anchorplace/common.hpp"

namespace anchorplace::detail {

/// Items are processed in fixed-size blocks; each block's partial result is
/// stored and the partials are folded in block order. The block layout never
/// depends on the thread count, so serial and parallel runs agree bit for bit.
template <class Acc, class BlockFn>
std::vector<Acc> run_blocks(std::size_t n_items, std::size_t block_size, Execution exec, BlockFn&& fn) {
  const std::size_t n_blocks = (n_items + block_size - 1) / block_size;
  std::vector<Acc> partial(n_blocks);
  const auto n = static_cast<std::ptrdiff_t>(n_blocks);
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t b = 0; b < n; ++b) {
      const std::size_t begin = static_cast<std::size_t>(b) * block_size;
      const std::size_t end = std::min(n_items, begin + block_size);
      partial[b] = fn(static_cast<std::size_t>(b), begin, end);
    }
  } else {
    for (std::ptrdiff_t b = 0; b < n; ++b) {
      const std::size_t begin = static_cast<std::size_t>(b) * block_size;
      const std::size_t end = std::min(n_items, begin + block_size);
      partial[b] = fn(static_cast<std::size_t>(b), begin, end);
    }
  }
  return partial;
}

/// Independent substream for (seed, stream, index).
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace anchorplace::detail
