#include "simile/rng.hpp"

#include <array>

namespace simile {

Engine RngStream::engine(std::uint64_t chunk) const {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed),      hi(seed),      lo(stream), hi(stream),
                    lo(substream), hi(substream), lo(chunk),  hi(chunk)};
  return Engine(seq);
}

}  // namespace simile
