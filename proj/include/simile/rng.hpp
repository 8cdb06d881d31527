#pragma once

#include <cstdint>
#include <random>

namespace simile {

using Engine = std::mt19937_64;

/// Named roots for the independent random substreams of a run. Every random
/// quantity in a run is drawn from a stream hanging off one root seed.
enum class StreamId : std::uint64_t {
  generation = 1,
  chain = 2,
  candidate = 3,
  emulator_training = 4,
  design = 5,
  figure = 6,
};

/// Addresses one reproducible random sequence: (seed, stream, substream),
/// further split into chunks so that work can be sharded without changing
/// the result.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t substream = 0;

  RngStream() = default;
  RngStream(std::uint64_t seed_, std::uint64_t stream_, std::uint64_t substream_ = 0)
      : seed(seed_), stream(stream_), substream(substream_) {}
  RngStream(std::uint64_t seed_, StreamId id, std::uint64_t substream_ = 0)
      : seed(seed_), stream(static_cast<std::uint64_t>(id)), substream(substream_) {}

  RngStream with_substream(std::uint64_t sub) const { return {seed, stream, sub}; }

  /// Engine for chunk `chunk` of this substream.
  Engine engine(std::uint64_t chunk = 0) const;
};

}  // namespace simile
