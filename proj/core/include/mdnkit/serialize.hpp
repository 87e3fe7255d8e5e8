#pragma once

#include <cstdint>
#include <string>

#include "mdnkit/dataset.hpp"
#include "mdnkit/model.hpp"

namespace mdnkit {

// Single-file containers: a line-oriented text header terminated by
// "end-header", then named arrays, each a text descriptor line
// `array <name> <rank> <extents...>` followed by the raw values as 64-bit
// little-endian IEEE doubles. Headers carry an FNV-1a 64 checksum of the
// payload bytes. See docs/formats.md for the byte-exact layout.

inline constexpr int kCheckpointFormatVersion = 1;
inline constexpr int kDatasetFormatVersion = 1;

struct LoadedCheckpoint {
    Model model;
    std::uint64_t seed = 0;
    std::int64_t step = 0;
};

// Writes are atomic (temp file + rename). Round trips are bit-exact.
void save_checkpoint(const std::string& path, const Model& model, std::uint64_t seed,
                     std::int64_t step);
LoadedCheckpoint load_checkpoint(const std::string& path);

void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

// Payload checksum as stored in headers; exposed for dataset summaries.
std::uint64_t fnv1a64(const unsigned char* bytes, std::size_t count);
std::uint64_t dataset_payload_checksum(const Dataset& data);

}  // namespace mdnkit
