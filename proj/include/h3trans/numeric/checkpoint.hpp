#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "h3trans/numeric/adam.hpp"
#include "h3trans/numeric/tape.hpp"

namespace h3t::nc {

/// Everything needed to resume training bit-for-bit.
struct Checkpoint {
  /// Text describing the model configuration; loads are refused on mismatch.
  std::string header;
  std::uint64_t step = 0;
  ParamStore params;
  AdamState adam;
  /// Named opaque payloads (e.g. the current hyperedge-i set).
  std::map<std::string, std::string> extras;
};

/// Binary container: magic, header, step, named shaped parameters, optimizer
/// moments, extras. Values are stored as raw 64-bit floats.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws DataError on a malformed file and ConfigError when
/// `expected_header` is given and differs from the stored one.
Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string* expected_header = nullptr);

}  // namespace h3t::nc
