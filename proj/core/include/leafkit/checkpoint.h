#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "leafkit/model.h"

namespace leafkit {

// File layout (little endian):
//   "LFKT" | version u16 | spec length u32 | spec blob | weight count u64 |
//   weights f32 | CRC32 of everything before it
// The spec blob is canonical JSON {"model": <spec>, "training": <metadata>}.
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelSpec spec;
  std::string training_json = "{}";  // canonical JSON object
  std::vector<float> weights;

  static Checkpoint from_model(const Model& model, const std::string& training_json = "{}");
  Model to_model() const;

  bool operator==(const Checkpoint&) const = default;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);

// Rejects bad magic, unknown versions, truncation, trailing bytes, CRC
// mismatches and weight counts that disagree with the spec, with a
// FormatError naming the byte offset.
Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes);

// Writes through a temporary file and renames it into place.
void save_model(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_model(const std::filesystem::path& path);

}  // namespace leafkit
