#pragma once

// Checkpoint file layout:
//
//   "DEFEMO1\0"                         8-byte magic
//   key=value lines, blank line         UTF-8 header (configs, labels, manifest)
//   payload                             little-endian IEEE-754 float32
//   checksum                            8-byte little-endian FNV-1a-64 of payload
//
// Manifest entries appear as `param=<name> <d0>x<d1>... <offset>` with the
// offset counted in floats.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "defemo/model.hpp"
#include "defemo/train_config.hpp"

namespace defemo {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ManifestEntry {
  std::string name;
  Shape shape;
  std::size_t offset = 0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  EncoderConfig encoder;
  TrainConfig train;
  std::vector<std::string> label_names;
  std::uint64_t vocab_fingerprint = 0;
  std::vector<ManifestEntry> manifest;
  std::vector<float> payload;
  std::uint64_t checksum = 0;
};

std::uint64_t payload_checksum(const std::vector<float>& payload);

Checkpoint make_checkpoint(const Model<float>& model, const TrainConfig& train,
                           std::vector<std::string> label_names, std::uint64_t vocab_fingerprint);
Model<float> model_from_checkpoint(const Checkpoint& ckpt);

std::string serialize_checkpoint(const Checkpoint& ckpt);
// Throws CheckpointError with a kind naming the failure.
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ConfigMismatch unless the label count and vocabulary agree with the
// checkpoint.
void check_compatible(const Checkpoint& ckpt, std::size_t num_labels, const Vocabulary& vocab);

}  // namespace defemo
