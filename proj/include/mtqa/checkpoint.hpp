#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"
#include "mtqa/backbone.hpp"

namespace mtqa {

/// Checkpoint archive, format version 1. All integers little-endian.
///
///   bytes  "MTQACKPT"
///   u32    format version
///   u64    metadata length, then that many bytes of UTF-8 JSON
///          (at least: "arch" id string, "epoch", "seed")
///   u32    group count; per group:
///            u64 name length, name bytes
///            u32 array count; per array:
///              u64 name length, name bytes
///              u32 rank, then rank x i32 dims
///              u64 element count, then that many IEEE-754 f64 values
///
/// Groups used by the trainer: "student", "teacher", "adam_m", "adam_v".
struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::map<std::string, ModelParams> groups;

  const ModelParams& group(const std::string& name) const;
  ArchSpec arch() const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mtqa
