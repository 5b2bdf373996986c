#pragma once

#include "slowfast/lora.hpp"
#include "slowfast/velocity_model.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

namespace slowfast {

// File layout: the 8 bytes "SLOWFAST", a little-endian u64 header length, a
// JSON header, then the payload of little-endian f64 tensors. The header holds
// format_version, kind, architecture, seed, the training config echo and a
// tensor directory {name: {rows, cols, offset, length}} with byte offsets
// relative to the payload start.
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind { teacher, adapter };

std::string to_string(CheckpointKind kind);

struct Checkpoint {
    nlohmann::json header;
    std::map<std::string, Tensor> tensors;
};

// Writes `tensors` (in the given order) after `header`, filling in the
// directory and format_version. Temp file then rename.
void write_checkpoint(const std::filesystem::path& path, nlohmann::json header,
                      const std::vector<std::pair<std::string, const Tensor*>>& tensors);

// Reads and checks magic, version, directory bounds and payload length.
// Throws LoadError.
Checkpoint read_checkpoint(const std::filesystem::path& path);

void save_teacher(const std::filesystem::path& path, const VelocityField& model, std::uint64_t seed,
                  const nlohmann::json& config = nlohmann::json::object());
VelocityField load_teacher(const std::filesystem::path& path, nlohmann::json* header = nullptr);

struct AdapterCheckpoint {
    LoraAdapter adapter;
    ModelSpec base_spec;
    std::string phase;
    std::uint64_t seed = 0;
    nlohmann::json header;
};

void save_adapter(const std::filesystem::path& path, const LoraAdapter& adapter, const ModelSpec& base_spec,
                  const std::string& phase, std::uint64_t seed,
                  const nlohmann::json& config = nlohmann::json::object());
AdapterCheckpoint load_adapter(const std::filesystem::path& path);

} // namespace slowfast
