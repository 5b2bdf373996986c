#pragma once

#include "slowfast/data.hpp"
#include "slowfast/schedule.hpp"
#include "slowfast/training.hpp"
#include "slowfast/velocity_model.hpp"

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

namespace slowfast {

// Flat key -> value settings. Text files hold `key = value` lines with `#`
// comments; files ending in .json hold one flat object. Unknown keys are
// rejected with ConfigError.
class ConfigFile {
public:
    ConfigFile() = default;

    static ConfigFile load(const std::filesystem::path& path);
    static ConfigFile parse_text(const std::string& text, const std::string& origin = "<string>");
    static ConfigFile from_json(const nlohmann::json& j, const std::string& origin = "<json>");

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

    // Each apply_* reads only its own keys.
    void apply(TrainConfig& config) const;
    void apply(AdapterConfig& config) const;
    void apply(ModelSpec& spec) const;
    void apply(Dataset2D& data) const;
    void apply_schedule(std::size_t& grid_steps, PartitionMode& mode) const;

    double get_double(const std::string& key, double fallback) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;

private:
    void set(const std::string& key, const std::string& value, const std::string& origin);

    std::map<std::string, std::string> entries_;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AdapterConfig& c);
AdapterConfig adapter_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelSpec& s);
ModelSpec model_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Dataset2D& d);
Dataset2D dataset_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PartitionMode& m);
PartitionMode partition_mode_from_json(const nlohmann::json& j);

} // namespace slowfast
