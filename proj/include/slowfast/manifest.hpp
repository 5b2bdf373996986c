#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace slowfast {

// SHA-1 of "blob <size>\0" followed by the bytes, as git computes it.
std::string git_blob_sha1(std::string_view bytes);
std::string file_sha1(const std::filesystem::path& path);

struct FileRecord {
    std::string path;
    std::string sha1;
};

// Record of one CLI invocation, enough to execute it again.
struct RunManifest {
    std::vector<std::string> argv;
    std::string subcommand;
    nlohmann::json config = nlohmann::json::object();
    std::string config_hash;
    std::vector<std::uint64_t> seeds;
    std::vector<FileRecord> inputs;
    std::vector<FileRecord> artifacts;
    nlohmann::json metrics = nlohmann::json::object();

    void set_config(nlohmann::json cfg);
    void add_input(const std::filesystem::path& path);
    void add_artifact(const std::filesystem::path& path);

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);

    void save(const std::filesystem::path& path) const;
    static RunManifest load(const std::filesystem::path& path);
};

} // namespace slowfast
