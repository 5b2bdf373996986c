#include "slowfast/manifest.hpp"

#include "slowfast/error.hpp"
#include "slowfast/svg.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include <memory>

namespace slowfast {

std::string git_blob_sha1(std::string_view bytes) {
    const std::string prefix = fmt::format("blob {}", bytes.size());
    const std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), prefix.data(), prefix.size() + 1) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        throw Error("SHA-1 computation failed");
    }
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) {
        hex += fmt::format("{:02x}", digest[i]);
    }
    return hex;
}

std::string file_sha1(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return git_blob_sha1(ss.str());
}

void RunManifest::set_config(nlohmann::json cfg) {
    config = std::move(cfg);
    config_hash = git_blob_sha1(config.dump());
}

void RunManifest::add_input(const std::filesystem::path& path) { inputs.push_back({path.string(), file_sha1(path)}); }

void RunManifest::add_artifact(const std::filesystem::path& path) {
    artifacts.push_back({path.string(), file_sha1(path)});
}

namespace {

nlohmann::json records_json(const std::vector<FileRecord>& records) {
    nlohmann::json out = nlohmann::json::array();
    for (const FileRecord& r : records) {
        out.push_back({{"path", r.path}, {"sha1", r.sha1}});
    }
    return out;
}

std::vector<FileRecord> records_from(const nlohmann::json& j) {
    std::vector<FileRecord> out;
    for (const auto& e : j) {
        out.push_back({e.at("path").get<std::string>(), e.at("sha1").get<std::string>()});
    }
    return out;
}

} // namespace

nlohmann::json RunManifest::to_json() const {
    return {{"argv", argv},
            {"subcommand", subcommand},
            {"config", config},
            {"config_hash", config_hash},
            {"seeds", seeds},
            {"inputs", records_json(inputs)},
            {"artifacts", records_json(artifacts)},
            {"metrics", metrics}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
    RunManifest m;
    try {
        m.argv = j.at("argv").get<std::vector<std::string>>();
        m.subcommand = j.at("subcommand").get<std::string>();
        m.config = j.at("config");
        m.config_hash = j.at("config_hash").get<std::string>();
        m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        m.inputs = records_from(j.at("inputs"));
        m.artifacts = records_from(j.at("artifacts"));
        m.metrics = j.value("metrics", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed run manifest: ") + e.what());
    }
    return m;
}

void RunManifest::save(const std::filesystem::path& path) const { write_file_atomic(path, to_json().dump(2) + "\n"); }

RunManifest RunManifest::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read manifest " + path.string());
    }
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

} // namespace slowfast
