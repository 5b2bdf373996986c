#include "slowfast/checkpoint.hpp"

#include "slowfast/config.hpp"
#include "slowfast/error.hpp"
#include "slowfast/svg.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace slowfast {

namespace {

constexpr char kMagic[8] = {'S', 'L', 'O', 'W', 'F', 'A', 'S', 'T'};

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | p[i];
    }
    return v;
}

std::string layer_name(std::size_t i, const char* field) { return "layer" + std::to_string(i) + "." + field; }

const Tensor& require(const Checkpoint& ckpt, const std::string& name) {
    const auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) {
        throw LoadError(LoadErrorKind::schema, "checkpoint is missing tensor '" + name + "'");
    }
    return it->second;
}

void check_shape(const std::string& name, const Tensor& got, const Tensor& want) {
    if (got.rows() != want.rows() || got.cols() != want.cols()) {
        throw LoadError(LoadErrorKind::shape, "tensor '" + name + "' has shape " + got.shape_str() + ", expected " +
                                                  want.shape_str());
    }
}

template <typename T>
T field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) {
        throw LoadError(LoadErrorKind::schema, std::string("checkpoint header is missing '") + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(LoadErrorKind::schema, std::string("checkpoint field '") + key + "': " + e.what());
    }
}

ModelSpec spec_field(const nlohmann::json& header) {
    try {
        return model_spec_from_json(field<nlohmann::json>(header, "architecture"));
    } catch (const LoadError&) {
        throw;
    } catch (const std::exception& e) {
        throw LoadError(LoadErrorKind::schema, std::string("invalid architecture: ") + e.what());
    }
}

void expect_kind(const nlohmann::json& header, CheckpointKind kind) {
    const auto got = field<std::string>(header, "kind");
    if (got != to_string(kind)) {
        throw LoadError(LoadErrorKind::schema, "expected a " + to_string(kind) + " checkpoint, found '" + got + "'");
    }
}

} // namespace

std::string to_string(CheckpointKind kind) { return kind == CheckpointKind::teacher ? "teacher" : "adapter"; }

void write_checkpoint(const std::filesystem::path& path, nlohmann::json header,
                      const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
    std::string payload;
    nlohmann::json directory = nlohmann::json::object();
    for (const auto& [name, t] : tensors) {
        const std::size_t offset = payload.size();
        for (double v : t->data()) {
            put_u64(payload, std::bit_cast<std::uint64_t>(v));
        }
        directory[name] = {{"rows", t->rows()}, {"cols", t->cols()}, {"offset", offset}, {"length", payload.size() - offset}};
    }
    header["format_version"] = kCheckpointVersion;
    header["tensors"] = std::move(directory);
    header["payload_length"] = payload.size();
    const std::string text = header.dump();

    std::string file(kMagic, sizeof kMagic);
    put_u64(file, text.size());
    file += text;
    file += payload;
    write_file_atomic(path, file);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError(LoadErrorKind::io, "cannot open checkpoint " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());

    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw LoadError(LoadErrorKind::bad_magic, path.string() + " is not a checkpoint file");
    }
    const std::uint64_t header_len = get_u64(raw + 8);
    if (header_len > bytes.size() - 16) {
        throw LoadError(LoadErrorKind::truncated, "checkpoint header is truncated");
    }
    Checkpoint ckpt;
    try {
        ckpt.header = nlohmann::json::parse(bytes.substr(16, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(LoadErrorKind::schema, std::string("checkpoint header is not valid JSON: ") + e.what());
    }
    if (!ckpt.header.is_object()) {
        throw LoadError(LoadErrorKind::schema, "checkpoint header must be a JSON object");
    }
    const auto version = field<std::uint64_t>(ckpt.header, "format_version");
    if (version != kCheckpointVersion) {
        throw LoadError(LoadErrorKind::version, "unsupported checkpoint format_version " + std::to_string(version));
    }
    const auto payload_len = field<std::uint64_t>(ckpt.header, "payload_length");
    const std::size_t payload_start = 16 + header_len;
    const std::size_t available = bytes.size() - payload_start;
    if (available < payload_len) {
        throw LoadError(LoadErrorKind::truncated, "checkpoint payload is truncated: " + std::to_string(available) +
                                                      " of " + std::to_string(payload_len) + " bytes");
    }
    if (available > payload_len) {
        throw LoadError(LoadErrorKind::schema, "checkpoint has trailing bytes after the payload");
    }

    const auto directory = field<nlohmann::json>(ckpt.header, "tensors");
    if (!directory.is_object()) {
        throw LoadError(LoadErrorKind::schema, "checkpoint tensor directory must be an object");
    }
    for (const auto& [name, entry] : directory.items()) {
        const auto rows = field<std::uint64_t>(entry, "rows");
        const auto cols = field<std::uint64_t>(entry, "cols");
        const auto offset = field<std::uint64_t>(entry, "offset");
        const auto length = field<std::uint64_t>(entry, "length");
        if (length != rows * cols * 8) {
            throw LoadError(LoadErrorKind::shape, "tensor '" + name + "' length does not match its shape");
        }
        if (offset > payload_len || length > payload_len - offset) {
            throw LoadError(LoadErrorKind::truncated, "tensor '" + name + "' lies outside the payload");
        }
        Tensor t(rows, cols);
        const unsigned char* p = raw + payload_start + offset;
        for (std::size_t i = 0; i < t.size(); ++i) {
            t[i] = std::bit_cast<double>(get_u64(p + 8 * i));
        }
        ckpt.tensors.emplace(name, std::move(t));
    }
    return ckpt;
}

void save_teacher(const std::filesystem::path& path, const VelocityField& model, std::uint64_t seed,
                  const nlohmann::json& config) {
    nlohmann::json header = {{"kind", to_string(CheckpointKind::teacher)},
                             {"architecture", to_json(model.spec())},
                             {"seed", seed},
                             {"config", config}};
    std::vector<std::pair<std::string, const Tensor*>> tensors;
    const auto layers = model.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        tensors.emplace_back(layer_name(i, "weight"), &layers[i].weight);
        tensors.emplace_back(layer_name(i, "bias"), &layers[i].bias);
    }
    if (model.spec().conditional()) {
        tensors.emplace_back("cond_table", &model.cond_table());
    }
    write_checkpoint(path, std::move(header), tensors);
}

VelocityField load_teacher(const std::filesystem::path& path, nlohmann::json* header) {
    const Checkpoint ckpt = read_checkpoint(path);
    expect_kind(ckpt.header, CheckpointKind::teacher);
    VelocityField model = VelocityField::zeros(spec_field(ckpt.header));
    const auto layers = model.layers();
    std::size_t expected = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        for (const auto& [name, slot] : {std::pair{layer_name(i, "weight"), &layers[i].weight},
                                         std::pair{layer_name(i, "bias"), &layers[i].bias}}) {
            const Tensor& t = require(ckpt, name);
            check_shape(name, t, *slot);
            *slot = t;
            ++expected;
        }
    }
    if (model.spec().conditional()) {
        const Tensor& t = require(ckpt, "cond_table");
        check_shape("cond_table", t, model.cond_table());
        model.cond_table() = t;
        ++expected;
    }
    if (ckpt.tensors.size() != expected) {
        throw LoadError(LoadErrorKind::schema, "teacher checkpoint has unexpected extra tensors");
    }
    if (header != nullptr) {
        *header = ckpt.header;
    }
    return model;
}

void save_adapter(const std::filesystem::path& path, const LoraAdapter& adapter, const ModelSpec& base_spec,
                  const std::string& phase, std::uint64_t seed, const nlohmann::json& config) {
    nlohmann::json header = {{"kind", to_string(CheckpointKind::adapter)},
                             {"architecture", to_json(base_spec)},
                             {"rank", adapter.rank},
                             {"alpha", adapter.alpha},
                             {"phase", phase},
                             {"seed", seed},
                             {"config", config}};
    std::vector<std::pair<std::string, const Tensor*>> tensors;
    for (std::size_t i = 0; i < adapter.layers.size(); ++i) {
        tensors.emplace_back(layer_name(i, "lora_a"), &adapter.layers[i].a);
        tensors.emplace_back(layer_name(i, "lora_b"), &adapter.layers[i].b);
    }
    write_checkpoint(path, std::move(header), tensors);
}

AdapterCheckpoint load_adapter(const std::filesystem::path& path) {
    const Checkpoint ckpt = read_checkpoint(path);
    expect_kind(ckpt.header, CheckpointKind::adapter);
    AdapterCheckpoint out;
    out.base_spec = spec_field(ckpt.header);
    const auto rank = field<std::size_t>(ckpt.header, "rank");
    const auto alpha = field<double>(ckpt.header, "alpha");
    if (rank == 0 || !(alpha > 0.0)) {
        throw LoadError(LoadErrorKind::schema, "adapter rank and alpha must be positive");
    }
    out.phase = field<std::string>(ckpt.header, "phase");
    out.seed = field<std::uint64_t>(ckpt.header, "seed");

    // Shapes follow from the base architecture.
    out.adapter = LoraAdapter::init(VelocityField::zeros(out.base_spec), rank, alpha, LoraInit::gaussian_a_zero_b, 0);
    for (std::size_t i = 0; i < out.adapter.layers.size(); ++i) {
        for (const auto& [name, slot] : {std::pair{layer_name(i, "lora_a"), &out.adapter.layers[i].a},
                                         std::pair{layer_name(i, "lora_b"), &out.adapter.layers[i].b}}) {
            const Tensor& t = require(ckpt, name);
            check_shape(name, t, *slot);
            *slot = t;
        }
    }
    if (ckpt.tensors.size() != 2 * out.adapter.layers.size()) {
        throw LoadError(LoadErrorKind::schema, "adapter checkpoint has unexpected extra tensors");
    }
    out.header = ckpt.header;
    return out;
}

} // namespace slowfast
