#include "slowfast/checkpoint.hpp"
#include "slowfast/error.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iterator>

using namespace slowfast;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("slowfast_ckpt_" + name); }

VelocityField small_model(std::size_t classes) {
    ModelSpec s;
    s.time_embed_dim = 8;
    s.hidden = {16, 12};
    s.num_classes = classes;
    return VelocityField::init(s, 9);
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out << bytes;
}

std::string raw_checkpoint(const nlohmann::json& header) {
    const std::string text = header.dump();
    std::string out = "SLOWFAST";
    std::uint64_t n = text.size();
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((n >> (8 * i)) & 0xff));
    }
    return out + text;
}

LoadErrorKind load_kind(const fs::path& p) {
    try {
        load_adapter(p);
    } catch (const LoadError& e) {
        return e.kind();
    }
    FAIL("expected LoadError");
    return LoadErrorKind::io;
}

} // namespace

TEST_CASE("teacher round trip is bit-exact") {
    for (std::size_t classes : {0u, 8u}) {
        const VelocityField m = small_model(classes);
        const fs::path p = temp_file("teacher.ckpt");
        save_teacher(p, m, 42, {{"lr", 1e-3}});
        nlohmann::json header;
        const VelocityField back = load_teacher(p, &header);
        CHECK(bit_equal(back, m));
        CHECK(header["seed"] == 42);
        CHECK(header["config"]["lr"] == 1e-3);
        CHECK(header["format_version"] == kCheckpointVersion);
        CHECK_THROWS_AS(load_adapter(p), LoadError);
        fs::remove(p);
    }
}

TEST_CASE("adapter round trip is bit-exact") {
    const VelocityField m = small_model(8);
    const LoraAdapter a = LoraAdapter::init(m, 4, 16.0, LoraInit::gaussian_both, 2);
    const fs::path p = temp_file("adapter.ckpt");
    save_adapter(p, a, m.spec(), "slow", 5);
    const AdapterCheckpoint back = load_adapter(p);
    CHECK(bit_equal(back.adapter, a));
    CHECK(back.base_spec == m.spec());
    CHECK(back.phase == "slow");
    CHECK(back.seed == 5);
    CHECK_NOTHROW(back.adapter.check_compatible(m));
    fs::remove(p);
}

TEST_CASE("corrupted checkpoints report the failure kind") {
    const VelocityField m = small_model(0);
    const LoraAdapter a = LoraAdapter::init(m, 4, 16.0, LoraInit::gaussian_both, 2);
    const fs::path p = temp_file("bad.ckpt");
    save_adapter(p, a, m.spec(), "fast", 1);
    const std::string good = read_bytes(p);

    SUBCASE("missing file") {
        CHECK(load_kind(temp_file("does-not-exist")) == LoadErrorKind::io);
    }
    SUBCASE("truncated by one byte") {
        write_bytes(p, good.substr(0, good.size() - 1));
        CHECK(load_kind(p) == LoadErrorKind::truncated);
    }
    SUBCASE("truncated header") {
        write_bytes(p, good.substr(0, 20));
        CHECK(load_kind(p) == LoadErrorKind::truncated);
    }
    SUBCASE("trailing bytes") {
        write_bytes(p, good + "x");
        CHECK(load_kind(p) == LoadErrorKind::schema);
    }
    SUBCASE("bad magic") {
        std::string bad = good;
        bad[0] = 'X';
        write_bytes(p, bad);
        CHECK(load_kind(p) == LoadErrorKind::bad_magic);
    }
    SUBCASE("missing alpha") {
        nlohmann::json header = read_checkpoint(p).header;
        header.erase("alpha");
        header.erase("tensors");
        std::vector<std::pair<std::string, const Tensor*>> tensors;
        const Checkpoint ckpt = read_checkpoint(p);
        for (const auto& [name, t] : ckpt.tensors) {
            tensors.emplace_back(name, &t);
        }
        write_checkpoint(p, header, tensors);
        CHECK(load_kind(p) == LoadErrorKind::schema);
    }
    SUBCASE("unsupported version") {
        write_bytes(p, raw_checkpoint({{"format_version", 99}, {"kind", "adapter"}, {"tensors", nlohmann::json::object()}}));
        CHECK(load_kind(p) == LoadErrorKind::version);
    }
    SUBCASE("header is not json") {
        std::string bad = raw_checkpoint({{"format_version", 1}});
        bad.back() = '!';
        write_bytes(p, bad);
        CHECK(load_kind(p) == LoadErrorKind::schema);
    }
    SUBCASE("shape mismatch against the base architecture") {
        const LoraAdapter other = LoraAdapter::init(small_model(0), 6, 16.0, LoraInit::gaussian_both, 2);
        Checkpoint ckpt = read_checkpoint(p);
        ckpt.header.erase("tensors");
        std::vector<std::pair<std::string, const Tensor*>> tensors;
        for (const auto& [name, t] : ckpt.tensors) {
            tensors.emplace_back(name, &t);
        }
        tensors[0].second = &other.layers[0].a;
        write_checkpoint(p, ckpt.header, tensors);
        CHECK(load_kind(p) == LoadErrorKind::shape);
    }
    fs::remove(p);
}
