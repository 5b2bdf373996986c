#include "slowfast/error.hpp"
#include "slowfast/manifest.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

using namespace slowfast;
namespace fs = std::filesystem;

TEST_CASE("git blob hashes") {
    CHECK(git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
    CHECK(git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    const fs::path p = fs::temp_directory_path() / "slowfast_manifest_hello.txt";
    std::ofstream(p, std::ios::binary) << "hello\n";
    CHECK(file_sha1(p) == "ce013625030ba8dba906f756967f9e9ca394464a");
    fs::remove(p);
}

TEST_CASE("manifest round trip") {
    const fs::path dir = fs::temp_directory_path() / "slowfast_manifest_test";
    fs::create_directories(dir);
    std::ofstream(dir / "a.txt") << "alpha";
    RunManifest m;
    m.argv = {"sample", "--n", "4"};
    m.subcommand = "sample";
    m.set_config({{"n", 4}});
    m.seeds = {1, 2};
    m.add_input(dir / "a.txt");
    m.add_artifact(dir / "a.txt");
    m.metrics["nfe"] = 10;
    CHECK(m.config_hash == git_blob_sha1(nlohmann::json({{"n", 4}}).dump()));
    CHECK(m.inputs.at(0).sha1 == git_blob_sha1("alpha"));

    m.save(dir / "m.json");
    const RunManifest back = RunManifest::load(dir / "m.json");
    CHECK(back.argv == m.argv);
    CHECK(back.subcommand == "sample");
    CHECK(back.config == m.config);
    CHECK(back.config_hash == m.config_hash);
    CHECK(back.seeds == m.seeds);
    CHECK(back.inputs.at(0).sha1 == m.inputs.at(0).sha1);
    CHECK(back.artifacts.at(0).path == m.artifacts.at(0).path);
    CHECK(back.metrics["nfe"] == 10);

    CHECK_THROWS_AS(RunManifest::from_json({{"argv", 3}}), ConfigError);
    fs::remove_all(dir);
}
