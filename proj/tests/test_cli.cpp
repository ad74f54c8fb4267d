#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "finrad/cli.hpp"

using finrad::cli::run_cli;

namespace {

std::filesystem::path temp_dir(const std::string& leaf) {
    const auto dir = std::filesystem::temp_directory_path() / "finrad_cli" / leaf;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string read_all(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return std::string((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
}

bool same_file(const std::filesystem::path& a, const std::filesystem::path& b) {
    return read_all(a) == read_all(b);
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit 1") {
    CHECK(run_cli({}) == 1);
    CHECK(run_cli({"frobnicate"}) == 1);
    CHECK(run_cli({"gen-data"}) == 1); // missing required flags
    CHECK(run_cli({"gen-data", "--task", "texture", "--n", "60", "--seed", "1",
                   "--out", "/tmp/x", "--bogus"}) == 1);
    CHECK(run_cli({"--help"}) == 0);
    CHECK(run_cli({"gen-data", "--help"}) == 0);
}

TEST_CASE("runtime errors exit 2") {
    CHECK(run_cli({"extract", "--manifest", "/nonexistent/manifest.csv", "--out",
                   "/tmp/out.csv"}) == 2);
    const auto dir = temp_dir("rt");
    CHECK(run_cli({"gen-data", "--task", "texture", "--n", "5", "--seed", "1",
                   "--out", (dir / "d").string()}) == 2); // n too small
}

TEST_CASE("gen-data is deterministic byte-for-byte") {
    const auto d1 = temp_dir("gen1");
    const auto d2 = temp_dir("gen2");
    for (const auto& dir : {d1, d2})
        REQUIRE(run_cli({"gen-data", "--task", "texture", "--n", "60", "--classes",
                         "2", "--seed", "7", "--out", dir.string()}) == 0);
    CHECK(same_file(d1 / "manifest.csv", d2 / "manifest.csv"));
    CHECK(same_file(d1 / "img_00000.pgm", d2 / "img_00000.pgm"));
    CHECK(same_file(d1 / "img_00059.pgm", d2 / "img_00059.pgm"));

    const auto b1 = temp_dir("blob1");
    const auto b2 = temp_dir("blob2");
    for (const auto& dir : {b1, b2})
        REQUIRE(run_cli({"gen-data", "--task", "blob", "--n", "50", "--seed", "3",
                         "--out", dir.string()}) == 0);
    CHECK(same_file(b1 / "manifest.csv", b2 / "manifest.csv"));
    CHECK(same_file(b1 / "mask_00007.pgm", b2 / "mask_00007.pgm"));
}

TEST_CASE("extract produces the documented csv") {
    const auto dir = temp_dir("extract");
    REQUIRE(run_cli({"gen-data", "--task", "texture", "--n", "40", "--seed", "5",
                     "--out", (dir / "data").string()}) == 0);

    // Trim the manifest to three rows.
    {
        const std::string full = read_all(dir / "data" / "manifest.csv");
        std::ofstream out(dir / "data" / "small.csv");
        size_t pos = 0;
        for (int line = 0; line < 4; ++line) {
            const size_t next = full.find('\n', pos);
            out << full.substr(pos, next - pos + 1);
            pos = next + 1;
        }
    }
    REQUIRE(run_cli({"extract", "--manifest", (dir / "data" / "small.csv").string(),
                     "--bins", "16", "--out", (dir / "features.csv").string()}) == 0);
    const std::string csv = read_all(dir / "features.csv");
    CHECK(csv.find("path,autocorrelation,gray_level_variance,cluster_shade,"
                   "difference_entropy,size_zone_non_uniformity,skewness\n") == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4); // header + 3 rows

    // Byte-identical on rerun.
    REQUIRE(run_cli({"extract", "--manifest", (dir / "data" / "small.csv").string(),
                     "--bins", "16", "--out", (dir / "features2.csv").string()}) == 0);
    CHECK(same_file(dir / "features.csv", dir / "features2.csv"));
}

TEST_CASE("train-fin / eval-fin round trip") {
    const auto dir = temp_dir("fin");
    REQUIRE(run_cli({"train-fin", "--feature", "skewness", "--synthetic", "120",
                     "--topologies", "1", "--seed", "11", "--out",
                     (dir / "skew.fin").string()}) == 0);
    CHECK(std::filesystem::exists(dir / "skew.fin"));

    REQUIRE(run_cli({"gen-data", "--task", "texture", "--n", "40", "--seed", "2",
                     "--out", (dir / "eval").string()}) == 0);
    CHECK(run_cli({"eval-fin", "--fin", (dir / "skew.fin").string(), "--manifest",
                   (dir / "eval" / "manifest.csv").string()}) == 0);

    // Both --manifest and --synthetic is a usage-level conflict (exit 2:
    // detected after parsing).
    CHECK(run_cli({"train-fin", "--feature", "skewness", "--synthetic", "120",
                   "--manifest", "x.csv", "--topologies", "1", "--seed", "1",
                   "--out", (dir / "y.fin").string()}) == 2);
}

TEST_CASE("run-exp and report round trip deterministically") {
    const auto dir = temp_dir("exp");
    {
        std::ofstream spec(dir / "spec.json");
        spec << R"({
  "task": "exp1-analogue",
  "seed": 7,
  "n": 120,
  "folds": 3,
  "fin_corpus_n": 100,
  "train": {"lr": 1e-3, "batch_size": 16, "max_epochs": 2, "patience": 2,
            "delta": 1e-4, "loss": "cross_entropy"},
  "classifier": {"conv_stages": [2, 4], "head": [8]},
  "fin_pretrain": {"topologies": 1, "max_epochs": 2, "patience": 2}
})";
    }
    REQUIRE(run_cli({"run-exp", "--spec", (dir / "spec.json").string(), "--out",
                     (dir / "out1").string()}) == 0);
    REQUIRE(run_cli({"run-exp", "--spec", (dir / "spec.json").string(), "--out",
                     (dir / "out2").string()}) == 0);
    for (const char* name : {"report.json", "summary.csv", "curves.csv", "curves.svg"})
        CHECK(same_file(dir / "out1" / name, dir / "out2" / name));

    // report --format csv re-emits identical CSVs from report.json.
    const std::string summary = read_all(dir / "out1" / "summary.csv");
    std::filesystem::remove(dir / "out1" / "summary.csv");
    REQUIRE(run_cli({"report", "--in", (dir / "out1").string(), "--format", "csv"}) == 0);
    CHECK(read_all(dir / "out1" / "summary.csv") == summary);

    CHECK(run_cli({"report", "--in", (dir / "out1").string(), "--format", "json"}) == 0);
    CHECK(run_cli({"report", "--in", (dir / "out1").string(), "--format", "yaml"}) == 2);
}

} // TEST_SUITE
