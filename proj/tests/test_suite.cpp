#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "fedsim/suite.hpp"

using namespace fedsim;
namespace fs = std::filesystem;

namespace {

std::string small_suite_text(const std::string& algorithms, const std::string& seeds,
                             int rounds) {
    std::ostringstream out;
    out << "num_clients = 4\n"
        << "sampling_ratio = 0.5\n"
        << "rounds = " << rounds << "\n"
        << "input_dim = 4\n"
        << "num_classes = 3\n"
        << "partition_scheme = client\n"
        << "alpha = 1.0\n"
        << "train_per_class = 30\n"
        << "test_per_class = 10\n"
        << "val_per_class = 4\n"
        << "eta = 0.1\n"
        << "momentum = 0\n"
        << "local_epochs = 1\n"
        << "batch_size = 8\n"
        << "algorithms = " << algorithms << "\n"
        << "seeds = " << seeds << "\n";
    return out.str();
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("fedsim_test_" + name);
    fs::remove_all(dir);
    return dir;
}

int count_data_rows(const std::string& csv) {
    int lines = 0;
    for (char c : csv) {
        lines += c == '\n';
    }
    return lines - 1;
}

} // namespace

TEST_CASE("a single run writes one csv with one row per round") {
    auto suite = parse_config_text(small_suite_text("FedPdp", "1", 2));
    auto dir = fresh_dir("single");
    CHECK(run_suite(suite, dir) == 0);

    auto csv = slurp(dir / "FedPdp_seed1.csv");
    CHECK(count_data_rows(csv) == 2);
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(fs::exists(dir / "comparison.csv"));
    CHECK(fs::exists(dir / "meta.json"));
    CHECK(!fs::exists(dir / "FedPdp_seed1_sampler.jsonl"));
}

TEST_CASE("two seeds aggregate with the sample standard deviation") {
    auto suite = parse_config_text(small_suite_text("FedPdp", "1,2", 2));
    auto dir = fresh_dir("std");
    CHECK(run_suite(suite, dir) == 0);

    auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    double a = summary["runs"][0]["final_accuracy"].get<double>();
    double b = summary["runs"][1]["final_accuracy"].get<double>();
    double mean = (a + b) / 2.0;
    double std = std::sqrt((a - mean) * (a - mean) + (b - mean) * (b - mean));
    CHECK(summary["aggregates"]["FedPdp"]["final_accuracy_mean"].get<double>() ==
          doctest::Approx(mean).epsilon(1e-12));
    CHECK(summary["aggregates"]["FedPdp"]["final_accuracy_std"].get<double>() ==
          doctest::Approx(std).epsilon(1e-12));
    CHECK(summary["aggregates"]["FedPdp"]["seeds"] == 2);
}

TEST_CASE("the baseline's own speedup cell is exactly 1x") {
    auto suite = parse_config_text(small_suite_text("FedAvg,FedPdp", "1", 3));
    auto dir = fresh_dir("speedup");
    CHECK(run_suite(suite, dir) == 0);

    auto comparison = slurp(dir / "comparison.csv");
    std::istringstream lines(comparison);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "algorithm,final_accuracy,rounds_to_baseline");
    bool saw_baseline_cell = false;
    while (std::getline(lines, line)) {
        if (line.rfind("FedAvg,", 0) == 0) {
            saw_baseline_cell = line.find("(1×)") != std::string::npos;
        }
    }
    CHECK(saw_baseline_cell);

    auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(summary["baseline"]["algorithm"] == "FedAvg");
    // The baseline trivially reaches its own final accuracy.
    CHECK(summary["runs"][0]["rounds_to_baseline"].is_number());
}

TEST_CASE("bandit runs leave a sampler trace that parses") {
    auto suite = parse_config_text(small_suite_text("FedCM-TS", "1", 2));
    auto dir = fresh_dir("sampler");
    CHECK(run_suite(suite, dir) == 0);

    std::ifstream in(dir / "FedCM-TS_seed1_sampler.jsonl");
    REQUIRE(in.good());
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        auto entry = nlohmann::json::parse(line);
        CHECK(entry["round"] == rows);
        CHECK(entry["state"]["kind"] == "ts");
        CHECK(entry["state"]["alpha"].size() == 4);
        ++rows;
    }
    CHECK(rows == 2);
}

TEST_CASE("suite outputs are byte-identical across reruns") {
    auto suite = parse_config_text(small_suite_text("FedAvg,FedCA", "1,2", 2));
    auto dir_a = fresh_dir("replay_a");
    auto dir_b = fresh_dir("replay_b");
    CHECK(run_suite(suite, dir_a, 1) == 0);
    CHECK(run_suite(suite, dir_b, 4) == 0);

    for (const auto& name :
         {"FedAvg_seed1.csv", "FedAvg_seed2.csv", "FedCA_seed1.csv", "FedCA_seed2.csv",
          "summary.json", "comparison.csv"}) {
        CHECK(slurp(dir_a / name) == slurp(dir_b / name));
    }
}

TEST_CASE("a failing run is recorded while the rest proceed") {
    auto suite = parse_config_text(small_suite_text("FedAvg,FedCA", "1", 2));
    // Sabotage FedCA only: m = 25 exceeds the exhaustive filter bound,
    // which FedAvg never touches.
    suite.base.num_clients = 50;
    suite.base.partition.num_clients = 50;
    suite.base.sampling_ratio = 0.5;

    auto dir = fresh_dir("failure");
    CHECK(run_suite(suite, dir) == 1);

    auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    REQUIRE(summary["runs"].size() == 2);
    CHECK(summary["runs"][0]["algorithm"] == "FedAvg");
    CHECK(summary["runs"][0]["ok"] == true);
    CHECK(summary["runs"][1]["algorithm"] == "FedCA");
    CHECK(summary["runs"][1]["ok"] == false);
    CHECK(summary["runs"][1]["error"].get<std::string>().find("filter") != std::string::npos);
    CHECK(fs::exists(dir / "FedAvg_seed1.csv"));
    CHECK(!fs::exists(dir / "FedCA_seed1.csv"));
}

TEST_CASE("the cli binary runs end to end") {
    const char* bin = std::getenv("FEDSIM_CLI_BIN");
    if (bin == nullptr) {
        MESSAGE("FEDSIM_CLI_BIN not set; skipping the binary smoke test");
        return;
    }

    auto dir = fresh_dir("cli");
    fs::create_directories(dir);
    auto config_path = dir / "suite.cfg";
    {
        std::ofstream out(config_path);
        out << small_suite_text("FedCA", "7", 2);
    }

    std::string run_cmd = std::string(bin) + " run " + config_path.string() + " --out " +
                          (dir / "out").string() + " --threads 2";
    CHECK(std::system(run_cmd.c_str()) == 0);
    CHECK(fs::exists(dir / "out" / "FedCA_seed7.csv"));
    CHECK(fs::exists(dir / "out" / "summary.json"));

    std::string partition_cmd = std::string(bin) + " partition " + config_path.string() +
                                " --manifest " + (dir / "manifest.json").string();
    CHECK(std::system(partition_cmd.c_str()) == 0);
    auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest["num_clients"] == 4);
    CHECK(manifest["seed"] == 7);
    CHECK(manifest["clients"].size() == 4);

    // Override flags narrow the suite.
    std::string override_cmd = std::string(bin) + " run " + config_path.string() + " --out " +
                               (dir / "out2").string() + " --algorithms FedAvg --seeds 9";
    CHECK(std::system(override_cmd.c_str()) == 0);
    CHECK(fs::exists(dir / "out2" / "FedAvg_seed9.csv"));
    CHECK(!fs::exists(dir / "out2" / "FedCA_seed7.csv"));
}
