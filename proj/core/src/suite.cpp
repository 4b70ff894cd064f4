#include "fedsim/suite.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedsim/log.hpp"

namespace fedsim {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string iso_timestamp(std::chrono::system_clock::time_point tp) {
    std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct RunOutcome {
    AlgorithmKind algorithm = AlgorithmKind::FedAvg;
    std::uint64_t seed = 0;
    std::string name;
    bool ok = false;
    std::string error;
    std::vector<RoundRecord> records;
    double wall_ms = 0.0;
};

std::optional<double> final_accuracy(const RunOutcome& run) {
    if (!run.ok || run.records.empty()) {
        return std::nullopt;
    }
    return run.records.back().test_accuracy;
}

// Sample standard deviation; 0 for fewer than two values.
std::pair<double, double> mean_std(const std::vector<double>& values) {
    if (values.empty()) {
        return {0.0, 0.0};
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    if (values.size() < 2) {
        return {mean, 0.0};
    }
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

} // namespace

int run_suite(const ExperimentSuite& suite, const fs::path& out_dir, int threads) {
    fs::create_directories(out_dir);

    const auto suite_start = std::chrono::system_clock::now();
    std::vector<RunOutcome> runs;

    for (AlgorithmKind algorithm : suite.algorithms) {
        for (std::uint64_t seed : suite.seeds) {
            RunOutcome run;
            run.algorithm = algorithm;
            run.seed = seed;
            run.name = algorithm_token(algorithm) + "_seed" + std::to_string(seed);
            const auto run_start = std::chrono::steady_clock::now();
            try {
                FederationConfig cfg = materialize_run(suite, algorithm, seed);

                std::ofstream sampler_out;
                RoundObserver observer;
                if (cfg.algorithm == AlgorithmKind::FedCM_UCB ||
                    cfg.algorithm == AlgorithmKind::FedCM_TS) {
                    sampler_out.open(out_dir / (run.name + "_sampler.jsonl"));
                    observer = [&sampler_out](const RoundRecord& rec, const json& sampler_state) {
                        json line{{"round", rec.round}, {"state", sampler_state}};
                        sampler_out << line.dump() << '\n';
                    };
                }

                ExperimentResult result = run_experiment(cfg, threads, observer);
                run.records = std::move(result.records);

                std::ofstream csv(out_dir / (run.name + ".csv"));
                write_round_csv(csv, run.records);
                run.ok = true;
            } catch (const std::exception& e) {
                run.error = e.what();
                logging::logf(logging::Level::Error, "[fedsim] run %s failed: %s",
                              run.name.c_str(), e.what());
            }
            run.wall_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - run_start)
                              .count();
            if (run.ok) {
                auto acc = final_accuracy(run);
                logging::logf(logging::Level::Info, "[fedsim] %s: %d rounds, final accuracy %s",
                              run.name.c_str(), static_cast<int>(run.records.size()),
                              acc ? fmt_fixed(*acc, 4).c_str() : "n/a");
            }
            runs.push_back(std::move(run));
        }
    }

    // Baseline target: mean final accuracy of the speedup baseline.
    std::optional<double> baseline_target;
    {
        std::vector<double> finals;
        for (const auto& run : runs) {
            if (run.algorithm == suite.speedup_baseline) {
                if (auto acc = final_accuracy(run)) {
                    finals.push_back(*acc);
                }
            }
        }
        if (!finals.empty()) {
            baseline_target = mean_std(finals).first;
        }
    }

    json run_list = json::array();
    for (const auto& run : runs) {
        json entry{{"algorithm", algorithm_token(run.algorithm)},
                   {"seed", run.seed},
                   {"ok", run.ok}};
        if (auto acc = final_accuracy(run)) {
            entry["final_accuracy"] = *acc;
        } else {
            entry["final_accuracy"] = nullptr;
        }
        if (!run.ok) {
            entry["error"] = run.error;
        } else {
            json per_target = json::object();
            for (double target : suite.targets) {
                auto reached = rounds_to_target(run.records, target);
                per_target[fmt_double(target)] = reached ? json(*reached) : json(nullptr);
            }
            entry["rounds_to_target"] = per_target;
            if (baseline_target) {
                auto reached = rounds_to_target(run.records, *baseline_target);
                entry["rounds_to_baseline"] = reached ? json(*reached) : json(nullptr);
            }
        }
        run_list.push_back(std::move(entry));
    }

    // Per-algorithm aggregates and the comparison table.
    json aggregates = json::object();
    std::string comparison = "algorithm,final_accuracy,rounds_to_baseline\n";
    std::optional<double> baseline_mean_rounds;
    std::map<AlgorithmKind, std::optional<double>> mean_rounds_by_algorithm;
    for (AlgorithmKind algorithm : suite.algorithms) {
        std::vector<double> reached;
        for (const auto& run : runs) {
            if (run.algorithm != algorithm || !run.ok || !baseline_target) {
                continue;
            }
            if (auto r = rounds_to_target(run.records, *baseline_target)) {
                reached.push_back(static_cast<double>(*r));
            }
        }
        std::optional<double> mean;
        if (!reached.empty()) {
            mean = mean_std(reached).first;
        }
        mean_rounds_by_algorithm[algorithm] = mean;
        if (algorithm == suite.speedup_baseline) {
            baseline_mean_rounds = mean;
        }
    }

    for (AlgorithmKind algorithm : suite.algorithms) {
        std::vector<double> finals;
        for (const auto& run : runs) {
            if (run.algorithm == algorithm) {
                if (auto acc = final_accuracy(run)) {
                    finals.push_back(*acc);
                }
            }
        }
        auto [mean, stdev] = mean_std(finals);
        json agg{{"seeds", finals.size()}};
        if (!finals.empty()) {
            agg["final_accuracy_mean"] = mean;
            agg["final_accuracy_std"] = stdev;
        }

        std::string rounds_cell = "-";
        const auto& mean_rounds = mean_rounds_by_algorithm[algorithm];
        if (mean_rounds) {
            if (algorithm == suite.speedup_baseline) {
                rounds_cell = fmt_short(*mean_rounds) + " (1×)";
            } else if (baseline_mean_rounds) {
                double speedup = *baseline_mean_rounds / *mean_rounds;
                rounds_cell = fmt_short(*mean_rounds) + " (" + fmt_fixed(speedup, 2) + "×)";
            } else {
                rounds_cell = fmt_short(*mean_rounds);
            }
            agg["rounds_to_baseline_mean"] = *mean_rounds;
        }
        aggregates[algorithm_token(algorithm)] = std::move(agg);

        comparison += algorithm_token(algorithm) + ",";
        comparison += finals.empty() ? "-" : fmt_fixed(mean, 4) + " ± " + fmt_fixed(stdev, 4);
        comparison += "," + rounds_cell + "\n";
    }

    json summary{{"config", serialize_config(suite)},
                 {"runs", std::move(run_list)},
                 {"aggregates", std::move(aggregates)}};
    if (baseline_target) {
        summary["baseline"] = {{"algorithm", algorithm_token(suite.speedup_baseline)},
                               {"target_accuracy", *baseline_target}};
    }

    {
        std::ofstream out(out_dir / "summary.json");
        out << summary.dump(2) << '\n';
    }
    {
        std::ofstream out(out_dir / "comparison.csv");
        out << comparison;
    }
    {
        json timings = json::array();
        for (const auto& run : runs) {
            timings.push_back({{"run", run.name}, {"wall_ms", run.wall_ms}});
        }
        json meta{{"started_at", iso_timestamp(suite_start)},
                  {"finished_at", iso_timestamp(std::chrono::system_clock::now())},
                  {"threads", threads},
                  {"runs", std::move(timings)}};
        std::ofstream out(out_dir / "meta.json");
        out << meta.dump(2) << '\n';
    }

    bool all_ok = true;
    for (const auto& run : runs) {
        all_ok = all_ok && run.ok;
    }
    return all_ok ? 0 : 1;
}

} // namespace fedsim
