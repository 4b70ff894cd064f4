#include "fedsim/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fedsim {

namespace {

std::string trim(const std::string& s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) {
        return "";
    }
    auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Parser {
    std::map<std::string, std::string> kv;
    std::vector<std::string> violations;

    void fail(const std::string& message) { violations.push_back(message); }

    bool has(const std::string& key) const { return kv.count(key) > 0; }

    template <typename F>
    void with(const std::string& key, F&& apply) {
        auto it = kv.find(key);
        if (it == kv.end()) {
            return;
        }
        try {
            apply(it->second);
        } catch (const std::exception& e) {
            fail(key + ": " + e.what());
        }
    }

    void parse_int(const std::string& key, int& out) {
        with(key, [&](const std::string& v) {
            std::size_t pos = 0;
            int value = std::stoi(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("not an integer: '" + v + "'");
            out = value;
        });
    }

    void parse_double(const std::string& key, double& out) {
        with(key, [&](const std::string& v) {
            std::size_t pos = 0;
            double value = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("not a number: '" + v + "'");
            out = value;
        });
    }
};

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "architecture", "input_dim", "num_classes", "hidden_units",
        "partition_scheme", "alpha", "examples_per_client",
        "train_per_class", "test_per_class", "separation", "val_per_class",
        "eta", "momentum", "weight_decay", "prox_mu", "batch_size", "local_epochs",
        "num_clients", "sampling_ratio", "rounds", "client_weights", "score_fn",
        "algorithms", "seeds", "targets", "speedup_baseline",
    };
    return keys;
}

} // namespace

std::string algorithm_token(AlgorithmKind a) {
    return algorithm_name(a);
}

AlgorithmKind parse_algorithm(const std::string& token) {
    if (token == "FedAvg") return AlgorithmKind::FedAvg;
    if (token == "FedProx") return AlgorithmKind::FedProx;
    if (token == "FedPdp") return AlgorithmKind::FedPdp;
    if (token == "FedCA") return AlgorithmKind::FedCA;
    if (token == "FedCM-UCB") return AlgorithmKind::FedCM_UCB;
    if (token == "FedCM-TS") return AlgorithmKind::FedCM_TS;
    throw std::invalid_argument("unknown algorithm '" + token +
                                "' (expected FedAvg, FedProx, FedPdp, FedCA, FedCM-UCB or FedCM-TS)");
}

ExperimentSuite parse_config_text(const std::string& text) {
    Parser p;

    std::stringstream stream(text);
    std::string line;
    int line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            p.fail("line " + std::to_string(line_no) + ": expected 'key = value', got '" + line + "'");
            continue;
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (known_keys().count(key) == 0) {
            p.fail("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
            continue;
        }
        if (p.kv.count(key)) {
            p.fail("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
            continue;
        }
        p.kv[key] = value;
    }

    ExperimentSuite suite;
    auto& cfg = suite.base;
    cfg.model.architecture = Architecture::LogisticRegression;
    cfg.model.input_dim = 32;
    cfg.model.num_classes = 10;
    cfg.model.hidden_units = 16;
    cfg.partition.scheme = PartitionScheme::ClassHeterogeneity;
    cfg.partition.alpha = 0.1;
    cfg.partition.examples_per_client = 200;
    cfg.partition.num_clients = cfg.num_clients;
    cfg.local.eta = 0.05;
    cfg.local.momentum = 0.9;
    cfg.local.weight_decay = 0.0;
    cfg.local.prox_mu = 0.1;
    cfg.local.batch_size = 32;
    cfg.local.local_epochs = 5;
    suite.algorithms = {AlgorithmKind::FedAvg};
    suite.seeds = {1};

    p.with("architecture", [&](const std::string& v) {
        if (v == "logistic_regression") {
            cfg.model.architecture = Architecture::LogisticRegression;
        } else if (v == "mlp1") {
            cfg.model.architecture = Architecture::Mlp1;
        } else {
            throw std::invalid_argument("expected logistic_regression or mlp1, got '" + v + "'");
        }
    });
    p.parse_int("input_dim", cfg.model.input_dim);
    p.parse_int("num_classes", cfg.model.num_classes);
    p.parse_int("hidden_units", cfg.model.hidden_units);

    p.with("partition_scheme", [&](const std::string& v) {
        if (v == "client") {
            cfg.partition.scheme = PartitionScheme::ClientHeterogeneity;
        } else if (v == "class") {
            cfg.partition.scheme = PartitionScheme::ClassHeterogeneity;
        } else {
            throw std::invalid_argument("expected client or class, got '" + v + "'");
        }
    });
    p.parse_double("alpha", cfg.partition.alpha);
    p.parse_int("examples_per_client", cfg.partition.examples_per_client);
    p.parse_int("train_per_class", cfg.train_per_class);
    p.parse_int("test_per_class", cfg.test_per_class);
    p.parse_double("separation", cfg.separation);
    p.parse_int("val_per_class", cfg.val_per_class);

    p.parse_double("eta", cfg.local.eta);
    p.parse_double("momentum", cfg.local.momentum);
    p.parse_double("weight_decay", cfg.local.weight_decay);
    p.parse_double("prox_mu", cfg.local.prox_mu);
    p.parse_int("batch_size", cfg.local.batch_size);
    p.parse_int("local_epochs", cfg.local.local_epochs);

    p.parse_int("num_clients", cfg.num_clients);
    p.parse_double("sampling_ratio", cfg.sampling_ratio);
    p.parse_int("rounds", cfg.rounds);
    p.with("client_weights", [&](const std::string& v) {
        if (v == "proportional") {
            cfg.client_weights_mode = WeightMode::DataProportional;
        } else if (v == "uniform") {
            cfg.client_weights_mode = WeightMode::Uniform;
        } else {
            throw std::invalid_argument("expected proportional or uniform, got '" + v + "'");
        }
    });
    p.with("score_fn", [&](const std::string& v) {
        if (v == "dirac_delta") {
            cfg.score_fn = ScoreKind::DiracDelta;
        } else if (v == "classification_loss") {
            cfg.score_fn = ScoreKind::ClassificationLoss;
        } else {
            throw std::invalid_argument("expected dirac_delta or classification_loss, got '" + v + "'");
        }
    });

    p.with("algorithms", [&](const std::string& v) {
        auto tokens = split_list(v);
        if (tokens.empty()) {
            throw std::invalid_argument("must list at least one algorithm");
        }
        suite.algorithms.clear();
        for (const auto& token : tokens) {
            suite.algorithms.push_back(parse_algorithm(token));
        }
    });
    p.with("seeds", [&](const std::string& v) {
        auto tokens = split_list(v);
        if (tokens.empty()) {
            throw std::invalid_argument("must list at least one seed");
        }
        suite.seeds.clear();
        for (const auto& token : tokens) {
            std::size_t pos = 0;
            suite.seeds.push_back(std::stoull(token, &pos));
            if (pos != token.size()) {
                throw std::invalid_argument("not an unsigned integer: '" + token + "'");
            }
        }
    });
    p.with("targets", [&](const std::string& v) {
        suite.targets.clear();
        for (const auto& token : split_list(v)) {
            std::size_t pos = 0;
            suite.targets.push_back(std::stod(token, &pos));
            if (pos != token.size()) {
                throw std::invalid_argument("not a number: '" + token + "'");
            }
        }
    });
    p.with("speedup_baseline",
           [&](const std::string& v) { suite.speedup_baseline = parse_algorithm(v); });

    cfg.partition.num_clients = cfg.num_clients;

    // Constraint check on every materialized run, so all violations
    // surface before any compute.
    if (p.violations.empty()) {
        std::set<std::string> seen;
        for (AlgorithmKind algorithm : suite.algorithms) {
            try {
                validate(materialize_run(suite, algorithm, suite.seeds.front()));
            } catch (const std::exception& e) {
                std::string message = e.what();
                std::stringstream lines(message);
                std::string item;
                std::getline(lines, item); // drop the "invalid configuration:" banner
                while (std::getline(lines, item)) {
                    item = trim(item);
                    if (!item.empty() && seen.insert(item).second) {
                        p.fail(item.substr(item.find_first_not_of("- ")));
                    }
                }
            }
        }
    }

    if (!p.violations.empty()) {
        std::string message = "invalid configuration:";
        for (const auto& v : p.violations) {
            message += "\n  - " + v;
        }
        throw std::invalid_argument(message);
    }
    return suite;
}

ExperimentSuite parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("config file not found: " + path);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

std::string serialize_config(const ExperimentSuite& suite) {
    const auto& cfg = suite.base;
    std::ostringstream out;
    out << "architecture = "
        << (cfg.model.architecture == Architecture::LogisticRegression ? "logistic_regression"
                                                                       : "mlp1")
        << '\n';
    out << "input_dim = " << cfg.model.input_dim << '\n';
    out << "num_classes = " << cfg.model.num_classes << '\n';
    out << "hidden_units = " << cfg.model.hidden_units << '\n';
    out << "partition_scheme = "
        << (cfg.partition.scheme == PartitionScheme::ClientHeterogeneity ? "client" : "class")
        << '\n';
    out << "alpha = " << fmt_double(cfg.partition.alpha) << '\n';
    out << "examples_per_client = " << cfg.partition.examples_per_client << '\n';
    out << "train_per_class = " << cfg.train_per_class << '\n';
    out << "test_per_class = " << cfg.test_per_class << '\n';
    out << "separation = " << fmt_double(cfg.separation) << '\n';
    out << "val_per_class = " << cfg.val_per_class << '\n';
    out << "eta = " << fmt_double(cfg.local.eta) << '\n';
    out << "momentum = " << fmt_double(cfg.local.momentum) << '\n';
    out << "weight_decay = " << fmt_double(cfg.local.weight_decay) << '\n';
    out << "prox_mu = " << fmt_double(cfg.local.prox_mu) << '\n';
    out << "batch_size = " << cfg.local.batch_size << '\n';
    out << "local_epochs = " << cfg.local.local_epochs << '\n';
    out << "num_clients = " << cfg.num_clients << '\n';
    out << "sampling_ratio = " << fmt_double(cfg.sampling_ratio) << '\n';
    out << "rounds = " << cfg.rounds << '\n';
    out << "client_weights = "
        << (cfg.client_weights_mode == WeightMode::DataProportional ? "proportional" : "uniform")
        << '\n';
    out << "score_fn = "
        << (cfg.score_fn == ScoreKind::DiracDelta ? "dirac_delta" : "classification_loss") << '\n';

    out << "algorithms = ";
    for (std::size_t i = 0; i < suite.algorithms.size(); ++i) {
        if (i) out << ',';
        out << algorithm_token(suite.algorithms[i]);
    }
    out << '\n';
    out << "seeds = ";
    for (std::size_t i = 0; i < suite.seeds.size(); ++i) {
        if (i) out << ',';
        out << suite.seeds[i];
    }
    out << '\n';
    if (!suite.targets.empty()) {
        out << "targets = ";
        for (std::size_t i = 0; i < suite.targets.size(); ++i) {
            if (i) out << ',';
            out << fmt_double(suite.targets[i]);
        }
        out << '\n';
    }
    out << "speedup_baseline = " << algorithm_token(suite.speedup_baseline) << '\n';
    return out.str();
}

FederationConfig materialize_run(const ExperimentSuite& suite, AlgorithmKind algorithm,
                                 std::uint64_t seed) {
    FederationConfig cfg = suite.base;
    cfg.algorithm = algorithm;
    cfg.seed = seed;
    if (algorithm != AlgorithmKind::FedProx) {
        cfg.local.prox_mu = 0.0;
    }
    cfg.partition.num_clients = cfg.num_clients;
    return cfg;
}

} // namespace fedsim
