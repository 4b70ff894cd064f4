#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fedsim/rng.hpp"

namespace fedsim {

/// In-memory labelled dataset. Rows of `features` pair with `labels`.
struct Dataset {
    Eigen::MatrixXd features; // n x dim
    std::vector<int> labels;  // values in [0, num_classes)
    int num_classes = 0;

    int n() const { return static_cast<int>(features.rows()); }
    int dim() const { return static_cast<int>(features.cols()); }
};

/// One client's slice of a parent dataset, held as row indices.
struct ClientShard {
    int client_id = -1;
    std::vector<int> indices;

    bool operator==(const ClientShard&) const = default;
};

enum class PartitionScheme { ClientHeterogeneity, ClassHeterogeneity };

struct PartitionSpec {
    PartitionScheme scheme = PartitionScheme::ClientHeterogeneity;
    double alpha = 1.0;          // Dirichlet concentration, > 0
    int num_clients = 1;
    int examples_per_client = 0; // ClassHeterogeneity only

    bool operator==(const PartitionSpec&) const = default;
};

/// Gaussian blob dataset: class c is an isotropic unit-variance cloud
/// centered at separation * u_c, where the unit directions u_c are a fixed
/// function of (c, dim) and do not depend on `rng`. Emits exactly
/// `per_class` rows per class, grouped by class in label order.
Dataset synth_dataset(int num_classes, int dim, int per_class, double separation,
                      RngStream rng);

/// Per-class Dirichlet split: for each class, proportions over clients are
/// drawn from Dir(alpha * 1) and converted to integer counts by
/// largest-remainder rounding, so every pool index lands on exactly one
/// client. Shard sizes vary; empty shards are legal.
std::vector<ClientShard> partition_client_heterogeneity(const Dataset& ds,
                                                        std::span<const int> pool,
                                                        const PartitionSpec& spec,
                                                        RngStream rng);

/// Per-client Dirichlet label mix: each client draws a categorical label
/// distribution from Dir(alpha * 1) and fills exactly examples_per_client
/// slots with unused indices of the drawn classes. When a class pool runs
/// dry the label is redrawn from the distribution renormalized over the
/// remaining classes. Requires num_clients * examples_per_client <= |pool|.
std::vector<ClientShard> partition_class_heterogeneity(const Dataset& ds,
                                                       std::span<const int> pool,
                                                       const PartitionSpec& spec,
                                                       RngStream rng);

// Conveniences that partition the full dataset.
std::vector<ClientShard> partition_client_heterogeneity(const Dataset& ds,
                                                        const PartitionSpec& spec,
                                                        RngStream rng);
std::vector<ClientShard> partition_class_heterogeneity(const Dataset& ds,
                                                       const PartitionSpec& spec,
                                                       RngStream rng);

struct ValSplit {
    std::vector<int> val;   // per_class indices per class, ascending within class
    std::vector<int> train; // complement, ascending
};

/// Class-balanced holdout: exactly per_class indices per class, drawn
/// uniformly without replacement; train is the untouched remainder.
ValSplit build_validation_set(const Dataset& ds, int per_class, RngStream rng);

/// Reproducibility manifest: client -> indices plus the spec and seed that
/// produced the partition. Clients that ended up empty are listed too.
nlohmann::json partition_manifest(const std::vector<ClientShard>& shards,
                                  const PartitionSpec& spec, std::uint64_t seed);

/// Rows/labels of `ds` selected by `indices`, in the given order.
Eigen::MatrixXd gather_rows(const Dataset& ds, std::span<const int> indices);
std::vector<int> gather_labels(const Dataset& ds, std::span<const int> indices);

} // namespace fedsim
