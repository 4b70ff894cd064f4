#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "fedsim/data.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

enum class Architecture { LogisticRegression, Mlp1 };

/// Flat model parameters. All operations in this module keep every element
/// finite and never change the length.
using ParamVector = std::vector<double>;

struct ModelSpec {
    Architecture architecture = Architecture::LogisticRegression;
    int input_dim = 0;
    int num_classes = 0;
    int hidden_units = 0; // Mlp1 only

    bool operator==(const ModelSpec&) const = default;
};

/// Flat layout:
///   LogisticRegression: [W (input_dim x num_classes, column-major), b]
///   Mlp1:               [W1 (input_dim x hidden), b1, W2 (hidden x num_classes), b2]
std::size_t parameter_count(const ModelSpec& spec);

struct LocalHyper {
    double eta = 0.01;        // learning rate
    double momentum = 0.0;    // in [0, 1)
    double weight_decay = 0.0;
    double prox_mu = 0.0;     // proximal term weight; 0 disables it exactly
    int batch_size = 32;
    int local_epochs = 1;

    bool operator==(const LocalHyper&) const = default;
};

/// Raw (pre-softmax) class scores, one row per input row.
Eigen::MatrixXd forward_logits(const ParamVector& params, const ModelSpec& spec,
                               const Eigen::MatrixXd& features);

struct LossGrad {
    double loss = 0.0;
    ParamVector grad;
};

/// Mean cross-entropy over the batch plus, when prox_mu > 0,
/// (prox_mu/2)*||params - prox_center||^2. The gradient covers both terms;
/// weight decay is applied later in sgd_step, not here.
LossGrad loss_and_grad(const ParamVector& params, const ModelSpec& spec,
                       const Eigen::MatrixXd& features, const std::vector<int>& labels,
                       const ParamVector* prox_center = nullptr, double prox_mu = 0.0);

/// Heavy-ball SGD update, in place:
///   velocity <- momentum*velocity + grad + weight_decay*params
///   params   <- params - eta*velocity
void sgd_step(ParamVector& params, const ParamVector& grad, ParamVector& velocity,
              const LocalHyper& hyper);

/// Runs hyper.local_epochs epochs of shuffled mini-batch SGD on the shard,
/// starting from w_global with zeroed momentum. When prox_mu > 0 the
/// proximal center is w_global. Deterministic in (inputs, rng key).
ParamVector local_update(const ParamVector& w_global, const ModelSpec& spec,
                         const Dataset& ds, const ClientShard& shard,
                         const LocalHyper& hyper, RngStream rng);

/// Fraction of rows whose argmax logit matches the label (ties resolve to
/// the smallest class index).
double accuracy(const ParamVector& params, const ModelSpec& spec,
                const Eigen::MatrixXd& features, const std::vector<int>& labels);

} // namespace fedsim
