#include "fedsim/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedsim {

namespace {

using MapMat = Eigen::Map<const Eigen::MatrixXd>;
using MapVec = Eigen::Map<const Eigen::VectorXd>;
using MutMat = Eigen::Map<Eigen::MatrixXd>;
using MutVec = Eigen::Map<Eigen::VectorXd>;

void check_spec(const ModelSpec& spec) {
    if (spec.input_dim < 1 || spec.num_classes < 2) {
        throw std::invalid_argument("model: input_dim must be >= 1 and num_classes >= 2");
    }
    if (spec.architecture == Architecture::Mlp1 && spec.hidden_units < 1) {
        throw std::invalid_argument("model: Mlp1 requires hidden_units >= 1");
    }
}

void check_params(const ParamVector& params, const ModelSpec& spec, const char* who) {
    if (params.size() != parameter_count(spec)) {
        throw std::invalid_argument(std::string(who) + ": params has " +
                                    std::to_string(params.size()) + " elements, spec needs " +
                                    std::to_string(parameter_count(spec)));
    }
}

void check_features(const Eigen::MatrixXd& features, const ModelSpec& spec, const char* who) {
    if (features.cols() != spec.input_dim) {
        throw std::invalid_argument(std::string(who) + ": features have " +
                                    std::to_string(features.cols()) + " columns, model expects " +
                                    std::to_string(spec.input_dim));
    }
}

void ensure_finite(const ParamVector& values, const char* who) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw std::runtime_error(std::string(who) + ": produced a non-finite parameter");
        }
    }
}

// Row-wise softmax with max subtraction; also returns the per-row
// log-sum-exp needed for the loss.
void softmax_rows(Eigen::MatrixXd& logits, Eigen::VectorXd& log_norm) {
    const Eigen::Index n = logits.rows();
    log_norm.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double mx = logits.row(i).maxCoeff();
        logits.row(i) = (logits.row(i).array() - mx).exp();
        double sum = logits.row(i).sum();
        log_norm(i) = mx + std::log(sum);
        logits.row(i) /= sum;
    }
}

struct LogRegView {
    MapMat w;
    MapVec b;
    explicit LogRegView(const double* p, const ModelSpec& s)
        : w(p, s.input_dim, s.num_classes), b(p + static_cast<std::ptrdiff_t>(s.input_dim) * s.num_classes, s.num_classes) {}
};

struct MlpView {
    MapMat w1;
    MapVec b1;
    MapMat w2;
    MapVec b2;
    explicit MlpView(const double* p, const ModelSpec& s)
        : w1(p, s.input_dim, s.hidden_units),
          b1(p + static_cast<std::ptrdiff_t>(s.input_dim) * s.hidden_units, s.hidden_units),
          w2(p + static_cast<std::ptrdiff_t>(s.input_dim) * s.hidden_units + s.hidden_units,
             s.hidden_units, s.num_classes),
          b2(p + static_cast<std::ptrdiff_t>(s.input_dim) * s.hidden_units + s.hidden_units +
                 static_cast<std::ptrdiff_t>(s.hidden_units) * s.num_classes,
             s.num_classes) {}
};

} // namespace

std::size_t parameter_count(const ModelSpec& spec) {
    check_spec(spec);
    const auto d = static_cast<std::size_t>(spec.input_dim);
    const auto c = static_cast<std::size_t>(spec.num_classes);
    switch (spec.architecture) {
        case Architecture::LogisticRegression:
            return d * c + c;
        case Architecture::Mlp1: {
            const auto h = static_cast<std::size_t>(spec.hidden_units);
            return d * h + h + h * c + c;
        }
    }
    throw std::logic_error("parameter_count: unknown architecture");
}

Eigen::MatrixXd forward_logits(const ParamVector& params, const ModelSpec& spec,
                               const Eigen::MatrixXd& features) {
    check_params(params, spec, "forward_logits");
    check_features(features, spec, "forward_logits");

    if (spec.architecture == Architecture::LogisticRegression) {
        LogRegView v(params.data(), spec);
        Eigen::MatrixXd logits = features * v.w;
        logits.rowwise() += v.b.transpose();
        return logits;
    }
    MlpView v(params.data(), spec);
    Eigen::MatrixXd hidden = features * v.w1;
    hidden.rowwise() += v.b1.transpose();
    hidden = hidden.cwiseMax(0.0);
    Eigen::MatrixXd logits = hidden * v.w2;
    logits.rowwise() += v.b2.transpose();
    return logits;
}

LossGrad loss_and_grad(const ParamVector& params, const ModelSpec& spec,
                       const Eigen::MatrixXd& features, const std::vector<int>& labels,
                       const ParamVector* prox_center, double prox_mu) {
    check_params(params, spec, "loss_and_grad");
    check_features(features, spec, "loss_and_grad");
    const auto n = features.rows();
    if (n == 0) {
        throw std::invalid_argument("loss_and_grad: empty batch");
    }
    if (static_cast<Eigen::Index>(labels.size()) != n) {
        throw std::invalid_argument("loss_and_grad: features/labels size mismatch");
    }
    for (int y : labels) {
        if (y < 0 || y >= spec.num_classes) {
            throw std::invalid_argument("loss_and_grad: label " + std::to_string(y) +
                                        " outside [0, " + std::to_string(spec.num_classes) + ")");
        }
    }
    if (prox_mu > 0.0) {
        if (prox_center == nullptr) {
            throw std::invalid_argument("loss_and_grad: prox_mu > 0 requires a prox_center");
        }
        if (prox_center->size() != params.size()) {
            throw std::invalid_argument("loss_and_grad: prox_center length mismatch");
        }
    }

    LossGrad out;
    out.grad.assign(params.size(), 0.0);

    // Forward pass, keeping the hidden activations for the backward pass.
    Eigen::MatrixXd hidden;        // Mlp1 only, post-ReLU
    Eigen::MatrixXd probs;         // softmax(logits), reused buffer
    if (spec.architecture == Architecture::LogisticRegression) {
        LogRegView v(params.data(), spec);
        probs = features * v.w;
        probs.rowwise() += v.b.transpose();
    } else {
        MlpView v(params.data(), spec);
        hidden = features * v.w1;
        hidden.rowwise() += v.b1.transpose();
        hidden = hidden.cwiseMax(0.0);
        probs = hidden * v.w2;
        probs.rowwise() += v.b2.transpose();
    }

    Eigen::VectorXd log_norm;
    Eigen::MatrixXd logits_copy = probs; // keep raw logits for the loss
    softmax_rows(probs, log_norm);

    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        loss += log_norm(i) - logits_copy(i, labels[static_cast<std::size_t>(i)]);
    }
    loss /= static_cast<double>(n);

    // d(loss)/d(logits) = (softmax - onehot) / n
    Eigen::MatrixXd dlogits = probs;
    for (Eigen::Index i = 0; i < n; ++i) {
        dlogits(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    }
    dlogits /= static_cast<double>(n);

    if (spec.architecture == Architecture::LogisticRegression) {
        const auto wd = static_cast<std::ptrdiff_t>(spec.input_dim) * spec.num_classes;
        MutMat gw(out.grad.data(), spec.input_dim, spec.num_classes);
        MutVec gb(out.grad.data() + wd, spec.num_classes);
        gw = features.transpose() * dlogits;
        gb = dlogits.colwise().sum();
    } else {
        MlpView v(params.data(), spec);
        const auto w1n = static_cast<std::ptrdiff_t>(spec.input_dim) * spec.hidden_units;
        MutMat gw1(out.grad.data(), spec.input_dim, spec.hidden_units);
        MutVec gb1(out.grad.data() + w1n, spec.hidden_units);
        MutMat gw2(out.grad.data() + w1n + spec.hidden_units, spec.hidden_units, spec.num_classes);
        MutVec gb2(out.grad.data() + w1n + spec.hidden_units +
                       static_cast<std::ptrdiff_t>(spec.hidden_units) * spec.num_classes,
                   spec.num_classes);

        gw2 = hidden.transpose() * dlogits;
        gb2 = dlogits.colwise().sum();
        Eigen::MatrixXd dhidden = dlogits * v.w2.transpose();
        dhidden = (hidden.array() > 0.0).select(dhidden, 0.0);
        gw1 = features.transpose() * dhidden;
        gb1 = dhidden.colwise().sum();
    }

    if (prox_mu > 0.0) {
        double sq = 0.0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            double diff = params[i] - (*prox_center)[i];
            sq += diff * diff;
            out.grad[i] += prox_mu * diff;
        }
        loss += 0.5 * prox_mu * sq;
    }

    out.loss = loss;
    ensure_finite(out.grad, "loss_and_grad");
    if (!std::isfinite(out.loss)) {
        throw std::runtime_error("loss_and_grad: produced a non-finite loss");
    }
    return out;
}

void sgd_step(ParamVector& params, const ParamVector& grad, ParamVector& velocity,
              const LocalHyper& hyper) {
    if (params.size() != grad.size() || params.size() != velocity.size()) {
        throw std::invalid_argument("sgd_step: params/grad/velocity length mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = hyper.momentum * velocity[i] + grad[i] + hyper.weight_decay * params[i];
        params[i] -= hyper.eta * velocity[i];
    }
    ensure_finite(params, "sgd_step");
}

ParamVector local_update(const ParamVector& w_global, const ModelSpec& spec,
                         const Dataset& ds, const ClientShard& shard,
                         const LocalHyper& hyper, RngStream rng) {
    check_params(w_global, spec, "local_update");
    if (shard.indices.empty()) {
        throw std::invalid_argument("local_update: client " + std::to_string(shard.client_id) +
                                    " has an empty shard");
    }
    if (hyper.batch_size < 1) {
        throw std::invalid_argument("local_update: batch_size must be >= 1");
    }

    ParamVector w = w_global;
    ParamVector velocity(w.size(), 0.0);
    const ParamVector* center = hyper.prox_mu > 0.0 ? &w_global : nullptr;

    std::vector<int> order = shard.indices;
    const auto shard_n = static_cast<int>(order.size());
    for (int epoch = 0; epoch < hyper.local_epochs; ++epoch) {
        rng.shuffle(order);
        for (int start = 0; start < shard_n; start += hyper.batch_size) {
            int len = std::min(hyper.batch_size, shard_n - start);
            std::span<const int> batch(order.data() + start, static_cast<std::size_t>(len));
            Eigen::MatrixXd x = gather_rows(ds, batch);
            std::vector<int> y = gather_labels(ds, batch);
            LossGrad lg = loss_and_grad(w, spec, x, y, center, hyper.prox_mu);
            sgd_step(w, lg.grad, velocity, hyper);
        }
    }
    ensure_finite(w, "local_update");
    return w;
}

double accuracy(const ParamVector& params, const ModelSpec& spec,
                const Eigen::MatrixXd& features, const std::vector<int>& labels) {
    if (features.rows() == 0) {
        throw std::invalid_argument("accuracy: empty evaluation set");
    }
    Eigen::MatrixXd logits = forward_logits(params, spec, features);
    long correct = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        int best = 0;
        for (int c = 1; c < spec.num_classes; ++c) {
            if (logits(i, c) > logits(i, best)) {
                best = c;
            }
        }
        if (best == labels[static_cast<std::size_t>(i)]) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

} // namespace fedsim
