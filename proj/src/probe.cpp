#include "actsc/probe.hpp"

#include <cmath>
#include <string>

#include "actsc/error.hpp"
#include "actsc/numeric.hpp"

namespace actsc {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void check_features(const ProbeModel& m) {
    if (m.weights.size() != m.dsn.union_set.size() || m.normalizer.mean.size() != m.weights.size() ||
        m.normalizer.std.size() != m.weights.size())
        throw ValidationError("probe model is inconsistent: weights, normalizer and DSN sizes differ");
}

} // namespace

LabeledRecords make_labels(std::span<const ActivationRecord> records, int theta_easy, int theta_hard) {
    if (theta_easy >= theta_hard) throw ConfigError("theta_easy must be below theta_hard");
    LabeledRecords out;
    for (const auto& r : records) {
        if (!r.difficulty) throw ValidationError("record '" + r.problem_id + "' has no difficulty label");
        if (*r.difficulty <= theta_easy) {
            out.kept.push_back(r);
            out.labels.push_back(0);
        } else if (*r.difficulty >= theta_hard) {
            out.kept.push_back(r);
            out.labels.push_back(1);
        }
    }
    std::size_t hard = 0;
    for (int y : out.labels) hard += static_cast<std::size_t>(y);
    if (out.kept.size() < 2 || hard == 0 || hard == out.kept.size())
        throw ValidationError("probe training needs both classes; kept " + std::to_string(out.kept.size()) +
                              " records, " + std::to_string(hard) + " hard");
    return out;
}

Matrix extract_features(std::span<const ActivationRecord> records, std::span<const std::uint32_t> union_set) {
    Matrix x(records.size(), union_set.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& acts = records[i].activations;
        for (std::size_t j = 0; j < union_set.size(); ++j) {
            if (union_set[j] >= acts.size())
                throw ValidationError("DSN index " + std::to_string(union_set[j]) + " out of range for record '" +
                                      records[i].problem_id + "' with " + std::to_string(acts.size()) + " neurons");
            x(i, j) = acts[union_set[j]];
        }
    }
    return x;
}

Normalizer fit_normalizer(const Matrix& x) {
    if (x.rows() == 0) throw ValidationError("cannot fit a normalizer on zero rows");
    const auto n = static_cast<double>(x.rows());
    Normalizer nz{std::vector<double>(x.cols(), 0.0), std::vector<double>(x.cols(), 0.0)};
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) s += x(i, j);
        const double mean = s / n;
        double ss = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) ss += (x(i, j) - mean) * (x(i, j) - mean);
        nz.mean[j] = mean;
        nz.std[j] = std::max(std::sqrt(ss / n), kStdFloor);
    }
    return nz;
}

Matrix apply_normalizer(const Normalizer& nz, const Matrix& x) {
    if (x.cols() != nz.mean.size())
        throw ValidationError("normalizer expects " + std::to_string(nz.mean.size()) + " columns, got " +
                              std::to_string(x.cols()));
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = (x(i, j) - nz.mean[j]) / nz.std[j];
    return out;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("learning_rate must be positive and finite");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (!(l2 >= 0.0)) throw ConfigError("l2 must be non-negative");
    if (!(convergence_tol >= 0.0)) throw ConfigError("convergence_tol must be non-negative");
}

ProbeTrainingSet build_training_set(std::span<const ActivationRecord> records, const DsnSelection& dsn,
                                    int theta_easy, int theta_hard) {
    auto labeled = make_labels(records, theta_easy, theta_hard);
    return {extract_features(labeled.kept, dsn.union_set), std::move(labeled.labels), dsn};
}

ProbeModel ProbeModel::zero(std::vector<std::uint32_t> union_set) {
    ProbeModel m;
    const std::size_t n = union_set.size();
    m.weights.assign(n, 0.0);
    m.normalizer = {std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)};
    m.dsn.union_set = std::move(union_set);
    return m;
}

BceObjective::BceObjective(const Matrix& features, std::span<const int> labels, double l2)
    : x_(features), y_(labels), l2_(l2) {
    if (features.rows() != labels.size())
        throw ValidationError("feature rows and label count differ");
}

double BceObjective::loss(std::span<const double> w, double b) const {
    double total = 0.0;
    for (std::size_t i = 0; i < x_.rows(); ++i) {
        const double z = dot(w, x_.row(i)) + b;
        total += softplus(z) - static_cast<double>(y_[i]) * z;
    }
    double reg = 0.0;
    for (double wi : w) reg += wi * wi;
    return total / static_cast<double>(x_.rows()) + 0.5 * l2_ * reg;
}

double BceObjective::gradient(std::span<const double> w, double b, std::span<double> grad_w) const {
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < x_.rows(); ++i) {
        const auto xi = x_.row(i);
        const double z = dot(w, xi) + b;
        const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        const double r = p - static_cast<double>(y_[i]);
        for (std::size_t j = 0; j < xi.size(); ++j) grad_w[j] += r * xi[j];
        grad_b += r;
    }
    const auto n = static_cast<double>(x_.rows());
    for (std::size_t j = 0; j < grad_w.size(); ++j) grad_w[j] = grad_w[j] / n + l2_ * w[j];
    return grad_b / n;
}

ProbeModel train_probe(const ProbeTrainingSet& ts, const TrainConfig& config) {
    config.validate();
    if (ts.features.rows() != ts.labels.size()) throw ValidationError("feature rows and label count differ");
    if (ts.features.cols() != ts.dsn.union_set.size())
        throw ValidationError("feature columns do not match the DSN union set");
    bool has0 = false, has1 = false;
    for (int y : ts.labels) {
        if (y != 0 && y != 1) throw ValidationError("labels must be 0 or 1");
        (y ? has1 : has0) = true;
    }
    if (!has0 || !has1) throw ValidationError("probe training needs both classes present");

    ProbeModel m;
    m.dsn = ts.dsn;
    m.config = config;
    m.normalizer = fit_normalizer(ts.features);
    const Matrix x = apply_normalizer(m.normalizer, ts.features);
    const BceObjective objective(x, ts.labels, config.l2);

    m.weights.assign(x.cols(), 0.0);
    std::vector<double> grad(x.cols());
    double prev = objective.loss(m.weights, m.bias);
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const double grad_b = objective.gradient(m.weights, m.bias, grad);
        for (std::size_t j = 0; j < grad.size(); ++j) m.weights[j] -= config.learning_rate * grad[j];
        m.bias -= config.learning_rate * grad_b;
        const double cur = objective.loss(m.weights, m.bias);
        if (!std::isfinite(cur))
            throw Error("probe training diverged: non-finite loss at epoch " + std::to_string(epoch));
        m.meta.loss_history.push_back(cur);
        m.meta.epochs_run = epoch;
        m.meta.final_loss = cur;
        if (std::abs(cur - prev) < config.convergence_tol) break;
        prev = cur;
    }
    return m;
}

ProbeOutput probe_output(const ProbeModel& model, std::span<const float> activations) {
    check_features(model);
    double z = model.bias;
    for (std::size_t j = 0; j < model.weights.size(); ++j) {
        const auto idx = model.dsn.union_set[j];
        if (idx >= activations.size())
            throw ValidationError("DSN index " + std::to_string(idx) + " out of range for a " +
                                  std::to_string(activations.size()) + "-neuron input");
        const double a = activations[idx];
        if (!std::isfinite(a)) throw ValidationError("non-finite activation at neuron " + std::to_string(idx));
        z += model.weights[j] * ((a - model.normalizer.mean[j]) / model.normalizer.std[j]);
    }
    return {z, sigmoid(z)};
}

double predict_p_hard(const ProbeModel& model, std::span<const float> activations) {
    return probe_output(model, activations).p_hard;
}

ProbeEvaluation evaluate_probe(const ProbeModel& model, std::span<const ActivationRecord> records,
                               std::span<const int> labels) {
    if (records.empty()) throw ValidationError("cannot evaluate a probe on zero records");
    if (records.size() != labels.size()) throw ValidationError("record and label counts differ");
    ProbeEvaluation ev;
    std::size_t correct = 0;
    CompensatedSum bce;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto out = probe_output(model, records[i].activations);
        ev.logits.push_back(out.logit);
        const int predicted = out.p_hard >= 0.5 ? 1 : 0;
        correct += predicted == labels[i] ? 1 : 0;
        bce.add(softplus(out.logit) - static_cast<double>(labels[i]) * out.logit);
    }
    const auto n = static_cast<double>(records.size());
    ev.accuracy = static_cast<double>(correct) / n;
    ev.mean_bce = bce.value() / n;
    return ev;
}

} // namespace actsc
