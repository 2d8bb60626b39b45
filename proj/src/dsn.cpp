#include "actsc/dsn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "actsc/error.hpp"

namespace actsc {

namespace {

int label_of(const ActivationRecord& r) {
    if (!r.difficulty) throw ValidationError("record '" + r.problem_id + "' has no difficulty label");
    return *r.difficulty;
}

bool in_low_group(int d, int theta, Boundary b) {
    return b == Boundary::le_gt ? d <= theta : d < theta;
}

std::string group_name(int theta, Boundary b, bool low) {
    const char* op = b == Boundary::le_gt ? (low ? "<=" : ">") : (low ? "<" : ">=");
    return std::string("d ") + op + " " + std::to_string(theta);
}

// 1 = low group, 0 = high group. Checks both groups are populated.
std::vector<std::uint8_t> partition(std::span<const ActivationRecord> records, int theta, Boundary b,
                                    std::size_t& n_low, std::size_t& n_high) {
    std::vector<std::uint8_t> low(records.size());
    n_low = n_high = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        low[i] = in_low_group(label_of(records[i]), theta, b) ? 1 : 0;
        (low[i] ? n_low : n_high) += 1;
    }
    if (n_low == 0) throw ValidationError("empty group: no record with " + group_name(theta, b, true));
    if (n_high == 0) throw ValidationError("empty group: no record with " + group_name(theta, b, false));
    return low;
}

double neuron_gap(std::span<const ActivationRecord> records, const std::vector<std::uint8_t>& low,
                  std::size_t n_low, std::size_t n_high, std::size_t neuron) {
    double sum_low = 0.0, sum_high = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const double a = records[i].activations[neuron];
        if (low[i])
            sum_low += a;
        else
            sum_high += a;
    }
    return sum_low / static_cast<double>(n_low) - sum_high / static_cast<double>(n_high);
}

std::size_t neuron_count_of(std::span<const ActivationRecord> records) {
    const std::size_t n = records.empty() ? 0 : records.front().activations.size();
    for (const auto& r : records)
        if (r.activations.size() != n)
            throw ValidationError("dimension mismatch in record '" + r.problem_id + "'");
    return n;
}

std::vector<std::uint32_t> select(const std::vector<double>& gaps, double margin, SelectionMode mode) {
    std::vector<std::uint32_t> out;
    for (std::size_t n = 0; n < gaps.size(); ++n) {
        const double g = mode == SelectionMode::abs ? std::abs(gaps[n]) : gaps[n];
        if (g > margin) out.push_back(static_cast<std::uint32_t>(n));
    }
    return out;
}

} // namespace

SelectionMode parse_selection_mode(std::string_view name) {
    if (name == "sign") return SelectionMode::sign;
    if (name == "abs") return SelectionMode::abs;
    if (name == "top_k" || name == "top-k") return SelectionMode::top_k;
    throw ConfigError("unknown selection mode '" + std::string(name) + "'");
}

std::string_view to_string(SelectionMode mode) {
    switch (mode) {
    case SelectionMode::sign: return "sign";
    case SelectionMode::abs: return "abs";
    case SelectionMode::top_k: return "top_k";
    }
    return "?";
}

void GapConfig::validate() const {
    if (!(1 <= theta_easy && theta_easy < theta_hard && theta_hard <= 5))
        throw ConfigError("thresholds must satisfy 1 <= theta_easy < theta_hard <= 5");
    if (!(margin >= 0.0)) throw ConfigError("margin must be non-negative");
    if (mode == SelectionMode::top_k && top_k == 0) throw ConfigError("top_k must be positive");
}

std::vector<double> group_mean_activation(std::span<const ActivationRecord> records,
                                          const DifficultyPredicate& pred) {
    const std::size_t n = neuron_count_of(records);
    std::vector<double> sum(n, 0.0);
    std::size_t count = 0;
    for (const auto& r : records) {
        if (!pred(label_of(r))) continue;
        ++count;
        for (std::size_t k = 0; k < n; ++k) sum[k] += r.activations[k];
    }
    if (count == 0) throw ValidationError("empty group: no record matches the difficulty predicate");
    for (auto& s : sum) s /= static_cast<double>(count);
    return sum;
}

double gap(std::span<const ActivationRecord> records, std::uint32_t neuron, int theta, Boundary boundary) {
    const std::size_t n = neuron_count_of(records);
    if (neuron >= n && !records.empty())
        throw ValidationError("neuron index " + std::to_string(neuron) + " out of range");
    std::size_t n_low = 0, n_high = 0;
    const auto low = partition(records, theta, boundary, n_low, n_high);
    return neuron_gap(records, low, n_low, n_high, neuron);
}

std::vector<double> gap_all(std::span<const ActivationRecord> records, int theta, Boundary boundary,
                            Exec exec) {
    const std::size_t n = neuron_count_of(records);
    std::size_t n_low = 0, n_high = 0;
    const auto low = partition(records, theta, boundary, n_low, n_high);
    std::vector<double> gaps(n);
    if (exec == Exec::parallel) {
        const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t k = 0; k < count; ++k)
            gaps[static_cast<std::size_t>(k)] = neuron_gap(records, low, n_low, n_high, static_cast<std::size_t>(k));
    } else {
        for (std::size_t k = 0; k < n; ++k) gaps[k] = neuron_gap(records, low, n_low, n_high, k);
    }
    return gaps;
}

DsnSelection identify_dsn(std::span<const ActivationRecord> records, const GapConfig& config, Exec exec) {
    config.validate();
    DsnSelection sel;
    sel.gaps_easy = gap_all(records, config.theta_easy, Boundary::le_gt, exec);
    sel.gaps_hard = gap_all(records, config.theta_hard, Boundary::lt_ge, exec);

    if (config.mode == SelectionMode::top_k) {
        const std::size_t n = sel.gaps_easy.size();
        std::vector<std::uint32_t> order(n);
        std::iota(order.begin(), order.end(), 0u);
        auto score = [&](std::uint32_t k) { return std::max(std::abs(sel.gaps_easy[k]), std::abs(sel.gaps_hard[k])); };
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return score(a) > score(b); });
        order.resize(std::min(config.top_k, n));
        std::sort(order.begin(), order.end());
        for (auto k : order) {
            if (std::abs(sel.gaps_easy[k]) >= std::abs(sel.gaps_hard[k]))
                sel.easy_set.push_back(k);
            else
                sel.hard_set.push_back(k);
        }
    } else {
        sel.easy_set = select(sel.gaps_easy, config.margin, config.mode);
        sel.hard_set = select(sel.gaps_hard, config.margin, config.mode);
    }

    std::set_union(sel.easy_set.begin(), sel.easy_set.end(), sel.hard_set.begin(), sel.hard_set.end(),
                   std::back_inserter(sel.union_set));
    if (sel.union_set.empty())
        throw ValidationError("no difficulty-sensitive neurons selected (margin " + std::to_string(config.margin) +
                              "); the probe would have zero features");
    return sel;
}

} // namespace actsc
