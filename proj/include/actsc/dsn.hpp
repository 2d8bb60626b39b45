#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "actsc/activation_store.hpp"
#include "actsc/exec.hpp"

namespace actsc {

/// Which side of the threshold the boundary level falls on.
///   le_gt: low = {d <= theta}, high = {d > theta}
///   lt_ge: low = {d <  theta}, high = {d >= theta}
enum class Boundary { le_gt, lt_ge };

enum class SelectionMode {
    sign,   // gap > margin
    abs,    // |gap| > margin
    top_k,  // the top_k neurons by max(|gap_easy|, |gap_hard|); margin unused
};

SelectionMode parse_selection_mode(std::string_view name);
std::string_view to_string(SelectionMode mode);

struct GapConfig {
    int theta_easy = 1;
    int theta_hard = 5;
    double margin = 0.0;
    SelectionMode mode = SelectionMode::sign;
    std::size_t top_k = 1;

    void validate() const;
};

struct DsnSelection {
    std::vector<std::uint32_t> easy_set;
    std::vector<std::uint32_t> hard_set;
    std::vector<std::uint32_t> union_set;
    std::vector<double> gaps_easy;  // one entry per neuron
    std::vector<double> gaps_hard;

    bool operator==(const DsnSelection&) const = default;
};

using DifficultyPredicate = std::function<bool(int)>;

/// Per-neuron mean activation over records whose difficulty satisfies `pred`.
/// Throws ValidationError on an unlabeled record or when no record matches.
std::vector<double> group_mean_activation(std::span<const ActivationRecord> records,
                                          const DifficultyPredicate& pred);

/// Low-group mean minus high-group mean for one neuron.
double gap(std::span<const ActivationRecord> records, std::uint32_t neuron, int theta, Boundary boundary);

/// gap() for every neuron at once. The parallel kernel splits over neurons;
/// each neuron sums its records in input order, so both paths agree bit for bit.
std::vector<double> gap_all(std::span<const ActivationRecord> records, int theta, Boundary boundary,
                            Exec exec = Exec::parallel);

/// Easy gaps use le_gt at theta_easy. Hard gaps use lt_ge at theta_hard, since
/// le_gt at the top label would leave the high group empty.
DsnSelection identify_dsn(std::span<const ActivationRecord> records, const GapConfig& config,
                          Exec exec = Exec::parallel);

} // namespace actsc
