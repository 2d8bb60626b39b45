#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "actsc/answer.hpp"
#include "actsc/samplers.hpp"

namespace actsc {

enum class Policy { sc, ac, esc, dsc, actsc };
enum class Route { easy, hard, none };
enum class StopReason { fixed_budget, agreement, window_unanimous, confidence, budget_exhausted, single_sample };

/// Which samples ACTSC's confidence is measured over.
enum class ConfScope { global, window };

Policy parse_policy(std::string_view name);
std::string_view to_string(Policy p);
std::string_view display_name(Policy p);  // "SC", "ACTSC", ...
Route parse_route(std::string_view name);
std::string_view to_string(Route r);
StopReason parse_stop_reason(std::string_view name);
std::string_view to_string(StopReason r);
ConfScope parse_conf_scope(std::string_view name);
std::string_view to_string(ConfScope s);

struct PolicyConfig {
    std::size_t k_max = 40;
    double ac_threshold = 0.95;
    std::size_t ac_min_samples = 2;
    std::size_t esc_window = 5;
    std::size_t dsc_presamples = 3;
    double dsc_threshold = 0.95;
    std::size_t actsc_window = 5;
    double actsc_gamma = 0.50;
    std::optional<double> tau;
    ConfScope conf_scope = ConfScope::global;

    void validate() const;
};

struct SamplingTrace {
    std::string problem_id;
    Policy policy = Policy::sc;
    Route route = Route::none;
    std::optional<double> p_hard;
    std::vector<AnswerSample> samples;
    std::vector<AnswerSample> prepare_samples;
    std::string final_answer;
    StopReason stop_reason = StopReason::fixed_budget;
    double confidence_at_stop = 0.0;
    std::vector<std::size_t> draw_sizes;  // size of every draw() issued for inference samples

    std::uint64_t inference_tokens() const noexcept;
    std::uint64_t prepare_tokens() const noexcept;
};

struct VoteResult {
    std::string winner;
    std::size_t count = 0;
};

/// Most frequent answer; ties go to the answer that occurred first.
VoteResult majority_vote(std::span<const std::string> answers);
VoteResult majority_vote(std::span<const AnswerSample> samples);

struct RoutingDecision {
    double p_hard;
    double tau;
    Route route;
};

/// Easy iff p_hard < tau.
RoutingDecision route_problem(double p_hard, double tau);

SamplingTrace run_sc(AnswerStream& stream, std::string problem_id, std::size_t k);
SamplingTrace run_ac(AnswerStream& stream, std::string problem_id, const PolicyConfig& config);
SamplingTrace run_esc(AnswerStream& stream, std::string problem_id, const PolicyConfig& config);
SamplingTrace run_dsc(AnswerStream& stream, std::string problem_id, const PolicyConfig& config);

/// Routes on p_hard against config.tau, then either takes one sample or runs
/// the dynamic-window loop until the majority answer's confidence reaches gamma.
SamplingTrace run_actsc(AnswerStream& stream, std::string problem_id, double p_hard, const PolicyConfig& config);

/// Dispatches on policy. p_hard is required for ACTSC and ignored otherwise.
SamplingTrace run_policy(Policy policy, AnswerStream& stream, std::string problem_id, std::optional<double> p_hard,
                         const PolicyConfig& config);

} // namespace actsc
