#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "actsc/activation_store.hpp"
#include "actsc/controllers.hpp"
#include "actsc/exec.hpp"
#include "actsc/probe.hpp"
#include "actsc/samplers.hpp"

namespace actsc {

struct TraceSummary {
    std::string problem_id;
    std::size_t n_samples = 0;
    std::string final_answer;
    bool correct = false;
    Route route = Route::none;
    StopReason stop_reason = StopReason::fixed_budget;

    bool operator==(const TraceSummary&) const = default;
};

/// Per-policy aggregate. Token figures are per-problem averages in thousands
/// of tokens (input + output); the exact integer totals are kept alongside.
struct RunReport {
    Policy policy = Policy::sc;
    std::string dataset;
    std::size_t n_problems = 0;
    double avg_samples = 0.0;
    double prepare_tokens_k = 0.0;
    double inference_tokens_k = 0.0;
    double accuracy_pct = 0.0;
    std::optional<double> pct_reduction_vs_sc;
    bool paired = true;
    std::uint64_t total_samples = 0;
    std::uint64_t prepare_tokens_total = 0;
    std::uint64_t inference_tokens_total = 0;
    std::vector<TraceSummary> per_problem;

    bool has_prepare_phase() const noexcept { return policy == Policy::dsc; }
    bool operator==(const RunReport&) const = default;
};

using GoldAnswers = std::map<std::string, std::string, std::less<>>;

/// (avg - sc_avg) / sc_avg * 100, unrounded.
double pct_reduction(double avg_samples, double sc_avg_samples);

/// Builds a report from one policy's traces. Correctness is exact string
/// match against the gold answer; a problem without gold counts as wrong.
RunReport aggregate_metrics(Policy policy, std::string dataset, std::span<const SamplingTrace> traces,
                            const GoldAnswers& gold, std::optional<double> sc_avg_samples = std::nullopt);

enum class ReportFormat { text_table, json, csv };
ReportFormat parse_report_format(std::string_view name);

/// Samples and accuracy at 2 decimals, reductions and token costs at 1.
std::string render_report(std::span<const RunReport> reports, ReportFormat format);
std::vector<RunReport> parse_report_json(std::string_view text);

struct PolicyRun {
    Policy policy;
    PolicyConfig config;
};

struct BenchmarkInputs {
    std::string dataset_name;
    /// Problems to run, in order. When empty the source's problem ids are used.
    std::span<const ActivationRecord> records;
    const ProbeModel* probe = nullptr;  // required when ACTSC is requested
    /// Overrides any per-policy tau. When neither is set, tau is calibrated on
    /// `records` before sampling.
    std::optional<double> tau;
    std::vector<PolicyRun> policies;
    Exec exec = Exec::parallel;
};

struct BenchmarkResult {
    std::vector<RunReport> reports;                  // one per policy, input order
    std::vector<std::vector<SamplingTrace>> traces;  // per policy, sorted by problem_id
    std::optional<double> tau;                       // tau used for ACTSC, if any
};

/// Runs every policy over every problem. Each (policy, problem) pair opens a
/// fresh stream from `source`, so paired sources feed all policies the same
/// answers. Problems run on an OpenMP worker pool when exec is parallel; the
/// result does not depend on scheduling.
BenchmarkResult run_benchmark(const BenchmarkInputs& inputs, const AnswerSource& source);

/// CSV problem_id,difficulty,logit,p_hard; difficulty is blank when unlabeled.
void export_probe_logits(const ProbeModel& model, std::span<const ActivationRecord> records,
                         const std::filesystem::path& out_path);

} // namespace actsc
