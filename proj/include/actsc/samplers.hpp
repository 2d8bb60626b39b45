#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "actsc/activation_store.hpp"
#include "actsc/answer.hpp"

namespace actsc {

/// Answers for one problem, served in a fixed order. Not thread-safe; one
/// controller owns one stream.
class AnswerStream {
public:
    virtual ~AnswerStream() = default;

    /// Exactly `count` samples (count >= 1), or throws SamplerError.
    virtual std::vector<AnswerSample> draw(std::size_t count) = 0;
};

/// A backend that opens independent per-problem streams. open() is safe to
/// call concurrently for distinct problems.
class AnswerSource {
public:
    virtual ~AnswerSource() = default;

    /// Throws SamplerError for an unknown problem. Opening the same problem
    /// twice yields the same answer sequence whenever paired() is true.
    virtual std::unique_ptr<AnswerStream> open(std::string_view problem_id) const = 0;

    virtual std::optional<std::string> gold_answer(std::string_view problem_id) const = 0;
    virtual std::vector<std::string> problem_ids() const = 0;

    /// True when repeated opens replay identical streams, so policies compared
    /// on this source see the same answers.
    virtual bool paired() const { return true; }
};

// ---- simulation ----------------------------------------------------------

struct SimProblemSpec {
    std::string problem_id;
    std::string gold_answer;
    std::vector<std::pair<std::string, double>> answer_distribution;
    std::uint32_t mean_input_tokens = 1;
    std::uint32_t mean_output_tokens = 1;

    void validate() const;
};

std::vector<SimProblemSpec> load_sim_specs(const std::filesystem::path& path);
void save_sim_specs(const std::vector<SimProblemSpec>& specs, const std::filesystem::path& path);

/// 64-bit stream seed derived from (global seed, problem id) only.
std::uint64_t stream_seed(std::uint64_t global_seed, std::string_view problem_id) noexcept;

/// Portable uniform and normal variates on top of mt19937_64, whose output
/// sequence is fixed by the standard.
class StreamRng {
public:
    explicit StreamRng(std::uint64_t seed) : engine_(seed) {}

    double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double normal() noexcept;

private:
    std::mt19937_64 engine_;
};

/// Categorical answer simulator. Token counts jitter around the configured
/// means with Poisson-like variance (normal approximation, variance = mean).
class SimSource final : public AnswerSource {
public:
    SimSource(std::vector<SimProblemSpec> specs, std::uint64_t seed);

    std::unique_ptr<AnswerStream> open(std::string_view problem_id) const override;
    std::optional<std::string> gold_answer(std::string_view problem_id) const override;
    std::vector<std::string> problem_ids() const override;

    const SimProblemSpec& spec(std::string_view problem_id) const;

private:
    std::vector<SimProblemSpec> specs_;
    std::vector<std::size_t> order_;  // indices sorted by problem_id, for lookup
    std::uint64_t seed_;
};

// ---- replay --------------------------------------------------------------

/// Serves a SamplePool in pool order. Drawing past the end of a problem's
/// samples throws SamplerError.
class ReplaySource final : public AnswerSource {
public:
    explicit ReplaySource(SamplePool pool);

    std::unique_ptr<AnswerStream> open(std::string_view problem_id) const override;
    std::optional<std::string> gold_answer(std::string_view problem_id) const override;
    std::vector<std::string> problem_ids() const override;

private:
    SamplePool pool_;
};

// ---- answer extraction ---------------------------------------------------

enum class AnswerPattern {
    boxed,              // content of the last \boxed{...}
    final_answer_line,  // text after the last "Final Answer:" up to end of line
};

AnswerPattern parse_answer_pattern(std::string_view name);
std::string_view to_string(AnswerPattern pattern);

/// Trims and collapses internal whitespace runs to one space.
std::string canonicalize_answer(std::string_view text);

/// Returns kNoAnswer when the pattern does not match or matches empty text.
std::string extract_final_answer(std::string_view completion, AnswerPattern pattern);

} // namespace actsc
