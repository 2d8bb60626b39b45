#include "actsc/controllers.hpp"

#include <algorithm>
#include <unordered_map>

#include "actsc/error.hpp"

namespace actsc {

namespace {

template <class Enum, std::size_t N>
Enum parse_enum(std::string_view name, const std::pair<Enum, std::string_view> (&table)[N], const char* what) {
    for (const auto& [value, text] : table)
        if (text == name) return value;
    throw ConfigError(std::string("unknown ") + what + " '" + std::string(name) + "'");
}

template <class Enum, std::size_t N>
std::string_view enum_name(Enum value, const std::pair<Enum, std::string_view> (&table)[N]) {
    for (const auto& [v, text] : table)
        if (v == value) return text;
    return "?";
}

constexpr std::pair<Policy, std::string_view> kPolicies[] = {
    {Policy::sc, "sc"}, {Policy::ac, "ac"}, {Policy::esc, "esc"}, {Policy::dsc, "dsc"}, {Policy::actsc, "actsc"}};
constexpr std::pair<Route, std::string_view> kRoutes[] = {
    {Route::easy, "easy"}, {Route::hard, "hard"}, {Route::none, "n/a"}};
constexpr std::pair<StopReason, std::string_view> kStops[] = {
    {StopReason::fixed_budget, "fixed_budget"},
    {StopReason::agreement, "agreement"},
    {StopReason::window_unanimous, "window_unanimous"},
    {StopReason::confidence, "confidence"},
    {StopReason::budget_exhausted, "budget_exhausted"},
    {StopReason::single_sample, "single_sample"}};
constexpr std::pair<ConfScope, std::string_view> kScopes[] = {{ConfScope::global, "global"},
                                                             {ConfScope::window, "window"}};

std::vector<AnswerSample> checked_draw(AnswerStream& stream, std::size_t count) {
    auto got = stream.draw(count);
    if (got.size() != count)
        throw SamplerError("sampler returned " + std::to_string(got.size()) + " samples, expected " +
                           std::to_string(count));
    return got;
}

void append(SamplingTrace& t, AnswerStream& stream, std::size_t count) {
    auto got = checked_draw(stream, count);
    t.draw_sizes.push_back(count);
    t.samples.insert(t.samples.end(), std::make_move_iterator(got.begin()), std::make_move_iterator(got.end()));
}

double fraction(std::size_t count, std::size_t n) {
    return static_cast<double>(count) / static_cast<double>(n);
}

void finish(SamplingTrace& t, StopReason reason) {
    const auto vote = majority_vote(t.samples);
    t.final_answer = vote.winner;
    t.stop_reason = reason;
    t.confidence_at_stop = fraction(vote.count, t.samples.size());
}

bool unanimous(std::span<const AnswerSample> s) {
    return std::all_of(s.begin(), s.end(), [&](const AnswerSample& a) { return a.answer == s.front().answer; });
}

// Draws one sample at a time until the agreement ratio passes `threshold`.
// strict: ratio > threshold, otherwise ratio >= threshold.
void adaptive_agreement(SamplingTrace& t, AnswerStream& stream, const PolicyConfig& cfg, std::size_t budget,
                        double threshold, bool strict) {
    while (t.samples.size() < budget) {
        append(t, stream, 1);
        const std::size_t n = t.samples.size();
        if (n < cfg.ac_min_samples) continue;
        const double ratio = fraction(majority_vote(t.samples).count, n);
        if (strict ? ratio > threshold : ratio >= threshold) return finish(t, StopReason::agreement);
    }
    finish(t, StopReason::budget_exhausted);
}

} // namespace

Policy parse_policy(std::string_view name) { return parse_enum(name, kPolicies, "policy"); }
std::string_view to_string(Policy p) { return enum_name(p, kPolicies); }
Route parse_route(std::string_view name) { return parse_enum(name, kRoutes, "route"); }
std::string_view to_string(Route r) { return enum_name(r, kRoutes); }
StopReason parse_stop_reason(std::string_view name) { return parse_enum(name, kStops, "stop reason"); }
std::string_view to_string(StopReason r) { return enum_name(r, kStops); }
ConfScope parse_conf_scope(std::string_view name) { return parse_enum(name, kScopes, "confidence scope"); }
std::string_view to_string(ConfScope s) { return enum_name(s, kScopes); }

std::string_view display_name(Policy p) {
    switch (p) {
    case Policy::sc: return "SC";
    case Policy::ac: return "AC";
    case Policy::esc: return "ESC";
    case Policy::dsc: return "DSC";
    case Policy::actsc: return "ACTSC";
    }
    return "?";
}

void PolicyConfig::validate() const {
    if (k_max < 1) throw ConfigError("k_max must be at least 1");
    auto unit = [](double v, const char* name) {
        if (!(v > 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must be in (0, 1]");
    };
    unit(ac_threshold, "ac_threshold");
    unit(dsc_threshold, "dsc_threshold");
    unit(actsc_gamma, "gamma");
    if (esc_window < 1 || actsc_window < 1) throw ConfigError("window sizes must be at least 1");
    if (dsc_presamples < 1) throw ConfigError("dsc_presamples must be at least 1");
    if (tau && !(*tau >= 0.0 && *tau <= 1.0)) throw ConfigError("tau must be in [0, 1]");
}

std::uint64_t SamplingTrace::inference_tokens() const noexcept {
    std::uint64_t s = 0;
    for (const auto& a : samples) s += a.total_tokens();
    return s;
}

std::uint64_t SamplingTrace::prepare_tokens() const noexcept {
    std::uint64_t s = 0;
    for (const auto& a : prepare_samples) s += a.total_tokens();
    return s;
}

VoteResult majority_vote(std::span<const std::string> answers) {
    if (answers.empty()) throw ValidationError("majority vote over an empty answer list");
    std::unordered_map<std::string_view, std::size_t> counts;
    VoteResult best;
    for (const auto& a : answers) ++counts[a];
    // second pass in first-occurrence order so ties keep the earliest answer
    for (const auto& a : answers) {
        const std::size_t c = counts[a];
        if (c > best.count) best = {a, c};
    }
    return best;
}

VoteResult majority_vote(std::span<const AnswerSample> samples) {
    if (samples.empty()) throw ValidationError("majority vote over an empty answer list");
    std::vector<std::string> answers;
    answers.reserve(samples.size());
    for (const auto& s : samples) answers.push_back(s.answer);
    return majority_vote(answers);
}

RoutingDecision route_problem(double p_hard, double tau) {
    return {p_hard, tau, p_hard < tau ? Route::easy : Route::hard};
}

SamplingTrace run_sc(AnswerStream& stream, std::string problem_id, std::size_t k) {
    if (k < 1) throw ConfigError("SC budget k must be at least 1");
    SamplingTrace t;
    t.problem_id = std::move(problem_id);
    t.policy = Policy::sc;
    append(t, stream, k);
    finish(t, StopReason::fixed_budget);
    return t;
}

SamplingTrace run_ac(AnswerStream& stream, std::string problem_id, const PolicyConfig& cfg) {
    cfg.validate();
    SamplingTrace t;
    t.problem_id = std::move(problem_id);
    t.policy = Policy::ac;
    adaptive_agreement(t, stream, cfg, cfg.k_max, cfg.ac_threshold, /*strict=*/true);
    return t;
}

SamplingTrace run_esc(AnswerStream& stream, std::string problem_id, const PolicyConfig& cfg) {
    cfg.validate();
    SamplingTrace t;
    t.problem_id = std::move(problem_id);
    t.policy = Policy::esc;
    while (t.samples.size() < cfg.k_max) {
        const std::size_t m = std::min(cfg.esc_window, cfg.k_max - t.samples.size());
        append(t, stream, m);
        // only a full window can end the run early
        if (m == cfg.esc_window && unanimous(std::span(t.samples).last(m))) {
            finish(t, StopReason::window_unanimous);
            return t;
        }
    }
    finish(t, StopReason::budget_exhausted);
    return t;
}

SamplingTrace run_dsc(AnswerStream& stream, std::string problem_id, const PolicyConfig& cfg) {
    cfg.validate();
    SamplingTrace t;
    t.problem_id = std::move(problem_id);
    t.policy = Policy::dsc;
    if (cfg.dsc_presamples >= cfg.k_max) throw ConfigError("dsc_presamples must be below k_max");
    t.prepare_samples = checked_draw(stream, cfg.dsc_presamples);
    if (unanimous(t.prepare_samples)) {
        t.route = Route::easy;
        append(t, stream, 1);
        finish(t, StopReason::single_sample);
        return t;
    }
    t.route = Route::hard;
    // prepare and inference draws together stay within k_max
    adaptive_agreement(t, stream, cfg, cfg.k_max - cfg.dsc_presamples, cfg.dsc_threshold, /*strict=*/false);
    return t;
}

SamplingTrace run_actsc(AnswerStream& stream, std::string problem_id, double p_hard, const PolicyConfig& cfg) {
    cfg.validate();
    if (!cfg.tau) throw ConfigError("ACTSC needs a routing threshold tau");
    if (!(p_hard > 0.0 && p_hard < 1.0)) throw ConfigError("p_hard must lie in (0, 1)");

    SamplingTrace t;
    t.problem_id = std::move(problem_id);
    t.policy = Policy::actsc;
    t.p_hard = p_hard;
    t.route = route_problem(p_hard, *cfg.tau).route;

    if (t.route == Route::easy) {
        append(t, stream, 1);
        finish(t, StopReason::single_sample);
        return t;
    }

    const std::size_t w = cfg.actsc_window;
    while (true) {
        const std::size_t have = t.samples.size();
        std::size_t window_max = 0;
        if (have > 0) window_max = majority_vote(std::span(t.samples).last(std::min(w, have))).count;
        // floor at 1: a unanimous window below gamma would otherwise stall
        std::size_t n_need = std::max<std::size_t>(1, w - window_max);
        n_need = std::min(n_need, cfg.k_max - have);
        append(t, stream, n_need);

        const auto global = majority_vote(t.samples);
        double conf = fraction(global.count, t.samples.size());
        if (cfg.conf_scope == ConfScope::window) {
            const auto recent = std::span(t.samples).last(std::min(w, t.samples.size()));
            conf = fraction(majority_vote(recent).count, recent.size());
        }
        if (conf >= cfg.actsc_gamma) {
            finish(t, StopReason::confidence);
            t.confidence_at_stop = conf;
            return t;
        }
        if (t.samples.size() >= cfg.k_max) {
            finish(t, StopReason::budget_exhausted);
            t.confidence_at_stop = conf;
            return t;
        }
    }
}

SamplingTrace run_policy(Policy policy, AnswerStream& stream, std::string problem_id, std::optional<double> p_hard,
                         const PolicyConfig& config) {
    switch (policy) {
    case Policy::sc: return run_sc(stream, std::move(problem_id), config.k_max);
    case Policy::ac: return run_ac(stream, std::move(problem_id), config);
    case Policy::esc: return run_esc(stream, std::move(problem_id), config);
    case Policy::dsc: return run_dsc(stream, std::move(problem_id), config);
    case Policy::actsc:
        if (!p_hard) throw ConfigError("ACTSC needs a difficulty estimate for problem '" + problem_id + "'");
        return run_actsc(stream, std::move(problem_id), *p_hard, config);
    }
    throw ConfigError("unknown policy");
}

} // namespace actsc
