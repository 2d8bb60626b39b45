#include "actsc/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "actsc/calibration.hpp"
#include "actsc/error.hpp"
#include "actsc/numeric.hpp"

namespace actsc {

using nlohmann::json;

namespace {

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, round_half_away(v, decimals));
    // avoid "-0.0"
    std::string s = buf;
    if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

// RFC 4180 field: quoted only when it needs to be
std::string csv_field(std::string_view v) {
    if (v.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(v);
    std::string q = "\"";
    for (char c : v) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

std::string sample_cell(const RunReport& r) {
    std::string s = fixed(r.avg_samples, 2);
    if (r.pct_reduction_vs_sc) s += " (" + fixed(*r.pct_reduction_vs_sc, 1) + "%)";
    return s;
}

std::string token_cell(const RunReport& r) {
    return (r.has_prepare_phase() ? fixed(r.prepare_tokens_k, 1) : std::string("--")) + " / " +
           fixed(r.inference_tokens_k, 1);
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

json report_json(const RunReport& r) {
    json per = json::array();
    for (const auto& p : r.per_problem)
        per.push_back({{"problem_id", p.problem_id},
                       {"n_samples", p.n_samples},
                       {"final_answer", p.final_answer},
                       {"correct", p.correct},
                       {"route", std::string(to_string(p.route))},
                       {"stop_reason", std::string(to_string(p.stop_reason))}});
    return {
        {"policy", std::string(to_string(r.policy))},
        {"dataset", r.dataset},
        {"n_problems", r.n_problems},
        {"avg_samples", r.avg_samples},
        {"prepare_tokens_k", r.prepare_tokens_k},
        {"inference_tokens_k", r.inference_tokens_k},
        {"accuracy_pct", r.accuracy_pct},
        {"pct_reduction_vs_sc", r.pct_reduction_vs_sc ? json(*r.pct_reduction_vs_sc) : json(nullptr)},
        {"paired", r.paired},
        {"total_samples", r.total_samples},
        {"prepare_tokens_total", r.prepare_tokens_total},
        {"inference_tokens_total", r.inference_tokens_total},
        {"per_problem", per},
    };
}

RunReport report_from_json(const json& j) {
    RunReport r;
    r.policy = parse_policy(j.at("policy").get<std::string>());
    r.dataset = j.at("dataset").get<std::string>();
    r.n_problems = j.at("n_problems").get<std::size_t>();
    r.avg_samples = j.at("avg_samples").get<double>();
    r.prepare_tokens_k = j.at("prepare_tokens_k").get<double>();
    r.inference_tokens_k = j.at("inference_tokens_k").get<double>();
    r.accuracy_pct = j.at("accuracy_pct").get<double>();
    if (!j.at("pct_reduction_vs_sc").is_null()) r.pct_reduction_vs_sc = j.at("pct_reduction_vs_sc").get<double>();
    r.paired = j.at("paired").get<bool>();
    r.total_samples = j.at("total_samples").get<std::uint64_t>();
    r.prepare_tokens_total = j.at("prepare_tokens_total").get<std::uint64_t>();
    r.inference_tokens_total = j.at("inference_tokens_total").get<std::uint64_t>();
    for (const auto& p : j.at("per_problem"))
        r.per_problem.push_back({p.at("problem_id").get<std::string>(), p.at("n_samples").get<std::size_t>(),
                                 p.at("final_answer").get<std::string>(), p.at("correct").get<bool>(),
                                 parse_route(p.at("route").get<std::string>()),
                                 parse_stop_reason(p.at("stop_reason").get<std::string>())});
    return r;
}

} // namespace

double pct_reduction(double avg_samples, double sc_avg_samples) {
    if (!(sc_avg_samples > 0.0)) throw ValidationError("SC reference average must be positive");
    return (avg_samples - sc_avg_samples) / sc_avg_samples * 100.0;
}

RunReport aggregate_metrics(Policy policy, std::string dataset, std::span<const SamplingTrace> traces,
                            const GoldAnswers& gold, std::optional<double> sc_avg_samples) {
    if (traces.empty()) throw ValidationError("no traces to aggregate");
    RunReport r;
    r.policy = policy;
    r.dataset = std::move(dataset);
    r.n_problems = traces.size();
    std::size_t correct = 0;
    for (const auto& t : traces) {
        r.total_samples += t.samples.size();
        r.prepare_tokens_total += t.prepare_tokens();
        r.inference_tokens_total += t.inference_tokens();
        auto g = gold.find(t.problem_id);
        const bool ok = g != gold.end() && g->second == t.final_answer;
        correct += ok ? 1 : 0;
        r.per_problem.push_back({t.problem_id, t.samples.size(), t.final_answer, ok, t.route, t.stop_reason});
    }
    const auto n = static_cast<double>(r.n_problems);
    r.avg_samples = static_cast<double>(r.total_samples) / n;
    r.prepare_tokens_k = static_cast<double>(r.prepare_tokens_total) / n / 1000.0;
    r.inference_tokens_k = static_cast<double>(r.inference_tokens_total) / n / 1000.0;
    r.accuracy_pct = static_cast<double>(correct) / n * 100.0;
    if (sc_avg_samples) r.pct_reduction_vs_sc = pct_reduction(r.avg_samples, *sc_avg_samples);
    return r;
}

ReportFormat parse_report_format(std::string_view name) {
    if (name == "text" || name == "text_table") return ReportFormat::text_table;
    if (name == "json") return ReportFormat::json;
    if (name == "csv") return ReportFormat::csv;
    throw ConfigError("unknown report format '" + std::string(name) + "'");
}

std::string render_report(std::span<const RunReport> reports, ReportFormat format) {
    std::ostringstream out;
    switch (format) {
    case ReportFormat::json: {
        json arr = json::array();
        for (const auto& r : reports) arr.push_back(report_json(r));
        out << arr.dump(2) << '\n';
        break;
    }
    case ReportFormat::csv:
        out << "policy,dataset,n_problems,avg_samples,pct_reduction_vs_sc,prepare_tokens_k,inference_tokens_k,"
               "accuracy_pct,paired\n";
        for (const auto& r : reports) {
            out << to_string(r.policy) << ',' << csv_field(r.dataset) << ',' << r.n_problems << ',' << fixed(r.avg_samples, 2)
                << ',' << (r.pct_reduction_vs_sc ? fixed(*r.pct_reduction_vs_sc, 1) : "") << ','
                << (r.has_prepare_phase() ? fixed(r.prepare_tokens_k, 1) : "") << ',' << fixed(r.inference_tokens_k, 1)
                << ',' << fixed(r.accuracy_pct, 2) << ',' << (r.paired ? "true" : "false") << '\n';
        }
        break;
    case ReportFormat::text_table: {
        if (!reports.empty())
            out << "Dataset: " << reports.front().dataset << " (" << reports.front().n_problems << " problems)"
                << (reports.front().paired ? "" : " [unpaired]") << '\n';
        const std::string header[] = {"Method", "Sample", "Prepare / Inference (k)", "Acc"};
        std::size_t w0 = header[0].size(), w1 = header[1].size(), w2 = header[2].size();
        for (const auto& r : reports) {
            w0 = std::max(w0, display_name(r.policy).size());
            w1 = std::max(w1, sample_cell(r).size());
            w2 = std::max(w2, token_cell(r).size());
        }
        out << pad(header[0], w0) << " | " << pad(header[1], w1) << " | " << pad(header[2], w2) << " | " << header[3]
            << '\n';
        out << std::string(w0, '-') << "-+-" << std::string(w1, '-') << "-+-" << std::string(w2, '-') << "-+-"
            << std::string(6, '-') << '\n';
        for (const auto& r : reports)
            out << pad(std::string(display_name(r.policy)), w0) << " | " << pad(sample_cell(r), w1) << " | "
                << pad(token_cell(r), w2) << " | " << fixed(r.accuracy_pct, 2) << '\n';
        break;
    }
    }
    return out.str();
}

std::vector<RunReport> parse_report_json(std::string_view text) {
    try {
        const json arr = json::parse(text);
        std::vector<RunReport> out;
        for (const auto& j : arr) out.push_back(report_from_json(j));
        return out;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed report JSON: ") + e.what());
    }
}

BenchmarkResult run_benchmark(const BenchmarkInputs& in, const AnswerSource& source) {
    if (in.policies.empty()) throw ConfigError("no policies requested");
    const bool wants_actsc = std::any_of(in.policies.begin(), in.policies.end(),
                                         [](const PolicyRun& p) { return p.policy == Policy::actsc; });
    for (const auto& p : in.policies) p.config.validate();

    std::vector<std::string> ids;
    if (!in.records.empty()) {
        for (const auto& r : in.records) ids.push_back(r.problem_id);
    } else {
        ids = source.problem_ids();
    }
    if (ids.empty()) throw ConfigError("no problems to run");

    GoldAnswers gold;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (auto g = source.gold_answer(ids[i]))
            gold.emplace(ids[i], *g);
        else if (!in.records.empty() && in.records[i].gold_answer)
            gold.emplace(ids[i], *in.records[i].gold_answer);
    }

    BenchmarkResult result;
    std::vector<double> p_hard;
    if (wants_actsc) {
        if (!in.probe) throw ConfigError("the actsc policy needs a trained probe");
        if (in.records.empty()) throw ConfigError("the actsc policy needs an activation dataset");
        p_hard = predict_all(*in.probe, in.records, in.exec);
    }

    const auto n = static_cast<std::ptrdiff_t>(ids.size());
    std::optional<double> sc_avg;
    std::vector<RunReport> reports;
    for (const auto& run : in.policies) {
        PolicyConfig cfg = run.config;
        if (run.policy == Policy::actsc) {
            if (in.tau) cfg.tau = in.tau;
            if (!cfg.tau) cfg.tau = calibrate_tau_from_probabilities(p_hard, in.dataset_name).tau;
            result.tau = cfg.tau;
        }

        std::vector<SamplingTrace> traces(ids.size());
        std::vector<std::exception_ptr> errors(ids.size());
        auto one = [&](std::size_t i) {
            try {
                auto stream = source.open(ids[i]);
                std::optional<double> p;
                if (run.policy == Policy::actsc) p = p_hard[i];
                traces[i] = run_policy(run.policy, *stream, ids[i], p, cfg);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        };
        if (in.exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 16)
            for (std::ptrdiff_t i = 0; i < n; ++i) one(static_cast<std::size_t>(i));
        } else {
            for (std::ptrdiff_t i = 0; i < n; ++i) one(static_cast<std::size_t>(i));
        }
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (!errors[i]) continue;
            try {
                std::rethrow_exception(errors[i]);
            } catch (const std::exception& e) {
                throw Error(std::string(display_name(run.policy)) + " failed on problem '" + ids[i] + "': " + e.what());
            }
        }

        std::sort(traces.begin(), traces.end(),
                  [](const SamplingTrace& a, const SamplingTrace& b) { return a.problem_id < b.problem_id; });
        auto report = aggregate_metrics(run.policy, in.dataset_name, traces, gold);
        report.paired = source.paired();
        if (run.policy == Policy::sc && !sc_avg) sc_avg = report.avg_samples;
        reports.push_back(std::move(report));
        result.traces.push_back(std::move(traces));
    }
    if (sc_avg)
        for (auto& r : reports)
            if (r.policy != Policy::sc) r.pct_reduction_vs_sc = pct_reduction(r.avg_samples, *sc_avg);
    result.reports = std::move(reports);
    return result;
}

void export_probe_logits(const ProbeModel& model, std::span<const ActivationRecord> records,
                         const std::filesystem::path& out_path) {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + out_path.string() + "' for writing");
    out << "problem_id,difficulty,logit,p_hard\n";
    char buf[64];
    for (const auto& r : records) {
        const auto o = probe_output(model, r.activations);
        out << csv_field(r.problem_id) << ',';
        if (r.difficulty) out << *r.difficulty;
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", o.logit, o.p_hard);
        out << buf;
    }
    if (!out) throw IoError("write failed for '" + out_path.string() + "'");
}

} // namespace actsc
