#include "actsc/io.hpp"

#include <fstream>
#include <sstream>

#include "actsc/error.hpp"

namespace actsc {

using nlohmann::json;

namespace {

template <class T>
std::vector<T> vec(const json& j, const char* key) {
    return j.at(key).get<std::vector<T>>();
}

json samples_json(std::span<const AnswerSample> samples) {
    json arr = json::array();
    for (const auto& s : samples)
        arr.push_back({{"answer", s.answer}, {"input_tokens", s.input_tokens}, {"output_tokens", s.output_tokens}});
    return arr;
}

std::vector<AnswerSample> samples_from(const json& arr) {
    std::vector<AnswerSample> out;
    for (const auto& s : arr)
        out.push_back({s.at("answer").get<std::string>(), s.at("input_tokens").get<std::uint64_t>(),
                       s.at("output_tokens").get<std::uint64_t>()});
    return out;
}

template <class F>
auto wrap_parse(const std::filesystem::path& path, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

} // namespace

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": malformed JSON: " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// ---- DSN -----------------------------------------------------------------

json to_json(const DsnSelection& dsn, const GapConfig& config) {
    return {
        {"config",
         {{"theta_easy", config.theta_easy},
          {"theta_hard", config.theta_hard},
          {"margin", config.margin},
          {"mode", std::string(to_string(config.mode))},
          {"top_k", config.top_k}}},
        {"easy_set", dsn.easy_set},
        {"hard_set", dsn.hard_set},
        {"union_set", dsn.union_set},
        {"gaps_easy", dsn.gaps_easy},
        {"gaps_hard", dsn.gaps_hard},
    };
}

DsnSelection dsn_from_json(const json& j) {
    DsnSelection d;
    d.easy_set = vec<std::uint32_t>(j, "easy_set");
    d.hard_set = vec<std::uint32_t>(j, "hard_set");
    d.union_set = vec<std::uint32_t>(j, "union_set");
    if (j.contains("gaps_easy")) d.gaps_easy = vec<double>(j, "gaps_easy");
    if (j.contains("gaps_hard")) d.gaps_hard = vec<double>(j, "gaps_hard");
    if (d.union_set.empty()) throw ValidationError("DSN file has an empty union_set");
    return d;
}

void save_dsn(const DsnSelection& dsn, const GapConfig& config, const std::filesystem::path& path) {
    write_text_file(path, to_json(dsn, config).dump(2) + "\n");
}

DsnSelection load_dsn(const std::filesystem::path& path) {
    const auto j = read_json_file(path);
    return wrap_parse(path, [&] { return dsn_from_json(j); });
}

// ---- probe ---------------------------------------------------------------

json to_json(const ProbeModel& m) {
    return {
        {"weights", m.weights},
        {"bias", m.bias},
        {"normalizer", {{"mean", m.normalizer.mean}, {"std", m.normalizer.std}}},
        {"dsn", {{"easy_set", m.dsn.easy_set}, {"hard_set", m.dsn.hard_set}, {"union_set", m.dsn.union_set}}},
        {"theta_easy", m.theta_easy},
        {"theta_hard", m.theta_hard},
        {"train_meta", {{"final_loss", m.meta.final_loss}, {"epochs_run", m.meta.epochs_run}}},
        {"config",
         {{"learning_rate", m.config.learning_rate},
          {"epochs", m.config.epochs},
          {"l2", m.config.l2},
          {"convergence_tol", m.config.convergence_tol}}},
    };
}

ProbeModel probe_from_json(const json& j) {
    ProbeModel m;
    m.weights = vec<double>(j, "weights");
    m.bias = j.at("bias").get<double>();
    m.normalizer.mean = vec<double>(j.at("normalizer"), "mean");
    m.normalizer.std = vec<double>(j.at("normalizer"), "std");
    m.dsn = dsn_from_json(j.at("dsn"));
    m.theta_easy = j.value("theta_easy", 1);
    m.theta_hard = j.value("theta_hard", 5);
    if (j.contains("train_meta")) {
        m.meta.final_loss = j["train_meta"].value("final_loss", 0.0);
        m.meta.epochs_run = j["train_meta"].value("epochs_run", 0);
    }
    if (j.contains("config")) {
        const auto& c = j["config"];
        m.config.learning_rate = c.value("learning_rate", m.config.learning_rate);
        m.config.epochs = c.value("epochs", m.config.epochs);
        m.config.l2 = c.value("l2", m.config.l2);
        m.config.convergence_tol = c.value("convergence_tol", m.config.convergence_tol);
    }
    const std::size_t n = m.dsn.union_set.size();
    if (m.weights.size() != n || m.normalizer.mean.size() != n || m.normalizer.std.size() != n)
        throw ValidationError("probe file: weights, normalizer and union_set lengths differ");
    for (double s : m.normalizer.std)
        if (!(s > 0.0)) throw ValidationError("probe file: normalizer std must be positive");
    return m;
}

void save_probe(const ProbeModel& model, const std::filesystem::path& path) {
    write_text_file(path, to_json(model).dump(2) + "\n");
}

ProbeModel load_probe(const std::filesystem::path& path) {
    const auto j = read_json_file(path);
    return wrap_parse(path, [&] { return probe_from_json(j); });
}

// ---- tau -----------------------------------------------------------------

void save_tau(const TauCalibration& tau, const std::filesystem::path& path) {
    const json j = {{"tau", tau.tau}, {"dataset_name", tau.dataset_name}, {"n", tau.n}};
    write_text_file(path, j.dump(2) + "\n");
}

TauCalibration load_tau(const std::filesystem::path& path) {
    const auto j = read_json_file(path);
    return wrap_parse(path, [&] {
        TauCalibration t;
        t.tau = j.at("tau").get<double>();
        t.dataset_name = j.value("dataset_name", "");
        t.n = j.value("n", std::size_t{0});
        if (!(t.tau > 0.0 && t.tau < 1.0)) throw ValidationError(path.string() + ": tau must lie in (0, 1)");
        return t;
    });
}

// ---- traces --------------------------------------------------------------

json to_json(const SamplingTrace& t) {
    return {
        {"problem_id", t.problem_id},
        {"policy", std::string(to_string(t.policy))},
        {"route", std::string(to_string(t.route))},
        {"p_hard", t.p_hard ? json(*t.p_hard) : json(nullptr)},
        {"samples", samples_json(t.samples)},
        {"prepare_samples", samples_json(t.prepare_samples)},
        {"final_answer", t.final_answer},
        {"stop_reason", std::string(to_string(t.stop_reason))},
        {"confidence_at_stop", t.confidence_at_stop},
        {"draw_sizes", t.draw_sizes},
    };
}

SamplingTrace trace_from_json(const json& j) {
    SamplingTrace t;
    t.problem_id = j.at("problem_id").get<std::string>();
    t.policy = parse_policy(j.at("policy").get<std::string>());
    t.route = parse_route(j.at("route").get<std::string>());
    if (!j.at("p_hard").is_null()) t.p_hard = j.at("p_hard").get<double>();
    t.samples = samples_from(j.at("samples"));
    t.prepare_samples = samples_from(j.at("prepare_samples"));
    t.final_answer = j.at("final_answer").get<std::string>();
    t.stop_reason = parse_stop_reason(j.at("stop_reason").get<std::string>());
    t.confidence_at_stop = j.at("confidence_at_stop").get<double>();
    t.draw_sizes = j.at("draw_sizes").get<std::vector<std::size_t>>();
    return t;
}

void write_traces(std::span<const SamplingTrace> traces, std::ostream& out) {
    for (const auto& t : traces) out << to_json(t).dump() << '\n';
}

std::vector<SamplingTrace> read_traces(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::vector<SamplingTrace> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(trace_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

} // namespace actsc
