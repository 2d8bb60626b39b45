#include "actsc/samplers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include <json.hpp>

#include "actsc/error.hpp"

namespace actsc {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

std::uint64_t jitter_tokens(StreamRng& rng, std::uint32_t mean) {
    const double m = mean;
    const double v = std::round(m + std::sqrt(m) * rng.normal());
    return v < 0 ? 0 : static_cast<std::uint64_t>(v);
}

class SimStream final : public AnswerStream {
public:
    SimStream(const SimProblemSpec& spec, std::uint64_t seed) : spec_(spec), rng_(seed) {
        double acc = 0.0;
        for (const auto& [_, p] : spec_.answer_distribution) cumulative_.push_back(acc += p);
    }

    std::vector<AnswerSample> draw(std::size_t count) override {
        if (count == 0) throw SamplerError("draw count must be at least 1");
        std::vector<AnswerSample> out;
        out.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            const double u = rng_.uniform() * cumulative_.back();
            auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
            if (it == cumulative_.end()) --it;
            const auto k = static_cast<std::size_t>(it - cumulative_.begin());
            AnswerSample s;
            s.answer = spec_.answer_distribution[k].first;
            s.input_tokens = jitter_tokens(rng_, spec_.mean_input_tokens);
            s.output_tokens = jitter_tokens(rng_, spec_.mean_output_tokens);
            out.push_back(std::move(s));
        }
        return out;
    }

private:
    const SimProblemSpec& spec_;
    StreamRng rng_;
    std::vector<double> cumulative_;
};

class ReplayStream final : public AnswerStream {
public:
    ReplayStream(std::string id, const std::vector<AnswerSample>& samples) : id_(std::move(id)), samples_(samples) {}

    std::vector<AnswerSample> draw(std::size_t count) override {
        if (count == 0) throw SamplerError("draw count must be at least 1");
        if (samples_.size() - next_ < count)
            throw SamplerError("replay pool exhausted for problem '" + id_ + "': requested " + std::to_string(count) +
                               " more after " + std::to_string(next_) + " of " + std::to_string(samples_.size()));
        std::vector<AnswerSample> out(samples_.begin() + static_cast<std::ptrdiff_t>(next_),
                                      samples_.begin() + static_cast<std::ptrdiff_t>(next_ + count));
        next_ += count;
        return out;
    }

private:
    std::string id_;
    const std::vector<AnswerSample>& samples_;
    std::size_t next_ = 0;
};

} // namespace

double StreamRng::normal() noexcept {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t stream_seed(std::uint64_t global_seed, std::string_view problem_id) noexcept {
    return splitmix64(splitmix64(global_seed) ^ fnv1a(problem_id));
}

void SimProblemSpec::validate() const {
    const std::string who = "sim spec '" + problem_id + "'";
    if (problem_id.empty()) throw ValidationError("sim spec with empty problem_id");
    if (answer_distribution.empty()) throw ValidationError(who + " has no outcomes");
    double total = 0.0;
    for (const auto& [answer, p] : answer_distribution) {
        if (answer.empty()) throw ValidationError(who + " has an empty answer");
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(who + " has a probability outside [0,1]");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ValidationError(who + " probabilities sum to " + std::to_string(total));
    if (mean_input_tokens == 0 || mean_output_tokens == 0)
        throw ValidationError(who + " needs positive mean token counts");
}

std::vector<SimProblemSpec> load_sim_specs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::vector<SimProblemSpec> specs;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        SimProblemSpec s;
        try {
            const json j = json::parse(line);
            s.problem_id = j.at("problem_id").get<std::string>();
            s.gold_answer = j.at("gold_answer").get<std::string>();
            for (const auto& o : j.at("answer_distribution"))
                s.answer_distribution.emplace_back(o.at("answer").get<std::string>(), o.at("probability").get<double>());
            s.mean_input_tokens = j.at("mean_input_tokens").get<std::uint32_t>();
            s.mean_output_tokens = j.at("mean_output_tokens").get<std::uint32_t>();
        } catch (const json::exception& e) {
            throw ParseError(where + ": malformed sim spec: " + e.what());
        }
        try {
            s.validate();
        } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
        }
        if (!seen.insert(s.problem_id).second)
            throw ValidationError(where + ": duplicate problem_id '" + s.problem_id + "'");
        specs.push_back(std::move(s));
    }
    return specs;
}

void save_sim_specs(const std::vector<SimProblemSpec>& specs, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    for (const auto& s : specs) {
        json dist = json::array();
        for (const auto& [a, p] : s.answer_distribution) dist.push_back({{"answer", a}, {"probability", p}});
        out << json{{"problem_id", s.problem_id},
                    {"gold_answer", s.gold_answer},
                    {"answer_distribution", dist},
                    {"mean_input_tokens", s.mean_input_tokens},
                    {"mean_output_tokens", s.mean_output_tokens}}
                   .dump()
            << '\n';
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

SimSource::SimSource(std::vector<SimProblemSpec> specs, std::uint64_t seed) : specs_(std::move(specs)), seed_(seed) {
    for (const auto& s : specs_) s.validate();
    order_.resize(specs_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    std::sort(order_.begin(), order_.end(),
              [&](std::size_t a, std::size_t b) { return specs_[a].problem_id < specs_[b].problem_id; });
    for (std::size_t i = 1; i < order_.size(); ++i)
        if (specs_[order_[i]].problem_id == specs_[order_[i - 1]].problem_id)
            throw ValidationError("duplicate sim problem_id '" + specs_[order_[i]].problem_id + "'");
}

const SimProblemSpec& SimSource::spec(std::string_view problem_id) const {
    auto it = std::lower_bound(order_.begin(), order_.end(), problem_id,
                               [&](std::size_t i, std::string_view id) { return specs_[i].problem_id < id; });
    if (it == order_.end() || specs_[*it].problem_id != problem_id)
        throw SamplerError("unknown problem '" + std::string(problem_id) + "' in sim source");
    return specs_[*it];
}

std::unique_ptr<AnswerStream> SimSource::open(std::string_view problem_id) const {
    return std::make_unique<SimStream>(spec(problem_id), stream_seed(seed_, problem_id));
}

std::optional<std::string> SimSource::gold_answer(std::string_view problem_id) const {
    return spec(problem_id).gold_answer;
}

std::vector<std::string> SimSource::problem_ids() const {
    std::vector<std::string> ids;
    for (const auto& s : specs_) ids.push_back(s.problem_id);
    return ids;
}

ReplaySource::ReplaySource(SamplePool pool) : pool_(std::move(pool)) {
    for (const auto& [id, entry] : pool_)
        if (entry.samples.empty()) throw ValidationError("replay pool problem '" + id + "' has no samples");
}

std::unique_ptr<AnswerStream> ReplaySource::open(std::string_view problem_id) const {
    auto it = pool_.find(problem_id);
    if (it == pool_.end()) throw SamplerError("unknown problem '" + std::string(problem_id) + "' in replay pool");
    return std::make_unique<ReplayStream>(it->first, it->second.samples);
}

std::optional<std::string> ReplaySource::gold_answer(std::string_view problem_id) const {
    auto it = pool_.find(problem_id);
    if (it == pool_.end()) return std::nullopt;
    return it->second.gold_answer;
}

std::vector<std::string> ReplaySource::problem_ids() const {
    std::vector<std::string> ids;
    for (const auto& [id, _] : pool_) ids.push_back(id);
    return ids;
}

// ---- answer extraction ---------------------------------------------------

AnswerPattern parse_answer_pattern(std::string_view name) {
    if (name == "boxed") return AnswerPattern::boxed;
    if (name == "final-answer-line" || name == "final_answer_line") return AnswerPattern::final_answer_line;
    throw ConfigError("unknown answer pattern '" + std::string(name) + "'");
}

std::string_view to_string(AnswerPattern pattern) {
    return pattern == AnswerPattern::boxed ? "boxed" : "final-answer-line";
}

std::string canonicalize_answer(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(c));
    }
    return out;
}

std::string extract_final_answer(std::string_view text, AnswerPattern pattern) {
    std::string answer;
    if (pattern == AnswerPattern::boxed) {
        constexpr std::string_view marker = "\\boxed{";
        auto pos = text.rfind(marker);
        while (pos != std::string_view::npos) {
            const std::size_t begin = pos + marker.size();
            int depth = 1;
            std::size_t i = begin;
            for (; i < text.size() && depth > 0; ++i) {
                if (text[i] == '{') ++depth;
                if (text[i] == '}') --depth;
            }
            if (depth == 0) {
                answer = canonicalize_answer(text.substr(begin, i - 1 - begin));
                break;
            }
            // unbalanced: fall back to the previous occurrence
            pos = pos == 0 ? std::string_view::npos : text.rfind(marker, pos - 1);
        }
    } else {
        constexpr std::string_view marker = "Final Answer:";
        if (auto pos = text.rfind(marker); pos != std::string_view::npos) {
            auto rest = text.substr(pos + marker.size());
            answer = canonicalize_answer(rest.substr(0, rest.find('\n')));
        }
    }
    return answer.empty() ? std::string(kNoAnswer) : answer;
}

} // namespace actsc
