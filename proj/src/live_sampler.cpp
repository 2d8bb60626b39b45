#include "actsc/live_sampler.hpp"

#include <fstream>
#include <future>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "actsc/error.hpp"

namespace actsc {

using nlohmann::json;

namespace {

constexpr std::string_view kCompletionsPath = "/v1/chat/completions";

class LiveStream final : public AnswerStream {
public:
    LiveStream(const LiveSource& source, std::string prompt) : source_(source), prompt_(std::move(prompt)) {}

    std::vector<AnswerSample> draw(std::size_t count) override {
        if (count == 0) throw SamplerError("draw count must be at least 1");
        const auto& cfg = source_.config();
        auto backoff = cfg.initial_backoff;
        std::string last_error;
        for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(backoff);
                backoff *= 2;
            }
            try {
                return attempt_draw(count);
            } catch (const SamplerError& e) {
                last_error = e.what();
            }
        }
        throw SamplerError("live sampler failed after " + std::to_string(cfg.max_retries + 1) +
                           " attempts: " + last_error);
    }

private:
    std::vector<AnswerSample> attempt_draw(std::size_t count) {
        if (source_.config().batch_mode == BatchMode::n_param) return source_.request_once(prompt_, count);

        std::vector<std::future<std::vector<AnswerSample>>> futures;
        futures.reserve(count);
        for (std::size_t i = 0; i < count; ++i)
            futures.push_back(std::async(std::launch::async, [this] { return source_.request_once(prompt_, 1); }));
        std::vector<AnswerSample> out;
        std::string error;
        for (auto& f : futures) {
            try {
                auto one = f.get();
                out.push_back(std::move(one.front()));
            } catch (const SamplerError& e) {
                if (error.empty()) error = e.what();
            }
        }
        if (!error.empty()) throw SamplerError(error);
        return out;
    }

    const LiveSource& source_;
    std::string prompt_;
};

} // namespace

void LiveSamplerConfig::validate() const {
    if (model_name.empty()) throw ConfigError("live sampler needs a model name");
    if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must be in (0, 1]");
    if (max_output_tokens < 1) throw ConfigError("max_output_tokens must be positive");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

std::map<std::string, LivePrompt, std::less<>> load_live_prompts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::map<std::string, LivePrompt, std::less<>> prompts;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        try {
            const json j = json::parse(line);
            auto id = j.at("problem_id").get<std::string>();
            LivePrompt p{j.at("question").get<std::string>(), j.value("gold_answer", "")};
            if (!prompts.emplace(id, std::move(p)).second)
                throw ValidationError(where + ": duplicate problem_id '" + id + "'");
        } catch (const json::exception& e) {
            throw ParseError(where + ": malformed prompt line: " + e.what());
        }
    }
    return prompts;
}

LiveSource::LiveSource(LiveSamplerConfig config, std::map<std::string, LivePrompt, std::less<>> prompts)
    : config_(std::move(config)), prompts_(std::move(prompts)) {
    config_.validate();
    const auto& url = config_.endpoint_url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint URL needs a scheme: '" + url + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    base_url_ = url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!path.empty() && path.back() == '/') path.pop_back();
    if (path.size() < kCompletionsPath.size() ||
        path.compare(path.size() - kCompletionsPath.size(), kCompletionsPath.size(), kCompletionsPath) != 0)
        path += kCompletionsPath;
    path_ = path;
}

std::string LiveSource::render_prompt(std::string_view question) const {
    std::string out = config_.prompt_template;
    constexpr std::string_view slot = "{question}";
    if (auto pos = out.find(slot); pos != std::string::npos)
        out.replace(pos, slot.size(), question);
    else
        out += question;
    return out;
}

std::unique_ptr<AnswerStream> LiveSource::open(std::string_view problem_id) const {
    auto it = prompts_.find(problem_id);
    if (it == prompts_.end()) throw SamplerError("unknown problem '" + std::string(problem_id) + "' for live sampler");
    return std::make_unique<LiveStream>(*this, render_prompt(it->second.question));
}

std::optional<std::string> LiveSource::gold_answer(std::string_view problem_id) const {
    auto it = prompts_.find(problem_id);
    if (it == prompts_.end() || it->second.gold_answer.empty()) return std::nullopt;
    return it->second.gold_answer;
}

std::vector<std::string> LiveSource::problem_ids() const {
    std::vector<std::string> ids;
    for (const auto& [id, _] : prompts_) ids.push_back(id);
    return ids;
}

std::vector<AnswerSample> LiveSource::request_once(const std::string& prompt, std::size_t n) const {
    httplib::Client client(base_url_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.request_timeout).count();
    client.set_connection_timeout(secs);
    client.set_read_timeout(secs);
    client.set_write_timeout(secs);

    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    const json body = {
        {"model", config_.model_name},
        {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
        {"temperature", config_.temperature},
        {"top_p", config_.top_p},
        {"max_tokens", config_.max_output_tokens},
        {"n", n},
    };
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw SamplerError("transport error: " + httplib::to_string(res.error()));
    if (res->status != 200) throw SamplerError("HTTP " + std::to_string(res->status) + " from " + base_url_ + path_);

    std::vector<AnswerSample> out;
    try {
        const json j = json::parse(res->body);
        const auto& choices = j.at("choices");
        if (choices.size() != n)
            throw SamplerError("server returned " + std::to_string(choices.size()) + " choices, expected " +
                               std::to_string(n));
        const auto& usage = j.at("usage");
        const auto prompt_tokens = usage.at("prompt_tokens").get<std::uint64_t>();
        const auto completion_tokens = usage.at("completion_tokens").get<std::uint64_t>();
        const std::uint64_t share = completion_tokens / n;
        const std::uint64_t extra = completion_tokens % n;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& content = choices[i].at("message").at("content");
            const std::string text = content.is_string() ? content.get<std::string>() : std::string();
            out.push_back({extract_final_answer(text, config_.answer_pattern), prompt_tokens,
                           share + (i < extra ? 1 : 0)});
        }
    } catch (const json::exception& e) {
        throw SamplerError(std::string("malformed completion response: ") + e.what());
    }
    return out;
}

} // namespace actsc
