#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>

#include "actsc/samplers.hpp"

namespace actsc {

enum class BatchMode {
    n_param,   // one request with "n": count
    parallel,  // count concurrent single-sample requests
};

struct LiveSamplerConfig {
    std::string endpoint_url = "http://127.0.0.1:8000";  // base URL or full .../v1/chat/completions
    std::string model_name;
    double temperature = 0.7;
    double top_p = 0.8;
    int max_output_tokens = 2048;
    std::chrono::milliseconds request_timeout{120'000};
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{500};
    std::string prompt_template = "{question}";  // "{question}" is substituted
    AnswerPattern answer_pattern = AnswerPattern::boxed;
    BatchMode batch_mode = BatchMode::n_param;
    std::string api_key;  // sent as a bearer token when non-empty

    void validate() const;
};

/// Environment variable read by the CLI for the bearer token.
inline constexpr const char* kApiKeyEnv = "ACTSC_API_KEY";

struct LivePrompt {
    std::string question;
    std::string gold_answer;
};

/// JSONL: {"problem_id":..., "question":..., "gold_answer":...}
std::map<std::string, LivePrompt, std::less<>> load_live_prompts(const std::filesystem::path& path);

/// Answer source backed by an OpenAI-compatible chat-completions server.
///
/// Each sample is charged the full prompt_tokens of its request as input; a
/// batched request's completion_tokens are split evenly across its choices,
/// remainder to the earliest. A draw either returns all `count` samples in
/// request order or throws after max_retries; partial results are dropped.
class LiveSource final : public AnswerSource {
public:
    LiveSource(LiveSamplerConfig config, std::map<std::string, LivePrompt, std::less<>> prompts);

    std::unique_ptr<AnswerStream> open(std::string_view problem_id) const override;
    std::optional<std::string> gold_answer(std::string_view problem_id) const override;
    std::vector<std::string> problem_ids() const override;
    bool paired() const override { return false; }

    const LiveSamplerConfig& config() const noexcept { return config_; }

    /// Issues one request and parses it; no retries.
    std::vector<AnswerSample> request_once(const std::string& prompt, std::size_t n) const;

    std::string render_prompt(std::string_view question) const;

private:
    LiveSamplerConfig config_;
    std::map<std::string, LivePrompt, std::less<>> prompts_;
    std::string base_url_;  // scheme://host[:port]
    std::string path_;      // request path
};

} // namespace actsc
