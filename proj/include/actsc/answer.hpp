#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace actsc {

/// Recorded when answer extraction fails.
inline constexpr std::string_view kNoAnswer = "<no-answer>";

struct AnswerSample {
    std::string answer;
    std::uint64_t input_tokens = 0;
    std::uint64_t output_tokens = 0;

    std::uint64_t total_tokens() const noexcept { return input_tokens + output_tokens; }
    bool operator==(const AnswerSample&) const = default;
};

} // namespace actsc
