#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "actsc/answer.hpp"

namespace actsc {

/// FFN last-token activations of one problem.
struct ActivationRecord {
    std::string problem_id;
    std::optional<int> difficulty;  // 1..5, absent for unlabeled evaluation data
    std::vector<float> activations;
    std::optional<std::string> gold_answer;

    bool operator==(const ActivationRecord&) const = default;
};

struct DatasetManifest {
    std::string name;
    std::uint32_t neuron_count = 0;
    std::uint32_t record_count = 0;
    std::string source_model;
    std::string layer_spec;

    bool operator==(const DatasetManifest&) const = default;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<ActivationRecord> records;
};

enum class DumpFormat { jsonl, packed };

DumpFormat parse_dump_format(std::string_view name);

/// Guesses the format from the extension: `.jsonl`/`.json` is JSONL,
/// anything else is packed.
DumpFormat dump_format_for(const std::filesystem::path& path);

/// Checks every record against the manifest. Throws ValidationError naming
/// the first offending record.
void validate_dataset(const Dataset& dataset);

/// Reads and validates a dump. Parse errors carry the line number (JSONL) or
/// byte offset (packed).
Dataset load_dataset(const std::filesystem::path& path, DumpFormat format);

/// Writes a dump. The manifest's record_count is taken from `records.size()`.
/// The packed format stores only neuron and record counts; name, source_model
/// and layer_spec are not persisted there.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path, DumpFormat format);

/// Pre-generated samples for replay runs.
struct PoolEntry {
    std::string gold_answer;
    std::vector<AnswerSample> samples;
};

using SamplePool = std::map<std::string, PoolEntry, std::less<>>;

/// JSONL, one problem per line:
/// {"problem_id":..., "gold_answer":..., "samples":[{"answer":..., "input_tokens":..., "output_tokens":...}]}
SamplePool load_sample_pool(const std::filesystem::path& path);
void save_sample_pool(const SamplePool& pool, const std::filesystem::path& path);

} // namespace actsc
