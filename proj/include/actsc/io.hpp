#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "actsc/calibration.hpp"
#include "actsc/controllers.hpp"
#include "actsc/dsn.hpp"
#include "actsc/probe.hpp"

// JSON persistence for DSN selections, probes, tau files and traces.
namespace actsc {

nlohmann::json to_json(const DsnSelection& dsn, const GapConfig& config);
DsnSelection dsn_from_json(const nlohmann::json& j);
void save_dsn(const DsnSelection& dsn, const GapConfig& config, const std::filesystem::path& path);
DsnSelection load_dsn(const std::filesystem::path& path);

nlohmann::json to_json(const ProbeModel& model);
ProbeModel probe_from_json(const nlohmann::json& j);
void save_probe(const ProbeModel& model, const std::filesystem::path& path);
ProbeModel load_probe(const std::filesystem::path& path);

void save_tau(const TauCalibration& tau, const std::filesystem::path& path);
TauCalibration load_tau(const std::filesystem::path& path);

nlohmann::json to_json(const SamplingTrace& trace);
SamplingTrace trace_from_json(const nlohmann::json& j);

/// One trace per line.
void write_traces(std::span<const SamplingTrace> traces, std::ostream& out);
std::vector<SamplingTrace> read_traces(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

} // namespace actsc
