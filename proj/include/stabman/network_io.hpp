#pragma once

#include "stabman/netmodel.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace stabman {

// JSON documents. Unknown keys are rejected so that misspelled parameters do
// not silently fall back to defaults. Schemas: docs/file_formats.md.

NetworkModel network_from_json(const nlohmann::json& doc);
nlohmann::json network_to_json(const NetworkModel& net);
NetworkModel load_network(const std::filesystem::path& path);

ScenarioSet scenarios_from_json(const nlohmann::json& doc);
nlohmann::json scenarios_to_json(const ScenarioSet& set);
ScenarioSet load_scenarios(const std::filesystem::path& path);

ScenarioSpec scenario_spec_from_json(const nlohmann::json& doc);

DcVariant parse_dc_variant(const std::string& s);
/// The "ibr" object of a device entry (N, physical, control).
/// Either an explicit scenario list or {"spec": {...}} synthesized against
/// net; the result is validated against net.
ScenarioSet read_scenario_file(const NetworkModel& net, const std::filesystem::path& path);

IbrData ibr_from_json(const nlohmann::json& doc, const std::string& where);
std::string to_string(DcVariant v);

/// Reads a JSON file, mapping I/O and syntax failures to ValidationError.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace stabman
