#pragma once

#include "stabman/report.hpp"
#include "stabman/tuner.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace stabman {

inline constexpr const char* kToolVersion = "0.3.0";

// ---------------------------------------------------------------------------
// Run manifests
// ---------------------------------------------------------------------------

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);
std::string utc_timestamp();

struct FileDigest {
    std::string path;
    std::string sha256;
};

struct RunManifest {
    std::string tool_version = kToolVersion;
    std::string command;
    std::vector<FileDigest> inputs;
    std::map<std::string, std::uint64_t> seeds;
    std::string started, finished;
    std::vector<FileDigest> outputs;
};

RunManifest make_manifest(const std::string& command, const std::vector<std::filesystem::path>& inputs,
                          const std::map<std::string, std::uint64_t>& seeds,
                          const std::vector<std::filesystem::path>& outputs, const std::string& started);
nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& doc);
/// True when every listed input still hashes to its recorded digest.
bool verify_manifest(const RunManifest& m);

/// One row per tuner evaluation: gains, pssa and the constraint values.
CsvTable tune_history_csv(const TunerResult& r);

// ---------------------------------------------------------------------------
// Manifold studies
// ---------------------------------------------------------------------------

struct ManifoldStudy {
    StudyCase study;
    ScenarioSet scenarios;
    ParameterDomain pair;
    AsmConfig asm_config;
    std::size_t resolution = 101;
    bool mask_rpi = true;
    StabilityOptions stability;
};

struct ManifoldArtifacts {
    ManifoldModel model;
    Grid2D grid;
};

/// ASM over the focus devices of one network, exported on a grid masked by
/// the RPI of the first focus device.
ManifoldArtifacts run_manifold_study(const ManifoldStudy& s);

/// Writes <prefix>_samples.csv, _grid.csv, _model.json and optionally _plot.svg.
std::vector<std::filesystem::path> write_manifold_outputs(const std::string& prefix, const ManifoldArtifacts& a,
                                                          const std::optional<Point2>& tuned, bool svg);

// ---------------------------------------------------------------------------
// Case matrix
// ---------------------------------------------------------------------------

struct CaseStudy {
    std::string name;
    std::map<std::string, DeviceKind> assignment;  ///< generator bus -> SG | IBR
    std::vector<std::string> focus;                ///< device ids whose gains vary
};

struct CaseMatrix {
    IbrData unit;  ///< one converter; replacements aggregate N = round(rating / unit rating)
    std::vector<CaseStudy> cases;
};

CaseMatrix case_matrix_from_json(const nlohmann::json& doc);

/// SG -> IBR replacement on the assigned buses. Replaced devices keep their
/// id, rating and dispatch; PV buses that lose their SG become PQ.
NetworkModel build_case_network(const NetworkModel& base, const CaseStudy& c, const IbrData& unit);

/// Sets the tuned gains on every IBR in the network.
void apply_tuned_gains(NetworkModel& net, const TunerResult& tuned);

struct CaseMatrixConfig {
    ParameterDomain pair;
    AsmConfig asm_config;
    std::size_t resolution = 101;
    StabilityOptions stability;
    std::filesystem::path out_dir = ".";
    std::string command;  ///< recorded in each manifest
    std::vector<std::filesystem::path> inputs;
};

struct CaseOutput {
    std::string name;
    ManifoldArtifacts artifacts;
    std::vector<std::filesystem::path> files;
};

/// Runs every case (in parallel) and writes <out_dir>/<case>/ outputs plus a manifest.
std::vector<CaseOutput> run_case_matrix(const NetworkModel& base, const ScenarioSet& scenarios, const CaseMatrix& matrix,
                                        const std::optional<TunerResult>& tuned, const CaseMatrixConfig& cfg);

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct ReportEntry {
    std::string name;
    Grid2D grid;
    Real p_th = 0.8;
    std::size_t samples = 0;
    std::optional<Point2> tuned;
};

ReportEntry load_report_entry(const std::filesystem::path& model, const std::filesystem::path& grid,
                              const std::optional<TunerResult>& tuned);
std::string render_report_svg(const ReportEntry& e);
/// One row per entry: sample count, stable share of the grid and of its RPI part.
CsvTable report_summary(const std::vector<ReportEntry>& entries);

}  // namespace stabman
