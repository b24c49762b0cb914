#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "lmtp/config.hpp"
#include "lmtp/inference.hpp"
#include "lmtp/simulation.hpp"

namespace lmtp {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// {schema_version, config_hash, seed, config}
Json provenance_json(const RunConfig& config);

Json inference_json(const InferenceReport& report);
Json trajectory_json(const TrajectoryEstimate& trajectory);
Json truth_json(const AnalyticTruth& truth, const DgpParams& params);
Json study_json(const StudyTables& tables, bool include_records);
Json error_json(const Error& error);

// Each file starts with "# config_hash=<hash> seed=<seed>".
void write_trajectory_csv(const std::filesystem::path& path, const StackedEstimate& stacked,
                          const std::vector<double>& times, double alpha, const RunConfig& config);
void write_delta_csv(const std::filesystem::path& path, const InferenceReport& report, const RunConfig& config);
void write_eif_csv(const std::filesystem::path& path, const StackedEstimate& stacked, const RunConfig& config);
void write_study_csvs(const std::filesystem::path& dir, const StudyTables& tables, const RunConfig& config);

/// Three panels: both trajectories, their difference, and the contrasts with
/// pointwise and max-rule simultaneous bands.
std::string render_estimate_svg(const StackedEstimate& stacked, const InferenceReport& report,
                                const RunConfig& config);

void write_json(const std::filesystem::path& path, const Json& json);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace lmtp
