#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stiffkit/analysis.hpp"
#include "stiffkit/metrics.hpp"
#include "stiffkit/neural.hpp"
#include "stiffkit/ode.hpp"
#include "stiffkit/theory.hpp"

namespace stiffkit::io {

using json = nlohmann::json;

// Deterministic serialization: keys sorted, no whitespace, doubles printed
// with up to 17 significant digits (exact round-trip).
std::string dump_json(const json& j);

// Temp file + rename, so failures never leave partial outputs behind.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);
json parse_json_file(const std::filesystem::path& path);

json trajectory_to_json(const ode::Trajectory& traj);
ode::Trajectory trajectory_from_json(const json& j);

json dataset_to_json(const neural::Dataset& data);
neural::Dataset dataset_from_json(const json& j);

json config_to_json(const neural::NetworkConfig& config);
neural::NetworkConfig config_from_json(const json& j);

json model_to_json(const neural::ResidualNetwork& net);
neural::ResidualNetwork model_from_json(const json& j);

json tns_to_json(const metrics::TnsEstimate& est, const std::vector<metrics::TnsEstimate>& refinements = {});

json correlation_to_json(const analysis::CorrelationReport& report);

json theorem2_to_json(const std::vector<std::pair<double, theory::Theorem2Report>>& sweep);
json convergence_reports_to_json(const std::vector<theory::ConvergenceReport>& reports,
                                 std::uint64_t seed);
json comparison_to_json(const theory::ComparisonReport& report, const std::string& system_name);

json attention_correlation_to_json(const analysis::AttentionCorrelationResult& result);

std::string records_to_csv(const std::vector<analysis::ExperimentRecord>& records);
std::vector<analysis::ExperimentRecord> records_from_csv(const std::string& text);

std::string nsi_rows_to_csv(const std::vector<std::pair<std::size_t, std::vector<metrics::NsiRow>>>& by_input);

// Catalog lookup: "decay", "stiff_sine", or "linear_sym:<json file>" with
// {"matrix": [[...]], "u0": [...]}. Returns the system and its default u0.
std::pair<ode::OdeSystem, Vec> resolve_system(const std::string& name);

}  // namespace stiffkit::io
