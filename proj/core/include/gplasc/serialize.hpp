// ============================================================================
// serialize.hpp - JSON documents and CSV sidecars
//
// All emitters are deterministic: insertion-ordered keys, no timestamps,
// shortest round-trip float formatting.
// ============================================================================
#pragma once

#include "gplasc/bounds.hpp"
#include "gplasc/continual.hpp"
#include "gplasc/encoder_net.hpp"
#include "gplasc/geometry.hpp"
#include "gplasc/sphere_optimizer.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace gplasc {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

Json matrix_to_json(const Matrix& m);          // array of row arrays
Matrix matrix_from_json(const Json& j);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

Json to_json(const EtfFrame& frame);
EtfFrame etf_frame_from_json(const Json& j);

Json to_json(const SimplexReport& report, double tol);

Json to_json(const RegionPlan& plan);
RegionPlan region_plan_from_json(const Json& j);

Json to_json(const LossBreakdown& breakdown);

Json to_json(const EqualityReport& report);

Json to_json(const EncoderParams& params);  // flat arrays with shape metadata
EncoderParams encoder_params_from_json(const Json& j);

Json to_json(const RunReport& report);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

// step, loss terms, one line per recorded step.
std::string loss_curve_csv(const std::vector<LossBreakdown>& losses);

// step, loss terms, then n*h flattened coordinates, one line per snapshot.
std::string snapshots_csv(const Trajectory& traj);

// x..., label, task_id rows.
std::string point_cloud_csv(const FeatureSet& fs);

// task x task heat-map data with a header row.
std::string overlap_matrix_csv(const Matrix& overlap);

std::string format_double(double v);  // %.17g

}  // namespace gplasc
