#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "imstab/measures.hpp"
#include "imstab/sde.hpp"

namespace imstab {

using ordered_json = nlohmann::ordered_json;

// FNV-1a of a string, rendered as 16 hex digits; stamps outputs with the
// resolved configuration they came from.
std::string fnv1a_hex(const std::string& text);

// Point-cloud CSV with header x_1..x_d,weight (weight column optional on read).
void write_point_cloud_csv(const std::string& path, const EmpiricalMeasure& m);
EmpiricalMeasure read_point_cloud_csv(const std::string& path);

// Ensemble dump: traj, t, x_1..x_d, y_1..y_d.
void write_ensemble_csv(const std::string& path, const TrajectoryEnsemble& e);

// Plain CSV (header + numeric rows, %.17g).
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

// Serialized with a trailing newline; written to a temp file and renamed.
void write_json_atomic(const std::string& path, const ordered_json& j);
void write_text_atomic(const std::string& path, const std::string& text);

}  // namespace imstab
