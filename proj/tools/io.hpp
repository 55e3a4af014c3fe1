#pragma once

#include <Eigen/Dense>

#include <string>

#include "elmap/trajectory.hpp"

namespace elmap::cli {

/// Load demonstrations from CSV (one point per row, columns = dimensions,
/// demos separated by blank lines) or from JSON ({"demos": [[[..],..],..],
/// optional "weights"}). The format is sniffed from the content.
DemonstrationSet load_demonstrations(const std::string& path);

/// CSV writer matching load_demonstrations; values round-trip exactly.
void write_demonstrations_csv(const DemonstrationSet& demos, const std::string& path);

/// Point cloud: CSV rows, one point per row.
Eigen::MatrixXd load_point_cloud(const std::string& path);

/// Shortest representation that parses back to exactly the same double
/// (17 significant digits when needed).
std::string format_double(double v);

}  // namespace elmap::cli
