#include "io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "toml_lite.hpp"  // ConfigError

namespace elmap::cli {

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

namespace {

std::vector<double> parse_csv_row(const std::string& line, int line_no) {
  std::vector<double> row;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t comma = line.find(',', pos);
    if (comma == std::string::npos) {
      comma = line.size();
    }
    std::string cell = line.substr(pos, comma - pos);
    // trim spaces
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) {
      cell.erase(cell.begin());
    }
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' ||
                             cell.back() == '\r')) {
      cell.pop_back();
    }
    if (cell.empty()) {
      throw ConfigError(line_no, "empty cell in CSV row");
    }
    double value = 0.0;
    const auto [ptr, ec] =
        std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) {
      throw ConfigError(line_no, "non-numeric cell '" + cell + "'");
    }
    row.push_back(value);
    if (comma == line.size()) {
      break;
    }
    pos = comma + 1;
  }
  return row;
}

bool blank(const std::string& line) {
  for (char c : line) {
    if (c != ' ' && c != '\t' && c != '\r') {
      return false;
    }
  }
  return true;
}

DemonstrationSet load_demonstrations_csv(std::istream& in) {
  std::vector<Trajectory> demos;
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  std::size_t dim = 0;

  auto flush_demo = [&](int at_line) {
    if (rows.empty()) {
      return;
    }
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t k = 0; k < dim; ++k) {
        pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
      }
    }
    try {
      demos.emplace_back(std::move(pts));
    } catch (const std::exception& e) {
      throw ConfigError(at_line, e.what());
    }
    rows.clear();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line) || (!line.empty() && line[0] == '#')) {
      flush_demo(line_no);
      continue;
    }
    std::vector<double> row = parse_csv_row(line, line_no);
    if (rows.empty() && demos.empty()) {
      dim = row.size();
    }
    if (row.size() != dim) {
      throw ConfigError(line_no, "ragged row: expected " + std::to_string(dim) +
                                     " columns, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  flush_demo(line_no);
  if (demos.empty()) {
    throw ConfigError(0, "no demonstrations found in file");
  }
  return DemonstrationSet(std::move(demos));
}

DemonstrationSet load_demonstrations_json(const std::string& text,
                                          const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(0, "JSON parse error in '" + path + "': " + e.what());
  }
  if (!doc.contains("demos") || !doc["demos"].is_array() || doc["demos"].empty()) {
    throw ConfigError(0, "'" + path + "' needs a nonempty \"demos\" array");
  }
  std::vector<Trajectory> demos;
  for (std::size_t di = 0; di < doc["demos"].size(); ++di) {
    const auto& demo = doc["demos"][di];
    if (!demo.is_array() || demo.empty()) {
      throw ConfigError(0, "demo " + std::to_string(di) + " must be a point array");
    }
    const std::size_t dim = demo[0].size();
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(demo.size()),
                        static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < demo.size(); ++i) {
      if (!demo[i].is_array() || demo[i].size() != dim) {
        throw ConfigError(0, "demo " + std::to_string(di) + " point " +
                                 std::to_string(i) + " has the wrong dimension");
      }
      for (std::size_t k = 0; k < dim; ++k) {
        pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
            demo[i][k].get<double>();
      }
    }
    if (doc.contains("weights")) {
      const auto& weights = doc["weights"];
      if (!weights.is_array() || weights.size() != doc["demos"].size()) {
        throw ConfigError(0, "\"weights\" must have one entry per demo");
      }
      const auto& w = weights[di];
      if (!w.is_array() || w.size() != demo.size()) {
        throw ConfigError(0, "weights for demo " + std::to_string(di) +
                                 " must match its point count");
      }
      Eigen::VectorXd wv(static_cast<Eigen::Index>(w.size()));
      for (std::size_t i = 0; i < w.size(); ++i) {
        wv(static_cast<Eigen::Index>(i)) = w[i].get<double>();
      }
      demos.emplace_back(std::move(pts), std::move(wv));
    } else {
      demos.emplace_back(std::move(pts));
    }
  }
  return DemonstrationSet(std::move(demos));
}

}  // namespace

DemonstrationSet load_demonstrations(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(0, "cannot open demonstrations file '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      continue;
    }
    if (c == '{') {
      return load_demonstrations_json(text, path);
    }
    break;
  }
  std::istringstream stream(text);
  try {
    return load_demonstrations_csv(stream);
  } catch (const ConfigError& e) {
    throw ConfigError(e.line(), std::string(e.what()) + " (in '" + path + "')");
  }
}

void write_demonstrations_csv(const DemonstrationSet& demos, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError(0, "cannot write '" + path + "'");
  }
  bool first = true;
  for (const Trajectory& t : demos.demos()) {
    if (!first) {
      out << "\n";
    }
    first = false;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      for (Eigen::Index k = 0; k < t.dim(); ++k) {
        if (k > 0) {
          out << ",";
        }
        out << format_double(t.points()(i, k));
      }
      out << "\n";
    }
  }
}

Eigen::MatrixXd load_point_cloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(0, "cannot open point cloud '" + path + "'");
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line) || (!line.empty() && line[0] == '#')) {
      continue;
    }
    std::vector<double> row = parse_csv_row(line, line_no);
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ConfigError(line_no, "ragged row in point cloud");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw ConfigError(0, "point cloud '" + path + "' is empty");
  }
  Eigen::MatrixXd cloud(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows.front().size(); ++k) {
      cloud(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  return cloud;
}

}  // namespace elmap::cli
