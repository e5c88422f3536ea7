#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "omegaflow/geometry.hpp"
#include "omegaflow/types.hpp"

namespace omegaflow {

// CSV writer with a fixed column schema.  Every row is flushed to disk as it
// is pushed, so a later numerical failure cannot lose already-computed rows.
// Values are written with %.17g, which round-trips doubles exactly.
class TraceWriter {
 public:
  TraceWriter(const std::filesystem::path& path, std::vector<std::string> columns);

  void push(const std::vector<double>& row);
  // Adapter for iteration options that accept a row callback.
  RowSink sink();

  const std::vector<std::string>& columns() const { return columns_; }
  const std::filesystem::path& path() const { return path_; }
  long rows() const { return rows_; }

 private:
  std::filesystem::path path_;
  std::vector<std::string> columns_;
  std::ofstream out_;
  long rows_ = 0;
};

// Per-node CSV: coordinate columns of the grid followed by the named fields.
void write_node_fields_csv(
    const std::filesystem::path& path, const GeometryBackend& geom,
    const std::vector<std::pair<std::string, const Eigen::ArrayXd*>>& fields);

}  // namespace omegaflow
