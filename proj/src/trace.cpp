#include "omegaflow/trace.hpp"

#include <stdexcept>

#include "omegaflow/util.hpp"

namespace omegaflow {

namespace {

std::string join_csv(const std::vector<std::string>& parts) {
  std::string line;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) line += ',';
    line += parts[i];
  }
  return line;
}

}  // namespace

TraceWriter::TraceWriter(const std::filesystem::path& path, std::vector<std::string> columns)
    : path_(path), columns_(std::move(columns)) {
  if (columns_.empty()) throw std::invalid_argument("TraceWriter: empty column schema");
  out_.open(path_, std::ios::out | std::ios::trunc);
  if (!out_) throw std::runtime_error("TraceWriter: cannot open " + path_.string());
  out_ << join_csv(columns_) << '\n';
  out_.flush();
}

void TraceWriter::push(const std::vector<double>& row) {
  if (row.size() != columns_.size()) {
    throw std::invalid_argument("TraceWriter: row width does not match schema of " +
                                path_.string());
  }
  std::string line;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) line += ',';
    line += fmt_g17(row[i]);
  }
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error("TraceWriter: write failed on " + path_.string());
  ++rows_;
}

RowSink TraceWriter::sink() {
  return [this](const std::vector<double>& row) { this->push(row); };
}

void write_node_fields_csv(
    const std::filesystem::path& path, const GeometryBackend& geom,
    const std::vector<std::pair<std::string, const Eigen::ArrayXd*>>& fields) {
  std::vector<std::string> columns;
  if (geom.kind == GeometryKind::Sphere) {
    columns = {"theta", "phi"};
  } else {
    columns = {"x", "y"};
  }
  for (const auto& f : fields) {
    columns.push_back(f.first);
    if (f.second->size() != geom.num_nodes()) {
      throw std::invalid_argument("write_node_fields_csv: field '" + f.first +
                                  "' has wrong grid size");
    }
  }
  TraceWriter w(path, columns);
  std::vector<double> row(columns.size());
  for (Eigen::Index p = 0; p < geom.num_nodes(); ++p) {
    row[0] = geom.coord1[p];
    row[1] = geom.coord2[p];
    for (std::size_t i = 0; i < fields.size(); ++i) row[2 + i] = (*fields[i].second)[p];
    w.push(row);
  }
}

}  // namespace omegaflow
