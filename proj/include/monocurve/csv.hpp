#pragma once

// Comma-separated numeric tables. Quoted fields are accepted in the header;
// data cells must parse completely as decimal numbers.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace monocurve::csv {

struct Table {
  std::vector<std::string> header;  // empty when the file had none
  Eigen::MatrixXd data;

  /// Index of the named column, if present.
  std::optional<Eigen::Index> column(const std::string& name) const;
  /// Columns whose names are prefix1, prefix2, ... in order; empty if the
  /// first is missing.
  std::vector<Eigen::Index> numbered_columns(const std::string& prefix) const;
  Eigen::MatrixXd select(const std::vector<Eigen::Index>& cols) const;
};

/// ParseError names the offending row and column (1-based, counting the
/// header line); RaggedRows when a row has a different field count.
Table parse(std::istream& in, bool has_header, const std::string& source = "<stream>");
Table load_csv(const std::string& path, bool has_header);

/// %.17g, which round-trips every finite double.
std::string format_double(double v);

void write(std::ostream& out, const std::vector<std::string>& header, const Eigen::MatrixXd& data);
std::string to_string(const std::vector<std::string>& header, const Eigen::MatrixXd& data);

/// Writes to a sibling temporary and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace monocurve::csv
