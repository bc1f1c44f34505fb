#pragma once

#include <string>
#include <vector>

#include "simex/dataset.hpp"
#include "simex/simex.hpp"

namespace simex::io {

/// Comma-separated table; lines starting with '#' before or between records are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments;  // without the leading '#'

  /// Position of `name` in the header, or -1.
  int column(const std::string& name) const;
};

/// RFC-4180 reader: quoted fields may hold commas, quotes ("") and newlines.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::string& path);

/// Quotes a field only when it needs it.
std::string csv_field(const std::string& value);
std::string csv_line(const std::vector<std::string>& fields);

/// Shortest decimal form that reads back to the same double.
std::string format_double(double v);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

/// Columns `y` and `w1..wp` (p = largest consecutive j present); other columns are ignored.
/// Throws MissingColumn, ParseError(row, column) for unparsable or non-finite cells.
Dataset load_dataset(const std::string& path);
std::string dataset_to_csv(const Dataset& data);
void write_dataset(const std::string& path, const Dataset& data);

/// Diagonal measurement-error covariance from duplicate measurements: columns
/// `w{j}_rep1`, `w{j}_rep2` for every coordinate j (1-based) not listed in
/// `error_free`; sigma_j^2 = sum_i (W_ij1 - W_ij2)^2 / (2n).
MeasurementErrorSpec sigma_u_from_replicates(const std::string& path, int p,
                                             const std::vector<int>& error_free = {});
MeasurementErrorSpec sigma_u_from_replicates(const CsvTable& table, int p,
                                             const std::vector<int>& error_free = {});

}  // namespace simex::io
