#pragma once

#include <string>
#include <vector>

#include "slfm/kalman.hpp"

namespace slfm {

// A parsed CSV file: '#'-prefixed lines are comments, the first non-comment
// line is the header, and empty fields decode to NaN (missing value).
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<long> lines;  // 1-based file line of each data row
};

// Reads and validates the basic CSV shape. Throws DataError (with the file
// line number where possible) on unreadable files, unparsable fields, or rows
// whose field count differs from the header.
CsvTable read_csv(const std::string& path);

// Writes comments ('# ' prefixed), a header row, and data rows. Values are
// formatted with 17 significant digits so doubles survive a round-trip
// exactly; NaN is written as an empty field. Throws DataError when the file
// cannot be written.
void write_csv(const std::string& path, const std::vector<std::string>& comments,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows);

// Interprets a table with columns (t, y_1, ..., y_D) as an observation grid.
// Requires the first column to be named "t" and exactly obs_dim observation
// columns; timestamps must be finite and strictly increasing (DataError names
// the offending file line). NaN observation cells become missing values.
TimeGrid grid_from_table(const CsvTable& table, int obs_dim);

}  // namespace slfm
