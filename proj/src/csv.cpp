#include "slfm/csv.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "slfm/errors.hpp"

namespace slfm {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0;
  size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_field(const std::string& raw, long lineno) {
  const std::string s = trim(raw);
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw DataError("cannot parse '" + s + "' as a number", lineno);
  }
  return v;
}

std::string format_value(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  long lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto fields = split_fields(line);
    if (!have_header) {
      for (const auto& f : fields) table.columns.push_back(trim(f));
      have_header = true;
      continue;
    }
    if (fields.size() != table.columns.size()) {
      throw DataError("expected " + std::to_string(table.columns.size()) +
                          " fields, found " + std::to_string(fields.size()),
                      lineno);
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_field(f, lineno));
    table.rows.push_back(std::move(row));
    table.lines.push_back(lineno);
  }
  if (!have_header) throw DataError("no header row in '" + path + "'");
  return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& comments,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (const auto& c : comments) out << "# " << c << "\n";
  for (size_t j = 0; j < columns.size(); ++j) {
    if (j) out << ",";
    out << columns[j];
  }
  out << "\n";
  for (const auto& row : rows) {
    if (row.size() != columns.size()) {
      throw InvalidInputError("write_csv: row width does not match the header");
    }
    for (size_t j = 0; j < row.size(); ++j) {
      if (j) out << ",";
      out << format_value(row[j]);
    }
    out << "\n";
  }
  out.flush();
  if (!out) throw DataError("failed while writing '" + path + "'");
}

TimeGrid grid_from_table(const CsvTable& table, int obs_dim) {
  if (table.columns.empty() || trim(table.columns[0]) != "t") {
    throw DataError("first column must be 't'");
  }
  if (static_cast<int>(table.columns.size()) != obs_dim + 1) {
    throw DataError("expected " + std::to_string(obs_dim) +
                    " observation columns, found " +
                    std::to_string(table.columns.size() - 1));
  }
  if (table.rows.empty()) throw DataError("no data rows");
  TimeGrid grid;
  grid.times = Vector(table.rows.size());
  grid.y.reserve(table.rows.size());
  for (size_t k = 0; k < table.rows.size(); ++k) {
    const long lineno = k < table.lines.size() ? table.lines[k] : 0;
    const double t = table.rows[k][0];
    if (!std::isfinite(t)) throw DataError("missing or non-finite timestamp", lineno);
    if (k > 0 && t <= grid.times(static_cast<int>(k) - 1)) {
      throw DataError("timestamps must be strictly increasing", lineno);
    }
    grid.times(static_cast<int>(k)) = t;
    Vector y(obs_dim);
    for (int d = 0; d < obs_dim; ++d) y(d) = table.rows[k][d + 1];
    grid.y.push_back(std::move(y));
  }
  return grid;
}

}  // namespace slfm
