#include "simex/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

#include "simex/errors.hpp"

namespace simex::io {

namespace {

double parse_cell(const std::string& text, std::size_t row, const std::string& column) {
  std::string_view sv(text);
  while (!sv.empty() && (sv.front() == ' ' || sv.front() == '\t')) sv.remove_prefix(1);
  while (!sv.empty() && (sv.back() == ' ' || sv.back() == '\t')) sv.remove_suffix(1);
  if (!sv.empty() && sv.front() == '+') sv.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
  if (sv.empty() || ec != std::errc() || ptr != sv.data() + sv.size())
    throw ParseError(row, column,
                     "row " + std::to_string(row) + ", column " + column + ": cannot parse '" + text + "'");
  if (!std::isfinite(v))
    throw ParseError(row, column,
                     "row " + std::to_string(row) + ", column " + column + ": non-finite value '" + text + "'");
  return v;
}

std::vector<int> required_columns(const CsvTable& t, const std::vector<std::string>& names) {
  std::vector<int> idx;
  for (const auto& name : names) {
    const int c = t.column(name);
    if (c < 0) throw MissingColumn("missing column '" + name + "'");
    idx.push_back(c);
  }
  return idx;
}

const std::string& cell(const CsvTable& t, std::size_t r, int c, const std::string& name) {
  const auto& row = t.rows[r];
  if (static_cast<std::size_t>(c) >= row.size())
    throw ParseError(r + 1, name, "row " + std::to_string(r + 1) + " has too few fields");
  return row[static_cast<std::size_t>(c)];
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false, at_record_start = true, field_started = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
    at_record_start = true;
  };

  const std::size_t len = text.size();
  std::size_t i = (len >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0) ? 3 : 0;
  for (; i < len; ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < len && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    if (at_record_start && ch == '#') {
      const std::size_t eol = text.find('\n', i);
      std::string line = text.substr(i + 1, eol == std::string::npos ? std::string::npos : eol - i - 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      table.comments.push_back(std::move(line));
      if (eol == std::string::npos) break;
      i = eol;
      continue;
    }
    at_record_start = false;
    if (ch == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (ch == ',') {
      end_field();
    } else if (ch == '\n') {
      end_record();
    } else if (ch == '\r') {
      // CRLF line endings
    } else {
      field += ch;
      field_started = true;
    }
  }
  if (in_quotes) throw ParseError(records.size(), "", "unterminated quoted field");
  if (!at_record_start) end_record();

  if (records.empty()) throw ParseError(0, "", "no header row");
  table.header = std::move(records.front());
  table.rows.assign(std::make_move_iterator(records.begin() + 1),
                    std::make_move_iterator(records.end()));
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidData("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char ch : value) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_field(fields[i]);
  }
  return out + '\n';
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidData("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw InvalidData("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw InvalidData("cannot rename onto '" + path + "': " + ec.message());
  }
}

Dataset load_dataset(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int yc = t.column("y");
  if (yc < 0) throw MissingColumn("missing column 'y' in '" + path + "'");
  std::vector<std::string> wnames;
  while (t.column("w" + std::to_string(wnames.size() + 1)) >= 0)
    wnames.push_back("w" + std::to_string(wnames.size() + 1));
  if (wnames.empty()) throw MissingColumn("missing column 'w1' in '" + path + "'");
  const std::vector<int> wc = required_columns(t, wnames);

  const auto n = static_cast<Eigen::Index>(t.rows.size());
  Dataset d{Eigen::VectorXd(n), Eigen::MatrixXd(n, static_cast<Eigen::Index>(wc.size()))};
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    d.y[i] = parse_cell(cell(t, r, yc, "y"), r + 1, "y");
    for (std::size_t j = 0; j < wc.size(); ++j)
      d.w(i, static_cast<Eigen::Index>(j)) = parse_cell(cell(t, r, wc[j], wnames[j]), r + 1, wnames[j]);
  }
  return d;
}

std::string dataset_to_csv(const Dataset& data) {
  std::vector<std::string> fields{"y"};
  for (Eigen::Index j = 0; j < data.p(); ++j) fields.push_back("w" + std::to_string(j + 1));
  std::string out = csv_line(fields);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    fields.assign(1, format_double(data.y[i]));
    for (Eigen::Index j = 0; j < data.p(); ++j) fields.push_back(format_double(data.w(i, j)));
    out += csv_line(fields);
  }
  return out;
}

void write_dataset(const std::string& path, const Dataset& data) {
  write_file_atomic(path, dataset_to_csv(data));
}

MeasurementErrorSpec sigma_u_from_replicates(const CsvTable& table, int p,
                                             const std::vector<int>& error_free) {
  if (p < 1) throw ConfigError("p must be >= 1");
  for (int j : error_free)
    if (j < 1 || j > p) throw ConfigError("error-free coordinate " + std::to_string(j) + " outside 1.." + std::to_string(p));
  if (table.rows.empty()) throw InvalidData("replicate file has no rows");

  Eigen::VectorXd var = Eigen::VectorXd::Zero(p);
  const double n = static_cast<double>(table.rows.size());
  for (int j = 1; j <= p; ++j) {
    if (std::find(error_free.begin(), error_free.end(), j) != error_free.end()) continue;
    const std::string a = "w" + std::to_string(j) + "_rep1", b = "w" + std::to_string(j) + "_rep2";
    const std::vector<int> cols = required_columns(table, {a, b});
    double ss = 0.0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const double d = parse_cell(cell(table, r, cols[0], a), r + 1, a) -
                       parse_cell(cell(table, r, cols[1], b), r + 1, b);
      ss += d * d;
    }
    var[j - 1] = ss / (2.0 * n);
  }
  return MeasurementErrorSpec::diagonal(var);
}

MeasurementErrorSpec sigma_u_from_replicates(const std::string& path, int p,
                                             const std::vector<int>& error_free) {
  return sigma_u_from_replicates(read_csv(path), p, error_free);
}

}  // namespace simex::io
