#include "rcov/csv.hpp"

#include "rcov/errors.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

namespace rcov {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  out.push_back(field);
  return out;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

}  // namespace

CsvTable read_csv(const std::string& path, const std::string& na_token) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw Error(path + ": missing header row");
  CsvTable table;
  for (const std::string& c : split_line(line)) table.columns.push_back(trim(c));
  const std::size_t p = table.columns.size();
  if (p == 0) throw Error(path + ": empty header");

  std::vector<std::vector<double>> rows;
  std::vector<std::vector<std::uint8_t>> masks;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_line(line);
    if (fields.size() != p)
      throw Error(path + ":" + std::to_string(lineno) + ": expected " +
                  std::to_string(p) + " fields, found " +
                  std::to_string(fields.size()));
    std::vector<double> row(p, 0.0);
    std::vector<std::uint8_t> mask(p, 1);
    for (std::size_t j = 0; j < p; ++j) {
      std::string f = trim(fields[j]);
      if (f == na_token || f.empty()) {
        mask[j] = 0;
        continue;
      }
      char* end = nullptr;
      double v = std::strtod(f.c_str(), &end);
      if (end == f.c_str() || *end != '\0')
        throw Error(path + ":" + std::to_string(lineno) + ": cell '" + f +
                    "' is neither numeric nor the NA token");
      row[j] = v;
    }
    rows.push_back(std::move(row));
    masks.push_back(std::move(mask));
  }
  if (rows.empty()) throw Error(path + ": no data rows");

  table.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(p));
  table.mask.resize(static_cast<Index>(rows.size()), static_cast<Index>(p));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < p; ++j) {
      table.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
      table.mask(static_cast<Index>(i), static_cast<Index>(j)) = masks[i][j];
    }
  return table;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out << content;
    if (!out) throw IoError("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp + " to " + path);
}

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const Matrix& values, const Mask* mask,
               const std::string& na_token) {
  if (static_cast<Index>(columns.size()) != values.cols())
    throw DimensionMismatch("write_csv: header width mismatch");
  std::ostringstream out;
  for (std::size_t j = 0; j < columns.size(); ++j)
    out << (j == 0 ? "" : ",") << columns[j];
  out << '\n';
  char buf[64];
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) {
      if (j > 0) out << ',';
      if (mask != nullptr && (*mask)(i, j) == 0) {
        out << na_token;
      } else {
        std::snprintf(buf, sizeof(buf), "%.17g", values(i, j));
        out << buf;
      }
    }
    out << '\n';
  }
  write_text_atomic(path, out.str());
}

}  // namespace rcov
