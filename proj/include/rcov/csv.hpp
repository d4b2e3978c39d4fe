#pragma once

#include "rcov/types.hpp"

#include <string>
#include <vector>

namespace rcov {

struct CsvTable {
  std::vector<std::string> columns;
  Matrix values;  // entries under mask == 0 are 0
  Mask mask;      // 0 where the cell held the NA token
};

// Comma-separated, header row required, cells numeric or the NA token.
// Throws IoError for unreadable files, Error for malformed content.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

CsvTable read_csv(const std::string& path, const std::string& na_token = "NA");

// Full-precision (%.17g) writer; masked cells emit the NA token. The file is
// written to a temporary sibling and renamed into place.
void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const Matrix& values, const Mask* mask = nullptr,
               const std::string& na_token = "NA");

// Atomic whole-file write (temporary sibling + rename).
void write_text_atomic(const std::string& path, const std::string& content);

}  // namespace rcov
