#pragma once

// On-disk formats. Matrix files are
//   "BCMMAT01\n" | uint64 LE header length | JSON header | float64 LE payload
// with the header carrying rows, cols, dtype, order, endianness and the
// config hash plus free-form metadata. All writers go through a temp file
// and rename so readers never see a partial file.

#include "bcm/common.hpp"

#include <string>
#include <vector>

#include <json.hpp>

namespace bcm {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MatrixFile {
  Mat data;
  nlohmann::json header;  // full header including the fixed keys
  std::string config_hash() const;
};

/// `meta` keys are merged into the header; the fixed keys win.
void write_matrix(const std::string& path, const Mat& m, const std::string& config_hash,
                  const nlohmann::json& meta = nlohmann::json::object());
MatrixFile read_matrix(const std::string& path);

void write_text_atomic(const std::string& path, const std::string& contents);
void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

/// CSV with a header line; numbers printed with 17 significant digits.
std::string csv_table(const std::vector<std::string>& columns, const Mat& rows);
void write_csv(const std::string& path, const std::vector<std::string>& columns, const Mat& rows);

bool file_exists(const std::string& path);
void ensure_directory(const std::string& dir);
std::string join_path(const std::string& dir, const std::string& name);

}  // namespace bcm
