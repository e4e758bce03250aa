#include "bcm/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace bcm {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "matrix files are little-endian; big-endian hosts need byte swapping");

namespace {

constexpr char kMagic[] = "BCMMAT01\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

}  // namespace

std::string MatrixFile::config_hash() const {
  return header.value("config_hash", std::string());
}

bool file_exists(const std::string& path) { return fs::exists(path); }

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

namespace {

void commit(const std::string& path, const std::string& bytes) {
  const fs::path target(path);
  if (target.has_parent_path()) ensure_directory(target.parent_path().string());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
  }
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void write_text_atomic(const std::string& path, const std::string& contents) {
  commit(path, contents);
}

void write_matrix(const std::string& path, const Mat& m, const std::string& config_hash,
                  const json& meta) {
  json header = meta.is_object() ? meta : json::object();
  header["rows"] = m.rows();
  header["cols"] = m.cols();
  header["dtype"] = "float64";
  header["order"] = "row-major";
  header["endianness"] = "little";
  header["config_hash"] = config_hash;
  const std::string text = header.dump();

  std::string bytes(kMagic, kMagicLen);
  const std::uint64_t len = text.size();
  bytes.append(reinterpret_cast<const char*>(&len), sizeof len);
  bytes += text;
  const std::size_t payload = static_cast<std::size_t>(m.size()) * sizeof(double);
  const std::size_t at = bytes.size();
  bytes.resize(at + payload);
  // Eigen stores column-major; copy through a row-major view.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  if (payload) std::memcpy(bytes.data() + at, rm.data(), payload);
  commit(path, bytes);
}

MatrixFile read_matrix(const std::string& path) {
  const std::string bytes = slurp(path);
  if (bytes.size() < kMagicLen + 8 || bytes.compare(0, kMagicLen, kMagic) != 0)
    throw IoError("'" + path + "' is not a matrix file");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + kMagicLen, sizeof len);
  const std::size_t at = kMagicLen + sizeof len;
  if (bytes.size() < at + len) throw IoError("'" + path + "': truncated header");
  MatrixFile f;
  try {
    f.header = json::parse(bytes.substr(at, len));
  } catch (const json::exception& e) {
    throw IoError("'" + path + "': bad header: " + e.what());
  }
  if (f.header.value("dtype", "") != "float64" || f.header.value("order", "") != "row-major" ||
      f.header.value("endianness", "") != "little")
    throw IoError("'" + path + "': unsupported layout");
  const auto rows = f.header.at("rows").get<Eigen::Index>();
  const auto cols = f.header.at("cols").get<Eigen::Index>();
  const std::size_t payload = static_cast<std::size_t>(rows * cols) * sizeof(double);
  if (bytes.size() != at + len + payload) throw IoError("'" + path + "': payload size mismatch");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  if (payload) std::memcpy(rm.data(), bytes.data() + at + len, payload);
  f.data = rm;
  return f;
}

void write_json(const std::string& path, const json& j) { commit(path, j.dump(2) + "\n"); }

json read_json(const std::string& path) {
  try {
    return json::parse(slurp(path));
  } catch (const json::exception& e) {
    throw IoError("'" + path + "' is not valid JSON: " + e.what());
  }
}

std::string csv_table(const std::vector<std::string>& columns, const Mat& rows) {
  if (!columns.empty() && static_cast<Eigen::Index>(columns.size()) != rows.cols())
    throw ShapeError("csv_table: column count mismatch");
  std::ostringstream out;
  out << std::setprecision(17);
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << "\n";
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) out << (c ? "," : "") << rows(r, c);
    out << "\n";
  }
  return out.str();
}

void write_csv(const std::string& path, const std::vector<std::string>& columns, const Mat& rows) {
  commit(path, csv_table(columns, rows));
}

}  // namespace bcm
