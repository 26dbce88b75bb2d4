#pragma once

#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace kinlab {

/// CSV with a header row; doubles printed with 17 significant digits.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(const std::string& v);
  void end_row();
  void row(std::span<const double> values);
  /// Flushes and checks the stream; throws IoError.
  void close();
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  bool first_ = true;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::size_t column(const std::string& name) const;  // throws IoError when absent
};

/// Reads an all-numeric CSV with a header row ("nan" accepted).
CsvTable read_csv(const std::string& path);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

std::string format_double(double v);

/// Writes text atomically enough for our purposes (truncate + write + check).
void write_text(const std::string& path, const std::string& text);

/// Manifest with "schema": 1, tool version, config echo and one
/// {path, sha256} entry per output file.
struct Manifest {
  std::string subcommand;
  std::string config_text;
  double dt = 0.0;
  std::size_t steps = 0;
  double wall_seconds = 0.0;
  std::string status = "ok";
  std::string message;
  std::vector<std::string> outputs;
};

/// Hashes outputs and writes manifest.json into `dir`; `extra` is merged in.
void write_manifest(const std::string& dir, const Manifest& manifest, const nlohmann::json& extra);

}  // namespace kinlab
