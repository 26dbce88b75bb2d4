#include "kinlab/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "kinlab/error.hpp"

namespace kinlab {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw IoError(fmt::format("cannot open '{}' for writing", path));
  for (const auto& h : header) cell(h);
  end_row();
}

CsvWriter& CsvWriter::cell(double v) { return cell(format_double(v)); }
CsvWriter& CsvWriter::cell(long long v) { return cell(std::to_string(v)); }

CsvWriter& CsvWriter::cell(const std::string& v) {
  if (!first_) out_ << ',';
  out_ << v;
  first_ = false;
  return *this;
}

void CsvWriter::end_row() {
  out_ << '\n';
  first_ = true;
}

void CsvWriter::row(std::span<const double> values) {
  for (double v : values) cell(v);
  end_row();
}

void CsvWriter::close() {
  out_.flush();
  if (!out_) throw IoError(fmt::format("write to '{}' failed", path_));
  out_.close();
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw IoError(fmt::format("CSV has no column '{}'", name));
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw IoError(fmt::format("'{}' is empty", path));
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.header.push_back(cell);
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (start <= line.size()) {
      auto end = line.find(',', start);
      if (end == std::string::npos) end = line.size();
      std::string_view cell(line.data() + start, end - start);
      double v = 0.0;
      if (cell == "nan") {
        v = std::nan("");
      } else {
        auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc() || p != cell.data() + cell.size())
          throw IoError(fmt::format("{}:{}: not a number: '{}'", path, line_no, cell));
      }
      row.push_back(v);
      start = end + 1;
    }
    if (row.size() != t.header.size())
      throw IoError(fmt::format("{}:{}: {} columns, header has {}", path, line_no, row.size(), t.header.size()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}' for hashing", path));
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), std::streamsize(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), std::size_t(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path));
  out << text;
  out.flush();
  if (!out) throw IoError(fmt::format("write to '{}' failed", path));
}

void write_manifest(const std::string& dir, const Manifest& m, const nlohmann::json& extra) {
  nlohmann::json j;
  j["schema"] = 1;
  j["tool"] = "kinlab";
  j["version"] = KINLAB_VERSION_STRING;
  j["subcommand"] = m.subcommand;
  j["status"] = m.status;
  if (!m.message.empty()) j["message"] = m.message;
  j["config"] = m.config_text;
  j["dt"] = m.dt;
  j["steps"] = m.steps;
  j["wall_seconds"] = m.wall_seconds;
  auto outputs = nlohmann::json::array();
  for (const auto& p : m.outputs) {
    if (!std::filesystem::exists(p)) continue;
    outputs.push_back({{"path", std::filesystem::path(p).filename().string()}, {"sha256", sha256_file(p)}});
  }
  j["outputs"] = outputs;
  if (extra.is_object())
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  write_text((std::filesystem::path(dir) / "manifest.json").string(), j.dump(2) + "\n");
}

}  // namespace kinlab
