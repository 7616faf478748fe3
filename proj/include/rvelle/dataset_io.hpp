#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "rvelle/lle.hpp"
#include "rvelle/pipeline.hpp"

namespace rvelle::io {

inline constexpr int kFormatVersion = 1;

/// Directory layout:
///   dataset:  manifest.json, X.f64, Zpf.f64, Zsig.f64
///   manifold: manifest.json, X.f64, Y.f64, W.triplets
/// Arrays are raw little-endian float64, row-major, one file each; the
/// manifest records shape and CRC-32 of every file. W.triplets holds
/// (int64 row, int64 col, float64 value) records sorted by (row, col).

void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// `provenance` is stored verbatim under the manifest key "provenance".
void save_manifold(const Manifold& man, const std::filesystem::path& dir,
                   const nlohmann::json& provenance = nlohmann::json::object());
Manifold load_manifold(const std::filesystem::path& dir);

/// Writes `m` to dir/<name>.f64 and returns its manifest descriptor.
nlohmann::json save_matrix(const std::filesystem::path& dir, const std::string& name, const RowMatrix& m);
/// Reads the array `name` described in `manifest`, verifying size and CRC.
RowMatrix load_matrix(const std::filesystem::path& dir, const nlohmann::json& manifest, const std::string& name);

std::uint32_t crc32(const void* data, std::size_t size);
std::uint32_t file_crc32(const std::filesystem::path& file);

/// Writes `bytes` to `file` through a temporary in the same directory and a
/// rename, so readers never observe a partial file.
void write_atomic(const std::filesystem::path& file, std::string_view bytes);

nlohmann::json to_json(const GenerationConfig& cfg);
GenerationConfig generation_config_from_json(const nlohmann::json& j);

/// RFC 4180 writer: CRLF line ends, fields quoted when they contain a comma,
/// quote, CR or LF. Numbers are written with 17 significant digits.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  CsvWriter& row(const std::vector<std::string>& fields);
  [[nodiscard]] const std::string& str() const { return out_; }
  void save(const std::filesystem::path& file) const { write_atomic(file, out_); }

  static std::string num(double v);
  static std::string num(long long v) { return std::to_string(v); }
  static std::string num(int v) { return std::to_string(v); }

 private:
  void append(const std::vector<std::string>& fields);
  std::size_t width_;
  std::string out_;
};

}  // namespace rvelle::io
