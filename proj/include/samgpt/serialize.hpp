#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "samgpt/types.hpp"

namespace samgpt {

/// Binary tensor file: u64 rank, u64 dims[rank], then row-major IEEE-754
/// doubles, all little-endian. Matrices are written with rank 2; rank-1 files
/// load as a single row.
void write_tensor_file(const std::filesystem::path& path, const Matrix& m);
Matrix read_tensor_file(const std::filesystem::path& path);

/// Exact byte image of write_tensor_file, for hashing.
std::string tensor_bytes(const Matrix& m);

/// Directory of tensor files indexed by manifest.json:
///   { "tensors": { "<name>": { "file": "...", "shape": [r, c] }, ... }, <extra keys> }
/// Names may contain '/' and '.'; file names are derived by replacing '/'.
void save_tensor_dir(const std::filesystem::path& dir,
                     const std::vector<std::pair<std::string, const Matrix*>>& tensors,
                     const nlohmann::ordered_json& extra);

class TensorDir {
 public:
  explicit TensorDir(std::filesystem::path dir);

  const nlohmann::ordered_json& manifest() const { return manifest_; }
  bool contains(const std::string& name) const;
  /// Throws LoadError when missing or when the file shape disagrees with the manifest.
  Matrix load(const std::string& name) const;

 private:
  std::filesystem::path dir_;
  nlohmann::ordered_json manifest_;
};

/// SHA-256 hex digest.
std::string sha256_hex(std::string_view bytes);

}  // namespace samgpt
