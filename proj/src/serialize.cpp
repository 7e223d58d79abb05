#include "samgpt/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include <openssl/sha.h>

#include "samgpt/error.hpp"

namespace samgpt {

namespace fs = std::filesystem;

namespace {

void put_u64(std::string& out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t x = 0;
  for (int i = 7; i >= 0; --i) x = (x << 8) | p[i];
  return x;
}

std::string file_name_for(const std::string& name) {
  std::string f = name;
  for (char& c : f)
    if (c == '/') c = '_';
  return f + ".bin";
}

}  // namespace

std::string tensor_bytes(const Matrix& m) {
  std::string out;
  out.reserve(24 + 8 * static_cast<std::size_t>(m.size()));
  put_u64(out, 2);
  put_u64(out, static_cast<std::uint64_t>(m.rows()));
  put_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) put_u64(out, std::bit_cast<std::uint64_t>(m(r, c)));
  return out;
}

void write_tensor_file(const fs::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError(path.string() + ": cannot open for writing");
  const std::string bytes = tensor_bytes(m);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw LoadError(path.string() + ": write failed");
}

Matrix read_tensor_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.string() + ": missing file");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  auto need = [&](std::size_t n) {
    if (bytes.size() < n) throw LoadError(path.string() + ": truncated tensor file");
  };
  need(8);
  const std::uint64_t rank = get_u64(p);
  if (rank < 1 || rank > 2) throw LoadError(path.string() + ": unsupported rank " + std::to_string(rank));
  need(8 + 8 * rank);
  std::uint64_t rows = 1, cols = 0;
  if (rank == 1) {
    cols = get_u64(p + 8);
  } else {
    rows = get_u64(p + 8);
    cols = get_u64(p + 16);
  }
  const std::size_t header = 8 + 8 * rank;
  if (bytes.size() != header + 8 * rows * cols)
    throw LoadError(path.string() + ": payload size does not match header dims");
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  const unsigned char* data = p + header;
  for (std::uint64_t r = 0; r < rows; ++r)
    for (std::uint64_t c = 0; c < cols; ++c)
      m(static_cast<Index>(r), static_cast<Index>(c)) = std::bit_cast<double>(get_u64(data + 8 * (r * cols + c)));
  return m;
}

void save_tensor_dir(const fs::path& dir, const std::vector<std::pair<std::string, const Matrix*>>& tensors,
                     const nlohmann::ordered_json& extra) {
  fs::create_directories(dir);
  nlohmann::ordered_json manifest = extra;
  nlohmann::ordered_json index = nlohmann::ordered_json::object();
  for (const auto& [name, m] : tensors) {
    const std::string file = file_name_for(name);
    write_tensor_file(dir / file, *m);
    index[name] = {{"file", file}, {"shape", {m->rows(), m->cols()}}};
  }
  manifest["tensors"] = std::move(index);
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw LoadError((dir / "manifest.json").string() + ": write failed");
}

TensorDir::TensorDir(fs::path dir) : dir_(std::move(dir)) {
  std::ifstream in(dir_ / "manifest.json");
  if (!in) throw LoadError((dir_ / "manifest.json").string() + ": missing file");
  try {
    manifest_ = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError((dir_ / "manifest.json").string() + ": " + e.what());
  }
  if (!manifest_.contains("tensors")) throw LoadError((dir_ / "manifest.json").string() + ": no 'tensors' key");
}

bool TensorDir::contains(const std::string& name) const { return manifest_["tensors"].contains(name); }

Matrix TensorDir::load(const std::string& name) const {
  if (!contains(name)) throw LoadError((dir_ / "manifest.json").string() + ": no tensor '" + name + "'");
  const auto& entry = manifest_["tensors"][name];
  Matrix m = read_tensor_file(dir_ / entry.at("file").get<std::string>());
  const auto shape = entry.at("shape").get<std::vector<Index>>();
  if (shape.size() != 2 || shape[0] != m.rows() || shape[1] != m.cols())
    throw LoadError((dir_ / entry.at("file").get<std::string>()).string() + ": shape disagrees with manifest");
  return m;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned char b : digest) {
    out.push_back(hex[b >> 4]);
    out.push_back(hex[b & 15]);
  }
  return out;
}

}  // namespace samgpt
