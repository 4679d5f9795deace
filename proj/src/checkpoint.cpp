#include "spbs/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace spbs {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'B', 'S', 'C', 'K', 'P', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

std::uint64_t read_u64(std::istream& in) {
  char buf[8];
  in.read(buf, 8);
  if (!in) throw ValidationError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return v;
}

}  // namespace

void CheckpointWriter::add_tensor(const std::string& name, const Eigen::MatrixXd& value) {
  tensors_.emplace_back(name, value);
}

void CheckpointWriter::save(const std::string& path) const {
  nlohmann::ordered_json full = header;
  nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
  for (const auto& [name, value] : tensors_) {
    manifest.push_back({{"name", name}, {"rows", value.rows()}, {"cols", value.cols()}});
  }
  full["tensors"] = manifest;
  std::string header_bytes = full.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u64(out, header_bytes.size());
  out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
  for (const auto& [name, value] : tensors_) {
    for (Eigen::Index r = 0; r < value.rows(); ++r)
      for (Eigen::Index c = 0; c < value.cols(); ++c) {
        double d = value(r, c);
        std::uint64_t bits;
        std::memcpy(&bits, &d, 8);
        write_u64(out, bits);
      }
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

CheckpointReader CheckpointReader::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw ValidationError(path + ": not a checkpoint file (bad magic)");
  std::uint64_t header_len = read_u64(in);
  if (header_len > (1ULL << 30)) throw ValidationError(path + ": corrupt header length");
  std::string header_bytes(header_len, '\0');
  in.read(header_bytes.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw ValidationError(path + ": checkpoint truncated (header)");

  CheckpointReader reader;
  try {
    reader.header_ = nlohmann::ordered_json::parse(header_bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": corrupt checkpoint header: " + e.what());
  }
  if (!reader.header_.contains("tensors") || !reader.header_["tensors"].is_array())
    throw ValidationError(path + ": checkpoint header missing tensor manifest");

  for (const auto& entry : reader.header_["tensors"]) {
    std::string name = entry.at("name").get<std::string>();
    Eigen::Index rows = entry.at("rows").get<Eigen::Index>();
    Eigen::Index cols = entry.at("cols").get<Eigen::Index>();
    if (rows < 0 || cols < 0) throw ValidationError(path + ": corrupt tensor shape");
    Eigen::MatrixXd value(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        std::uint64_t bits = read_u64(in);
        double d;
        std::memcpy(&d, &bits, 8);
        value(r, c) = d;
      }
    if (reader.tensors_.count(name) > 0)
      throw ValidationError(path + ": duplicate tensor '" + name + "'");
    reader.tensors_[name] = std::move(value);
  }
  char extra;
  if (in.read(&extra, 1)) throw ValidationError(path + ": trailing bytes after tensors");
  return reader;
}

const Eigen::MatrixXd& CheckpointReader::tensor(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ValidationError("checkpoint missing tensor '" + name + "'");
  return it->second;
}

std::vector<std::string> CheckpointReader::tensor_names() const {
  std::vector<std::string> names;
  for (const auto& [name, _] : tensors_) names.push_back(name);
  return names;
}

}  // namespace spbs
