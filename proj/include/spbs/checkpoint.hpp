#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "spbs/common.hpp"

namespace spbs {

// Versioned binary container: magic, JSON header (with a tensor manifest),
// then raw little-endian doubles per tensor. Loading validates the manifest
// so a truncated file is refused whole.
class CheckpointWriter {
 public:
  nlohmann::ordered_json header = nlohmann::ordered_json::object();
  void add_tensor(const std::string& name, const Eigen::MatrixXd& value);
  void save(const std::string& path) const;

 private:
  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors_;
};

class CheckpointReader {
 public:
  static CheckpointReader load(const std::string& path);

  const nlohmann::ordered_json& header() const { return header_; }
  bool has_tensor(const std::string& name) const { return tensors_.count(name) > 0; }
  const Eigen::MatrixXd& tensor(const std::string& name) const;
  std::vector<std::string> tensor_names() const;

 private:
  nlohmann::ordered_json header_;
  std::map<std::string, Eigen::MatrixXd> tensors_;
};

}  // namespace spbs
