#pragma once

#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace biomass::nn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major tensor of doubles.
struct Tensor {
  std::vector<int> shape;
  Eigen::VectorXd data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(Eigen::VectorXd::Zero(numel(shape))) {}

  static Eigen::Index numel(const std::vector<int>& s) {
    return std::accumulate(s.begin(), s.end(), Eigen::Index{1}, std::multiplies<>());
  }

  /// View as a (shape[0], rest) row-major matrix.
  Eigen::Map<RowMatrix> matrix() { return {data.data(), shape.at(0), data.size() / shape.at(0)}; }
  Eigen::Map<const RowMatrix> matrix() const { return {data.data(), shape.at(0), data.size() / shape.at(0)}; }

  bool operator==(const Tensor& o) const { return shape == o.shape && data == o.data; }
};

using ParamMap = std::map<std::string, Tensor>;

/// Same keys and shapes as `like`, all zeros.
inline ParamMap zeros_like(const ParamMap& like) {
  ParamMap out;
  for (const auto& [name, t] : like) out.emplace(name, Tensor(t.shape));
  return out;
}

}  // namespace biomass::nn
