// Independent reference implementations the library is checked against.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "biomass/nn/loss.hpp"
#include "biomass/nn/network.hpp"

namespace oracle {

// Solves (X'X) b = X'y with an intercept column by Gaussian elimination with
// partial pivoting. Returns {intercept, coefficients...}.
inline std::vector<double> normal_equations(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols()) + 1;
  std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
  auto design = [&](int i, int j) { return j == 0 ? 1.0 : X(i, j - 1); };
  for (int r = 0; r < p; ++r) {
    for (int c = 0; c < p; ++c)
      for (int i = 0; i < n; ++i) a[r][c] += design(i, r) * design(i, c);
    for (int i = 0; i < n; ++i) a[r][p] += design(i, r) * y(i);
  }
  for (int col = 0; col < p; ++col) {
    int piv = col;
    for (int r = col + 1; r < p; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    for (int r = 0; r < p; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int c = col; c <= p; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<double> b(p);
  for (int r = 0; r < p; ++r) b[r] = a[r][p] / a[r][r];
  return b;
}

// sup |F_a - F_b| evaluated at every pooled breakpoint.
inline double ks_brute_force(std::vector<double> a, std::vector<double> b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  double d = 0.0;
  for (double t : pooled) {
    const double fa = static_cast<double>(std::count_if(a.begin(), a.end(), [&](double x) { return x <= t; })) /
                      static_cast<double>(a.size());
    const double fb = static_cast<double>(std::count_if(b.begin(), b.end(), [&](double x) { return x <= t; })) /
                      static_cast<double>(b.size());
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

// Batch-mean regression loss written out directly from its definition.
inline double regression_loss(biomass::nn::LossKind kind, biomass::nn::LossSpace space, std::span<const double> y,
                              std::span<const double> out) {
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double t = space == biomass::nn::LossSpace::Log ? std::log(y[i]) : y[i];
    const double e = t - out[i];
    switch (kind) {
      case biomass::nn::LossKind::L1: total += std::abs(e); break;
      case biomass::nn::LossKind::L2: total += e * e; break;
      case biomass::nn::LossKind::APE: total += std::abs(e) / std::abs(t); break;
      default: break;
    }
  }
  return total / static_cast<double>(y.size());
}

// Central finite differences of the batch loss with respect to every parameter.
inline biomass::nn::ParamMap numeric_gradient(const biomass::nn::Network& net,
                                              std::span<const biomass::nn::Input> inputs, std::span<const double> y,
                                              biomass::nn::LossKind kind, biomass::nn::LossSpace space,
                                              double h = 1e-5) {
  biomass::nn::Network probe = net;
  auto batch_loss = [&] {
    std::vector<double> out;
    for (const auto& in : inputs) out.push_back(probe.forward(in)(0));
    return regression_loss(kind, space, y, out);
  };
  biomass::nn::ParamMap grads = biomass::nn::zeros_like(net.params());
  for (auto& [name, t] : probe.params()) {
    for (Eigen::Index i = 0; i < t.data.size(); ++i) {
      const double w = t.data(i);
      t.data(i) = w + h;
      const double up = batch_loss();
      t.data(i) = w - h;
      const double down = batch_loss();
      t.data(i) = w;
      grads.at(name).data(i) = (up - down) / (2 * h);
    }
  }
  return grads;
}

}  // namespace oracle
