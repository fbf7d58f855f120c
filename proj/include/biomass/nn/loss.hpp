#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "biomass/nn/config.hpp"

namespace biomass::nn {

struct Target {
  double mass = 0.0;  // regression, micrograms
  int label = -1;     // classification
};

struct LossEval {
  double value = 0.0;
  /// d(value)/d(output_i) for each sample.
  std::vector<Eigen::VectorXd> d_outputs;
};

/// Batch-mean loss. Regression outputs are scalars in the loss space: in Log
/// space targets become ln(mass) and outputs are taken as log-mass as-is.
/// Throws NonPositiveTargetInLogSpace, ShapeMismatch, EmptyInput.
LossEval evaluate_loss(LossKind kind, LossSpace space, std::span<const Target> targets,
                       std::span<const Eigen::VectorXd> outputs);

/// Scalar-output convenience for regression losses.
double loss(LossKind kind, LossSpace space, std::span<const double> y, std::span<const double> yhat);

/// Numerically stable softmax.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

}  // namespace biomass::nn
