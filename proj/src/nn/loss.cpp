#include "biomass/nn/loss.hpp"

#include <cmath>

#include "biomass/error.hpp"

namespace biomass::nn {
namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

LossEval evaluate_loss(LossKind kind, LossSpace space, std::span<const Target> targets,
                       std::span<const Eigen::VectorXd> outputs) {
  if (targets.size() != outputs.size()) throw Error(ErrorCode::ShapeMismatch, "targets and outputs differ in count");
  if (targets.empty()) throw Error(ErrorCode::EmptyInput, "empty loss batch");
  const double n = static_cast<double>(targets.size());

  LossEval out;
  out.d_outputs.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& o = outputs[i];
    if (kind == LossKind::CrossEntropy) {
      const int label = targets[i].label;
      if (label < 0 || label >= o.size()) throw Error(ErrorCode::ShapeMismatch, "class label out of range");
      const double m = o.maxCoeff();
      const double lse = m + std::log((o.array() - m).exp().sum());
      out.value += (lse - o(label)) / n;
      Eigen::VectorXd d = softmax(o);
      d(label) -= 1.0;
      out.d_outputs.push_back(d / n);
      continue;
    }

    if (o.size() != 1) throw Error(ErrorCode::ShapeMismatch, "regression output must be scalar");
    double t = targets[i].mass;
    if (space == LossSpace::Log) {
      if (!(t > 0.0)) throw Error(ErrorCode::NonPositiveTargetInLogSpace, "target " + std::to_string(t));
      t = std::log(t);
    }
    const double r = o(0) - t;
    double value = 0.0, grad = 0.0;
    switch (kind) {
      case LossKind::L1:
        value = std::abs(r);
        grad = sign(r);
        break;
      case LossKind::L2:
        value = r * r;
        grad = 2.0 * r;
        break;
      case LossKind::APE:
        value = std::abs(r) / std::abs(t);
        grad = sign(r) / std::abs(t);
        break;
      case LossKind::CrossEntropy:
        break;
    }
    out.value += value / n;
    out.d_outputs.push_back(Eigen::VectorXd::Constant(1, grad / n));
  }
  if (!std::isfinite(out.value)) throw Error(ErrorCode::NonFiniteLoss, "loss is not finite");
  return out;
}

double loss(LossKind kind, LossSpace space, std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw Error(ErrorCode::ShapeMismatch, "y and yhat differ in length");
  std::vector<Target> targets;
  std::vector<Eigen::VectorXd> outputs;
  for (std::size_t i = 0; i < y.size(); ++i) {
    targets.push_back({y[i], -1});
    outputs.push_back(Eigen::VectorXd::Constant(1, yhat[i]));
  }
  return evaluate_loss(kind, space, targets, outputs).value;
}

}  // namespace biomass::nn
