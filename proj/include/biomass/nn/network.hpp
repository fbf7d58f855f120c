#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "biomass/nn/config.hpp"
#include "biomass/nn/loss.hpp"
#include "biomass/nn/tensor.hpp"
#include "biomass/rng.hpp"

namespace biomass::nn {

/// One network input: one flattened (input_size x input_size) image per view,
/// plus the standardized metadata vector for metadata-aware models.
struct Input {
  std::vector<Eigen::VectorXd> views;
  Eigen::VectorXd metadata;
};

struct ConvBlockCache {
  int height = 0;
  int width = 0;
  RowMatrix cols;  // im2col of the block input
  RowMatrix pre;   // conv + bias, before ReLU
  std::vector<int> argmax;
  RowMatrix pooled;
};

struct ForwardCache {
  std::vector<std::vector<ConvBlockCache>> encoders;
  Eigen::VectorXd metadata_in;
  Eigen::VectorXd metadata_hidden_pre;
  Eigen::VectorXd head_in;
  Eigen::VectorXd head_hidden_pre;
};

/// Conv encoder(s) g, optional metadata encoder mu, projection head h.
class Network {
 public:
  Network(ModelConfig config, ParamMap params);

  /// He-uniform weights, zero biases.
  static Network initialize(const ModelConfig& config, Rng& rng);

  const ModelConfig& config() const { return config_; }
  const ParamMap& params() const { return params_; }
  ParamMap& params() { return params_; }

  Eigen::VectorXd encode_image(int view, const Eigen::VectorXd& image) const;
  Eigen::VectorXd encode_metadata(const Eigen::VectorXd& v) const;
  Eigen::VectorXd forward(const Input& in, ForwardCache* cache = nullptr) const;

  /// Adds d(loss)/d(params) for one sample into `grads`. Frozen parameters
  /// are skipped and keep whatever `grads` held.
  void accumulate_gradient(const ForwardCache& cache, const Eigen::VectorXd& d_output, ParamMap& grads,
                           Freeze freeze = Freeze::None) const;

  static bool is_frozen(const std::string& param_name, Freeze freeze);

 private:
  Eigen::VectorXd run_encoder(int view, const Eigen::VectorXd& image, std::vector<ConvBlockCache>* cache) const;

  ModelConfig config_;
  ParamMap params_;
};

struct BatchGradient {
  double loss = 0.0;
  ParamMap grads;
  std::vector<Eigen::VectorXd> outputs;
};

/// Batch-mean loss and its exact gradient; frozen parameters get zeros.
BatchGradient backward(const Network& net, std::span<const Input> inputs, std::span<const Target> targets,
                       LossKind kind, LossSpace space, Freeze freeze = Freeze::None);

}  // namespace biomass::nn
