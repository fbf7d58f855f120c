#include "biomass/nn/network.hpp"

#include <cmath>

#include "biomass/error.hpp"

namespace biomass::nn {
namespace {

std::string conv_name(int view, std::size_t block, const char* what) {
  return "encoder" + std::to_string(view) + ".block" + std::to_string(block) + "." + what;
}

// 3x3, stride 1, zero padding 1; row index = channel*9 + ky*3 + kx.
RowMatrix im2col(const RowMatrix& in, int h, int w) {
  const auto channels = in.rows();
  RowMatrix cols = RowMatrix::Zero(channels * 9, static_cast<Eigen::Index>(h) * w);
  for (Eigen::Index c = 0; c < channels; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        double* dst = cols.row(c * 9 + ky * 3 + kx).data();
        const double* src = in.row(c).data();
        for (int y = 0; y < h; ++y) {
          const int iy = y + ky - 1;
          if (iy < 0 || iy >= h) continue;
          for (int x = 0; x < w; ++x) {
            const int ix = x + kx - 1;
            if (ix >= 0 && ix < w) dst[y * w + x] = src[iy * w + ix];
          }
        }
      }
  return cols;
}

RowMatrix col2im(const RowMatrix& cols, Eigen::Index channels, int h, int w) {
  RowMatrix out = RowMatrix::Zero(channels, static_cast<Eigen::Index>(h) * w);
  for (Eigen::Index c = 0; c < channels; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const double* src = cols.row(c * 9 + ky * 3 + kx).data();
        double* dst = out.row(c).data();
        for (int y = 0; y < h; ++y) {
          const int iy = y + ky - 1;
          if (iy < 0 || iy >= h) continue;
          for (int x = 0; x < w; ++x) {
            const int ix = x + kx - 1;
            if (ix >= 0 && ix < w) dst[iy * w + ix] += src[y * w + x];
          }
        }
      }
  return out;
}

void add_linear(ParamMap& p, const std::string& prefix, int out, int in, Rng& rng) {
  Tensor weight({out, in});
  const double bound = std::sqrt(6.0 / in);
  for (Eigen::Index i = 0; i < weight.data.size(); ++i) weight.data(i) = uniform(rng, -bound, bound);
  p.emplace(prefix + ".weight", std::move(weight));
  p.emplace(prefix + ".bias", Tensor({out}));
}

const Tensor& param(const ParamMap& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw Error(ErrorCode::ShapeMismatch, "missing parameter '" + name + "'");
  return it->second;
}

Eigen::VectorXd affine(const ParamMap& p, const std::string& prefix, const Eigen::VectorXd& x) {
  const auto& w = param(p, prefix + ".weight");
  const auto& b = param(p, prefix + ".bias");
  if (w.matrix().cols() != x.size())
    throw Error(ErrorCode::ShapeMismatch, prefix + " expects width " + std::to_string(w.matrix().cols()) + ", got " +
                                              std::to_string(x.size()));
  return w.matrix() * x + b.data;
}

// Accumulates weight/bias grads of y = W x + b and returns dL/dx.
Eigen::VectorXd affine_backward(const ParamMap& p, const std::string& prefix, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& dy, ParamMap& grads, bool frozen) {
  if (!frozen) {
    grads.at(prefix + ".weight").matrix().noalias() += dy * x.transpose();
    grads.at(prefix + ".bias").data += dy;
  }
  return param(p, prefix + ".weight").matrix().transpose() * dy;
}

Eigen::VectorXd relu(const Eigen::VectorXd& x) { return x.cwiseMax(0.0); }

Eigen::VectorXd relu_mask(const Eigen::VectorXd& pre, const Eigen::VectorXd& d) {
  return (pre.array() > 0.0).select(d, 0.0);
}


}  // namespace

Network::Network(ModelConfig config, ParamMap params) : config_(std::move(config)), params_(std::move(params)) {
  validate(config_);
}

Network Network::initialize(const ModelConfig& config, Rng& rng) {
  validate(config);
  ParamMap p;
  for (int v = 0; v < config.views(); ++v) {
    int in = 1;
    for (std::size_t b = 0; b < config.encoder_channels.size(); ++b) {
      const int out = config.encoder_channels[b];
      Tensor weight({out, in, 3, 3});
      const double bound = std::sqrt(6.0 / (in * 9));
      for (Eigen::Index i = 0; i < weight.data.size(); ++i) weight.data(i) = uniform(rng, -bound, bound);
      p.emplace(conv_name(v, b, "weight"), std::move(weight));
      p.emplace(conv_name(v, b, "bias"), Tensor({out}));
      in = out;
    }
  }
  if (config.uses_metadata()) {
    const int m = static_cast<int>(config.metadata_inputs.size());
    const int hidden = config.metadata_width();
    add_linear(p, "metadata.fc1", hidden, m, rng);
    add_linear(p, "metadata.fc2", hidden, hidden, rng);
  }
  const int f = config.head_input_width();
  if (config.head == HeadKind::OneLayer) {
    add_linear(p, "head.fc", config.output_width(), f, rng);
  } else {
    add_linear(p, "head.fc1", config.head_hidden, f, rng);
    add_linear(p, "head.fc2", config.output_width(), config.head_hidden, rng);
  }
  return Network(config, std::move(p));
}

bool Network::is_frozen(const std::string& name, Freeze freeze) {
  switch (freeze) {
    case Freeze::None: return false;
    case Freeze::Encoder: return name.starts_with("encoder");
    case Freeze::EncoderAndMetadata: return name.starts_with("encoder") || name.starts_with("metadata");
  }
  return false;
}

Eigen::VectorXd Network::run_encoder(int view, const Eigen::VectorXd& image, std::vector<ConvBlockCache>* cache) const {
  const int s = config_.input_size;
  if (image.size() != static_cast<Eigen::Index>(s) * s)
    throw Error(ErrorCode::ShapeMismatch, "image has " + std::to_string(image.size()) + " pixels, expected " +
                                              std::to_string(s) + "x" + std::to_string(s));
  RowMatrix act = Eigen::Map<const RowMatrix>(image.data(), 1, image.size());
  int h = s, w = s;
  if (cache) cache->clear();
  for (std::size_t b = 0; b < config_.encoder_channels.size(); ++b) {
    const auto& weight = param(params_, conv_name(view, b, "weight"));
    const auto& bias = param(params_, conv_name(view, b, "bias"));
    const auto out_c = static_cast<Eigen::Index>(weight.shape[0]);

    ConvBlockCache blk;
    blk.height = h;
    blk.width = w;
    blk.cols = im2col(act, h, w);
    blk.pre.noalias() = weight.matrix() * blk.cols;
    blk.pre.colwise() += bias.data;

    const int ph = h / 2, pw = w / 2;
    blk.pooled.resize(out_c, static_cast<Eigen::Index>(ph) * pw);
    blk.argmax.resize(static_cast<std::size_t>(out_c * ph * pw));
    for (Eigen::Index c = 0; c < out_c; ++c) {
      const double* pre = blk.pre.row(c).data();
      for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x) {
          int best = (2 * y) * w + 2 * x;
          double best_v = std::max(pre[best], 0.0);
          for (int k = 1; k < 4; ++k) {
            const int idx = (2 * y + k / 2) * w + 2 * x + k % 2;
            const double v = std::max(pre[idx], 0.0);
            if (v > best_v) {
              best_v = v;
              best = idx;
            }
          }
          blk.pooled(c, y * pw + x) = best_v;
          blk.argmax[static_cast<std::size_t>(c * ph * pw + y * pw + x)] = best;
        }
    }
    act = blk.pooled;
    h = ph;
    w = pw;
    if (cache) cache->push_back(std::move(blk));
  }
  return act.rowwise().mean();
}

Eigen::VectorXd Network::encode_image(int view, const Eigen::VectorXd& image) const {
  if (view < 0 || view >= config_.views()) throw Error(ErrorCode::ShapeMismatch, "no encoder for view");
  return run_encoder(view, image, nullptr);
}

Eigen::VectorXd Network::encode_metadata(const Eigen::VectorXd& v) const {
  if (!config_.uses_metadata()) throw Error(ErrorCode::ShapeMismatch, "model has no metadata encoder");
  if (v.size() != static_cast<Eigen::Index>(config_.metadata_inputs.size()))
    throw Error(ErrorCode::ShapeMismatch, "metadata vector has " + std::to_string(v.size()) + " entries, expected " +
                                              std::to_string(config_.metadata_inputs.size()));
  return affine(params_, "metadata.fc2", relu(affine(params_, "metadata.fc1", v)));
}

Eigen::VectorXd Network::forward(const Input& in, ForwardCache* cache) const {
  const int views = config_.views();
  if (static_cast<int>(in.views.size()) < views) {
    if (views == 2) throw Error(ErrorCode::MissingSecondView, "multi-view model needs two images");
    throw Error(ErrorCode::ShapeMismatch, "no image input");
  }
  if (static_cast<int>(in.views.size()) > views) throw Error(ErrorCode::ShapeMismatch, "too many image inputs");

  std::vector<Eigen::VectorXd> parts;
  if (cache) cache->encoders.assign(static_cast<std::size_t>(views), {});
  for (int v = 0; v < views; ++v)
    parts.push_back(run_encoder(v, in.views[static_cast<std::size_t>(v)],
                                cache ? &cache->encoders[static_cast<std::size_t>(v)] : nullptr));

  if (config_.uses_metadata()) {
    if (in.metadata.size() == 0) throw Error(ErrorCode::MissingMetadata, "metadata-aware model needs metadata");
    if (in.metadata.size() != static_cast<Eigen::Index>(config_.metadata_inputs.size()))
      throw Error(ErrorCode::ShapeMismatch, "metadata width");
    Eigen::VectorXd hidden_pre = affine(params_, "metadata.fc1", in.metadata);
    parts.push_back(affine(params_, "metadata.fc2", relu(hidden_pre)));
    if (cache) {
      cache->metadata_in = in.metadata;
      cache->metadata_hidden_pre = std::move(hidden_pre);
    }
  }

  Eigen::Index width = 0;
  for (const auto& p : parts) width += p.size();
  Eigen::VectorXd head_in(width);
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    head_in.segment(offset, p.size()) = p;
    offset += p.size();
  }

  Eigen::VectorXd out;
  if (config_.head == HeadKind::OneLayer) {
    out = affine(params_, "head.fc", head_in);
  } else {
    Eigen::VectorXd hidden_pre = affine(params_, "head.fc1", head_in);
    out = affine(params_, "head.fc2", relu(hidden_pre));
    if (cache) cache->head_hidden_pre = std::move(hidden_pre);
  }
  if (cache) cache->head_in = std::move(head_in);
  return out;
}

void Network::accumulate_gradient(const ForwardCache& cache, const Eigen::VectorXd& d_output, ParamMap& grads,
                                  Freeze freeze) const {
  auto frozen = [&](const std::string& prefix) { return is_frozen(prefix, freeze); };

  Eigen::VectorXd d_head_in;
  if (config_.head == HeadKind::OneLayer) {
    d_head_in = affine_backward(params_, "head.fc", cache.head_in, d_output, grads, frozen("head.fc"));
  } else {
    const Eigen::VectorXd hidden = relu(cache.head_hidden_pre);
    const Eigen::VectorXd d_hidden = affine_backward(params_, "head.fc2", hidden, d_output, grads, frozen("head.fc2"));
    d_head_in = affine_backward(params_, "head.fc1", cache.head_in, relu_mask(cache.head_hidden_pre, d_hidden), grads,
                                frozen("head.fc1"));
  }

  const Eigen::Index z = config_.encoder_channels.back();
  if (config_.uses_metadata() && !frozen("metadata")) {
    const Eigen::VectorXd d_zv = d_head_in.tail(config_.metadata_width());
    const Eigen::VectorXd hidden = relu(cache.metadata_hidden_pre);
    const Eigen::VectorXd d_hidden = affine_backward(params_, "metadata.fc2", hidden, d_zv, grads, false);
    affine_backward(params_, "metadata.fc1", cache.metadata_in, relu_mask(cache.metadata_hidden_pre, d_hidden), grads,
                    false);
  }

  if (frozen("encoder")) return;
  for (int v = 0; v < config_.views(); ++v) {
    const auto& blocks = cache.encoders.at(static_cast<std::size_t>(v));
    const Eigen::VectorXd dz = d_head_in.segment(v * z, z);

    // global average pooling
    const auto& last = blocks.back();
    RowMatrix d_pooled = dz.replicate(1, last.pooled.cols()) / static_cast<double>(last.pooled.cols());

    for (std::size_t b = blocks.size(); b-- > 0;) {
      const auto& blk = blocks[b];
      const auto& weight = param(params_, conv_name(v, b, "weight"));
      RowMatrix d_pre = RowMatrix::Zero(blk.pre.rows(), blk.pre.cols());
      const Eigen::Index pooled_cols = blk.pooled.cols();
      for (Eigen::Index c = 0; c < blk.pre.rows(); ++c)
        for (Eigen::Index k = 0; k < pooled_cols; ++k) {
          const int idx = blk.argmax[static_cast<std::size_t>(c * pooled_cols + k)];
          if (blk.pre(c, idx) > 0.0) d_pre(c, idx) += d_pooled(c, k);
        }
      grads.at(conv_name(v, b, "weight")).matrix().noalias() += d_pre * blk.cols.transpose();
      grads.at(conv_name(v, b, "bias")).data += d_pre.rowwise().sum();
      if (b == 0) break;
      const RowMatrix d_cols = weight.matrix().transpose() * d_pre;
      d_pooled = col2im(d_cols, blk.cols.rows() / 9, blk.height, blk.width);
    }
  }
}

BatchGradient backward(const Network& net, std::span<const Input> inputs, std::span<const Target> targets,
                       LossKind kind, LossSpace space, Freeze freeze) {
  BatchGradient out;
  std::vector<ForwardCache> caches(inputs.size());
  out.outputs.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) out.outputs.push_back(net.forward(inputs[i], &caches[i]));
  const LossEval loss = evaluate_loss(kind, space, targets, out.outputs);
  out.loss = loss.value;
  out.grads = zeros_like(net.params());
  for (std::size_t i = 0; i < inputs.size(); ++i)
    net.accumulate_gradient(caches[i], loss.d_outputs[i], out.grads, freeze);
  return out;
}

}  // namespace biomass::nn
