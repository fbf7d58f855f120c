#include "biomass/nn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "biomass/error.hpp"
#include "biomass/features.hpp"
#include "biomass/linear.hpp"
#include "biomass/nn/augment.hpp"
#include "biomass/nn/optim.hpp"

namespace biomass::nn {
namespace {

std::vector<std::size_t> evenly_spaced(std::size_t count, int cap) {
  std::vector<std::size_t> out;
  if (cap <= 0 || count <= static_cast<std::size_t>(cap)) {
    out.resize(count);
    std::iota(out.begin(), out.end(), 0);
    return out;
  }
  if (cap == 1) return {count / 2};
  for (int i = 0; i < cap; ++i)
    out.push_back(static_cast<std::size_t>(std::llround(static_cast<double>(i) * (count - 1) / (cap - 1))));
  return out;
}

void check_raster(const SpecimenRecord& s, const Raster& r, int input_size) {
  if (r.height != input_size || r.width != input_size)
    throw Error(ErrorCode::ShapeMismatch, "specimen '" + s.specimen_id + "': raster " + std::to_string(r.height) + "x" +
                                              std::to_string(r.width) + ", model input " +
                                              std::to_string(input_size));
}

double loss_space_target(double mass, LossSpace space) { return space == LossSpace::Log ? std::log(mass) : mass; }

LossSpace loss_space_of(TargetSpace t) { return t == TargetSpace::Log ? LossSpace::Log : LossSpace::Linear; }

void check_train_config(const ModelConfig& m, const TrainConfig& t) {
  validate(t);
  if (m.task == Task::Classification) {
    if (t.loss != LossKind::CrossEntropy)
      throw Error(ErrorCode::InvalidConfig, "classification models train with cross_entropy");
  } else {
    if (t.loss == LossKind::CrossEntropy) throw Error(ErrorCode::InvalidConfig, "cross_entropy needs a classifier");
    if (t.space != loss_space_of(m.target_space))
      throw Error(ErrorCode::InvalidConfig, "loss space must match the model target space");
  }
}

Standardization fit_standardization(const std::vector<Sample>& samples, std::size_t width) {
  Standardization z;
  z.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width));
  z.scale = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(width));
  if (width == 0 || samples.empty()) return z;
  for (const auto& s : samples) z.mean += s.raw_metadata;
  z.mean /= static_cast<double>(samples.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(z.mean.size());
  for (const auto& s : samples) var += (s.raw_metadata - z.mean).cwiseAbs2();
  var /= static_cast<double>(samples.size());
  for (Eigen::Index i = 0; i < var.size(); ++i) z.scale(i) = var(i) > 0.0 ? std::sqrt(var(i)) : 1.0;
  return z;
}

std::vector<std::string> class_list(const Dataset& a, const Dataset& b) {
  std::set<std::string> s = a.taxon_set();
  for (const auto& t : b.taxon_set()) s.insert(t);
  return {s.begin(), s.end()};
}

void require_masses(const Dataset& d, const char* role) {
  for (const auto& s : d.specimens)
    if (!s.dry_mass_ug)
      throw Error(ErrorCode::NonPositiveMass, std::string(role) + " specimen '" + s.specimen_id + "' has no dry mass");
}

TrainedModel run_training(Network net, const std::vector<Sample>& train_samples,
                          const std::vector<Sample>& val_samples, const Standardization& z,
                          const TrainConfig& tc) {
  const LossSpace space = tc.space;
  std::vector<Input> val_inputs;
  std::vector<Target> val_targets;
  for (const auto& s : val_samples) {
    val_inputs.push_back(make_input(s, z));
    val_targets.push_back(s.target);
  }

  Rng shuffle_rng = make_rng(tc.seed, "shuffle");
  Rng augment_rng = make_rng(tc.seed, "augment");
  AdamWState state;
  AdamWOptions opt;
  opt.weight_decay = tc.weight_decay;

  const std::size_t n = train_samples.size();
  const std::size_t batch = static_cast<std::size_t>(tc.batch_size);
  const long steps_per_epoch = static_cast<long>((n + batch - 1) / batch);
  const long total_steps = steps_per_epoch * tc.epochs;

  TrainedModel out;
  out.config = net.config();
  out.train_config = tc;
  out.standardization = z;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(n);
  long step = 0;

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, shuffle_rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      std::vector<Input> inputs;
      std::vector<Target> targets;
      for (std::size_t i = start; i < end; ++i) {
        const Sample& s = train_samples[order[i]];
        Input in;
        for (const Raster* r : s.views) in.views.push_back(image_input(augment(*r, tc.augmentation, augment_rng)));
        if (s.raw_metadata.size() > 0) in.metadata = z.apply(s.raw_metadata);
        inputs.push_back(std::move(in));
        targets.push_back(s.target);
      }
      const auto g = backward(net, inputs, targets, tc.loss, space, tc.freeze);
      adamw_step(net.params(), g.grads, state, cosine_lr(step, total_steps, tc.lr_max, tc.lr_min), opt, tc.freeze);
      ++step;
    }

    std::vector<Eigen::VectorXd> outputs;
    outputs.reserve(val_inputs.size());
    for (const auto& in : val_inputs) outputs.push_back(net.forward(in));
    const double val_loss = evaluate_loss(tc.loss, space, val_targets, outputs).value;
    out.val_loss_history.push_back(val_loss);
    if (val_loss < best) {
      best = val_loss;
      out.best_epoch = epoch;
      out.parameters = net.params();
    }
  }
  return out;
}

}  // namespace

Eigen::VectorXd Standardization::apply(const Eigen::VectorXd& raw) const {
  if (raw.size() != mean.size()) throw Error(ErrorCode::ShapeMismatch, "metadata width differs from standardization");
  return (raw - mean).cwiseQuotient(scale);
}

Eigen::VectorXd image_input(const Raster& r) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(r.pixels.size()));
  for (std::size_t i = 0; i < r.pixels.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = (255.0 - r.pixels[i]) / 255.0;
  return v;
}

Input make_input(const Sample& s, const Standardization& z) {
  Input in;
  for (const Raster* r : s.views) in.views.push_back(image_input(*r));
  if (s.raw_metadata.size() > 0) in.metadata = z.apply(s.raw_metadata);
  return in;
}

std::vector<Sample> build_samples(const Dataset& d, const ModelConfig& config, int cap,
                                  const std::vector<std::string>& classes) {
  std::vector<Sample> out;
  for (std::size_t si = 0; si < d.specimens.size(); ++si) {
    const auto& s = d.specimens[si];
    if (s.rasters.size() != s.frames.size())
      throw Error(ErrorCode::ShapeMismatch, "specimen '" + s.specimen_id + "' has no rasters for its frames");

    Target target;
    if (config.task == Task::Classification) {
      auto it = std::find(classes.begin(), classes.end(), s.taxon);
      if (it != classes.end()) target.label = static_cast<int>(it - classes.begin());
    } else if (s.dry_mass_ug) {
      target.mass = *s.dry_mass_ug;
    }

    std::optional<SpecimenFeatures> feats;
    if (config.uses_metadata()) {
      feats = compute_features(s);
      for (auto m : config.metadata_inputs)
        if (m == MetaInput::SinkingSpeed && !feats->sinking_speed)
          throw Error(ErrorCode::MissingMetadata, "specimen '" + s.specimen_id + "' has no sinking speed");
    }
    auto metadata = [&](double frame_area) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(config.uses_metadata() ? config.metadata_inputs.size() : 0));
      for (Eigen::Index i = 0; i < v.size(); ++i) switch (config.metadata_inputs[static_cast<std::size_t>(i)]) {
          case MetaInput::FrameArea: v(i) = frame_area; break;
          case MetaInput::MeanArea: v(i) = feats->mean_area_px; break;
          case MetaInput::SinkingSpeed: v(i) = *feats->sinking_speed; break;
        }
      return v;
    };

    if (config.architecture == Architecture::MultiView) {
      const auto a = s.frame_indices_for(Camera::A);
      const auto b = s.frame_indices_for(Camera::B);
      if (a.empty() || b.empty())
        throw Error(ErrorCode::MissingSecondView, "specimen '" + s.specimen_id + "' lacks one camera");
      const std::size_t pairs = std::min(a.size(), b.size());
      for (std::size_t k : evenly_spaced(pairs, cap)) {
        const std::size_t ia = a[k * a.size() / pairs], ib = b[k * b.size() / pairs];
        check_raster(s, s.rasters[ia], config.input_size);
        check_raster(s, s.rasters[ib], config.input_size);
        out.push_back({{&s.rasters[ia], &s.rasters[ib]},
                       metadata(0.5 * (s.frames[ia].area_px + s.frames[ib].area_px)),
                       target,
                       si});
      }
    } else {
      for (std::size_t k : evenly_spaced(s.frames.size(), cap)) {
        check_raster(s, s.rasters[k], config.input_size);
        out.push_back({{&s.rasters[k]}, metadata(s.frames[k].area_px), target, si});
      }
    }
  }
  return out;
}

TrainedModel train(const Dataset& train_set, const Dataset& val_set, ModelConfig config, const TrainConfig& tc) {
  if (train_set.specimens.empty()) throw Error(ErrorCode::EmptySplit, "training split is empty");
  if (val_set.specimens.empty()) throw Error(ErrorCode::EmptySplit, "validation split is empty");
  std::vector<std::string> classes;
  if (config.task == Task::Classification) {
    classes = class_list(train_set, val_set);
    config.num_classes = static_cast<int>(classes.size());
  } else {
    require_masses(train_set, "training");
    require_masses(val_set, "validation");
  }
  validate(config);
  check_train_config(config, tc);

  const auto train_samples = build_samples(train_set, config, tc.max_images_per_specimen, classes);
  const auto val_samples = build_samples(val_set, config, tc.max_images_per_specimen, classes);
  const auto z =
      fit_standardization(train_samples, config.uses_metadata() ? config.metadata_inputs.size() : 0);

  Rng init_rng = make_rng(tc.seed, "init");
  Network net = Network::initialize(config, init_rng);
  if (config.task == Task::Regression) {
    // start the output at the mean training target
    double mean = 0.0;
    for (const auto& s : train_samples) mean += loss_space_target(s.target.mass, tc.space);
    mean /= static_cast<double>(train_samples.size());
    const std::string last = config.head == HeadKind::OneLayer ? "head.fc.bias" : "head.fc2.bias";
    net.params().at(last).data.setConstant(mean);
  }

  TrainedModel m = run_training(std::move(net), train_samples, val_samples, z, tc);
  m.classes = std::move(classes);
  return m;
}

TrainedModel fine_tune(const TrainedModel& base, const Dataset& train_set, const Dataset& val_set,
                       const TrainConfig& tc) {
  if (train_set.specimens.empty()) throw Error(ErrorCode::EmptySplit, "training split is empty");
  if (val_set.specimens.empty()) throw Error(ErrorCode::EmptySplit, "validation split is empty");
  check_train_config(base.config, tc);
  if (base.config.task == Task::Regression) {
    require_masses(train_set, "training");
    require_masses(val_set, "validation");
  }

  std::vector<Sample> train_samples, val_samples;
  try {
    train_samples = build_samples(train_set, base.config, tc.max_images_per_specimen, base.classes);
    val_samples = build_samples(val_set, base.config, tc.max_images_per_specimen, base.classes);
  } catch (const Error& e) {
    throw Error(ErrorCode::IncompatibleArchitecture, e.what());
  }
  if (base.config.task == Task::Classification)
    for (const auto* samples : {&train_samples, &val_samples})
      for (const auto& s : *samples)
        if (s.target.label < 0) throw Error(ErrorCode::IncompatibleArchitecture, "taxon unknown to the base classifier");

  TrainedModel m = run_training(base.network(), train_samples, val_samples, base.standardization, tc);
  m.classes = base.classes;
  return m;
}

std::vector<double> predict_per_image(const TrainedModel& m, const SpecimenRecord& specimen) {
  if (m.config.task != Task::Regression) throw Error(ErrorCode::ShapeMismatch, "model is a classifier");
  Dataset one;
  one.specimens.push_back(specimen);
  const Network net = m.network();
  std::vector<double> out;
  for (const auto& s : build_samples(one, m.config, 0)) {
    const double v = net.forward(make_input(s, m.standardization))(0);
    out.push_back(m.config.target_space == TargetSpace::Log ? std::exp(v) : std::max(v, kMassFloorUg));
  }
  return out;
}

double predict_specimen(const TrainedModel& m, const SpecimenRecord& specimen) {
  const auto v = predict_per_image(m, specimen);
  // exp underflow would break positivity
  return std::max(trimmed_median(v, m.train_config.trim_fraction), std::numeric_limits<double>::min());
}

PredictionSet predict_dataset(const TrainedModel& m, const Dataset& d) {
  PredictionSet out;
  for (const auto& s : d.specimens) {
    if (!s.dry_mass_ug) throw Error(ErrorCode::NonPositiveMass, "specimen '" + s.specimen_id + "' has no dry mass");
    out.entries.push_back({s.specimen_id, s.taxon, *s.dry_mass_ug, predict_specimen(m, s), std::nullopt});
  }
  return out;
}

Eigen::VectorXd classify_head(const TrainedModel& m, const Input& in) {
  if (m.config.task != Task::Classification) throw Error(ErrorCode::ShapeMismatch, "model is not a classifier");
  return softmax(m.network().forward(in));
}

Eigen::VectorXd classify_specimen(const TrainedModel& m, const SpecimenRecord& specimen) {
  if (m.config.task != Task::Classification) throw Error(ErrorCode::ShapeMismatch, "model is not a classifier");
  Dataset one;
  one.specimens.push_back(specimen);
  const Network net = m.network();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(m.config.num_classes);
  const auto samples = build_samples(one, m.config, 0, m.classes);
  for (const auto& s : samples) mean += softmax(net.forward(make_input(s, m.standardization)));
  return mean / static_cast<double>(samples.size());
}

std::string predict_taxon(const TrainedModel& m, const SpecimenRecord& specimen) {
  Eigen::Index best = 0;
  classify_specimen(m, specimen).maxCoeff(&best);
  return m.classes.at(static_cast<std::size_t>(best));
}

std::string to_json(const TrainedModel& m) {
  nlohmann::json j;
  j["kind"] = "neural";
  j["version"] = 1;
  j["model_config"] = m.config;
  j["train_config"] = m.train_config;
  j["best_epoch"] = m.best_epoch;
  j["val_loss_history"] = m.val_loss_history;
  j["classes"] = m.classes;
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  j["standardization"] = {{"mean", vec(m.standardization.mean)}, {"scale", vec(m.standardization.scale)}};
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, t] : m.parameters) params[name] = {{"shape", t.shape}, {"data", vec(t.data)}};
  j["parameters"] = std::move(params);
  return j.dump() + "\n";
}

TrainedModel trained_model_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("kind", "") != "neural") throw Error(ErrorCode::InvalidConfig, "not a neural checkpoint");
    if (j.value("version", 0) != 1) throw Error(ErrorCode::InvalidConfig, "unsupported checkpoint version");
    TrainedModel m;
    from_json(j.at("model_config"), m.config);
    from_json(j.at("train_config"), m.train_config);
    m.best_epoch = j.at("best_epoch").get<int>();
    m.val_loss_history = j.at("val_loss_history").get<std::vector<double>>();
    m.classes = j.at("classes").get<std::vector<std::string>>();
    auto vec = [](const std::vector<double>& v) {
      return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    m.standardization.mean = vec(j.at("standardization").at("mean").get<std::vector<double>>());
    m.standardization.scale = vec(j.at("standardization").at("scale").get<std::vector<double>>());
    for (const auto& [name, t] : j.at("parameters").items()) {
      Tensor tensor;
      tensor.shape = t.at("shape").get<std::vector<int>>();
      tensor.data = vec(t.at("data").get<std::vector<double>>());
      if (tensor.data.size() != Tensor::numel(tensor.shape))
        throw Error(ErrorCode::ShapeMismatch, "tensor '" + name + "' size");
      m.parameters.emplace(name, std::move(tensor));
    }
    Network check(m.config, m.parameters);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("checkpoint: ") + e.what());
  }
}

}  // namespace biomass::nn
