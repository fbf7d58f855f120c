#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "biomass/data_model.hpp"
#include "biomass/nn/config.hpp"
#include "biomass/nn/network.hpp"

namespace biomass::nn {

/// z-score parameters for the metadata inputs, fitted on the training split.
struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  Eigen::VectorXd apply(const Eigen::VectorXd& raw) const;
};

struct TrainedModel {
  ModelConfig config;
  TrainConfig train_config;
  /// Parameters of the epoch with the lowest validation loss.
  ParamMap parameters;
  int best_epoch = 0;  // 1-based
  std::vector<double> val_loss_history;
  Standardization standardization;
  std::vector<std::string> classes;

  Network network() const { return Network(config, parameters); }
};

/// One training/inference sample: the raster(s) of one frame (or one A/B
/// frame pair), its raw metadata and the specimen target.
struct Sample {
  std::vector<const Raster*> views;
  Eigen::VectorXd raw_metadata;
  Target target;
  std::size_t specimen = 0;
};

/// Samples for every specimen of `d`; `cap` > 0 keeps that many evenly spaced
/// frames per specimen. Throws MissingSecondView, MissingMetadata, ShapeMismatch.
std::vector<Sample> build_samples(const Dataset& d, const ModelConfig& config, int cap,
                                  const std::vector<std::string>& classes = {});

/// Raster -> network input: inverted intensity in [0, 1], so silhouettes are bright.
Eigen::VectorXd image_input(const Raster& r);

Input make_input(const Sample& s, const Standardization& z);

/// Throws EmptySplit, InvalidConfig, and data errors from build_samples.
TrainedModel train(const Dataset& train_set, const Dataset& val_set, ModelConfig model_config,
                   const TrainConfig& train_config);

/// Continues training from `base` with `train_config.freeze` honoured.
/// Throws IncompatibleArchitecture when the data lacks the base model's modality.
TrainedModel fine_tune(const TrainedModel& base, const Dataset& train_set, const Dataset& val_set,
                       const TrainConfig& train_config);

/// Per-image mass predictions (exponentiated for log targets, floored for raw).
std::vector<double> predict_per_image(const TrainedModel& m, const SpecimenRecord& specimen);
double predict_specimen(const TrainedModel& m, const SpecimenRecord& specimen);
PredictionSet predict_dataset(const TrainedModel& m, const Dataset& d);

/// Class probabilities for one input of a classification model.
Eigen::VectorXd classify_head(const TrainedModel& m, const Input& in);
/// Mean per-image class probabilities of a specimen.
Eigen::VectorXd classify_specimen(const TrainedModel& m, const SpecimenRecord& specimen);
std::string predict_taxon(const TrainedModel& m, const SpecimenRecord& specimen);

std::string to_json(const TrainedModel& m);
TrainedModel trained_model_from_json(std::string_view text);

}  // namespace biomass::nn
