#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "biomass/linear.hpp"

namespace biomass::nn {

enum class Architecture { SingleView, MultiView, MetadataAware };
enum class HeadKind { OneLayer, TwoLayer };
enum class MetaInput { FrameArea, MeanArea, SinkingSpeed };
enum class Task { Regression, Classification };

enum class LossKind { L1, L2, APE, CrossEntropy };
enum class LossSpace { Linear, Log };
enum class Augmentation { None, Flips90, ContinuousRotation, PhotometricLite };
enum class Freeze { None, Encoder, EncoderAndMetadata };

struct ModelConfig {
  Architecture architecture = Architecture::SingleView;
  Task task = Task::Regression;
  /// One 3x3 conv + ReLU + 2x2 max-pool block per entry, then global average pooling.
  std::vector<int> encoder_channels = {8, 16};
  HeadKind head = HeadKind::TwoLayer;
  int head_hidden = 64;
  std::vector<MetaInput> metadata_inputs;
  /// 0 selects twice the number of metadata inputs.
  int metadata_hidden = 0;
  TargetSpace target_space = TargetSpace::Log;
  int input_size = 32;
  /// Output width for classification; set by the trainer from the class list.
  int num_classes = 0;

  int views() const { return architecture == Architecture::MultiView ? 2 : 1; }
  bool uses_metadata() const { return architecture == Architecture::MetadataAware; }
  int metadata_width() const {
    return metadata_hidden > 0 ? metadata_hidden : 2 * static_cast<int>(metadata_inputs.size());
  }
  int output_width() const { return task == Task::Classification ? num_classes : 1; }
  /// Width of concat(z_1[, z_2][, z_v]) fed to the projection head.
  int head_input_width() const;
};

struct TrainConfig {
  LossKind loss = LossKind::L1;
  LossSpace space = LossSpace::Log;
  int epochs = 50;
  int batch_size = 32;
  double lr_max = 3e-3;
  double lr_min = 1e-5;
  double weight_decay = 1e-2;
  std::uint64_t seed = 0;
  Augmentation augmentation = Augmentation::Flips90;
  Freeze freeze = Freeze::None;
  /// Evenly spaced training images kept per specimen; 0 keeps all.
  int max_images_per_specimen = 8;
  double trim_fraction = 0.05;
};

/// Throws InvalidConfig on violated invariants.
void validate(const ModelConfig& m);
void validate(const TrainConfig& t);

const char* to_string(Architecture a);
const char* to_string(HeadKind h);
const char* to_string(MetaInput m);
const char* to_string(Task t);
const char* to_string(LossKind l);
const char* to_string(LossSpace s);
const char* to_string(Augmentation a);
const char* to_string(Freeze f);

Architecture parse_architecture(std::string_view s);
HeadKind parse_head(std::string_view s);
MetaInput parse_meta_input(std::string_view s);
Task parse_task(std::string_view s);
LossKind parse_loss(std::string_view s);
LossSpace parse_loss_space(std::string_view s);
Augmentation parse_augmentation(std::string_view s);
Freeze parse_freeze(std::string_view s);

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace biomass::nn
