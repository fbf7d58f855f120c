#include "biomass/nn/config.hpp"

#include <nlohmann/json.hpp>

#include "biomass/error.hpp"

namespace biomass::nn {
namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::pair<const char*, Enum> (&table)[N], const char* what) {
  for (const auto& [name, value] : table)
    if (s == name) return value;
  throw Error(ErrorCode::InvalidConfig, std::string("unknown ") + what + " '" + std::string(s) + "'");
}

template <typename Enum, std::size_t N>
const char* enum_name(Enum e, const std::pair<const char*, Enum> (&table)[N]) {
  for (const auto& [name, value] : table)
    if (value == e) return name;
  return "?";
}

constexpr std::pair<const char*, Architecture> kArchitectures[] = {
    {"single_view", Architecture::SingleView},
    {"multi_view", Architecture::MultiView},
    {"metadata_aware", Architecture::MetadataAware}};
constexpr std::pair<const char*, HeadKind> kHeads[] = {{"one_layer", HeadKind::OneLayer},
                                                       {"two_layer", HeadKind::TwoLayer}};
constexpr std::pair<const char*, MetaInput> kMetaInputs[] = {{"frame_area", MetaInput::FrameArea},
                                                             {"mean_area", MetaInput::MeanArea},
                                                             {"sinking_speed", MetaInput::SinkingSpeed}};
constexpr std::pair<const char*, Task> kTasks[] = {{"regression", Task::Regression},
                                                   {"classification", Task::Classification}};
constexpr std::pair<const char*, LossKind> kLosses[] = {
    {"l1", LossKind::L1}, {"l2", LossKind::L2}, {"ape", LossKind::APE}, {"cross_entropy", LossKind::CrossEntropy}};
constexpr std::pair<const char*, LossSpace> kSpaces[] = {{"linear", LossSpace::Linear}, {"log", LossSpace::Log}};
constexpr std::pair<const char*, Augmentation> kAugmentations[] = {
    {"none", Augmentation::None},
    {"flips90", Augmentation::Flips90},
    {"continuous_rotation", Augmentation::ContinuousRotation},
    {"photometric_lite", Augmentation::PhotometricLite}};
constexpr std::pair<const char*, Freeze> kFreezes[] = {
    {"none", Freeze::None}, {"encoder", Freeze::Encoder}, {"encoder_metadata", Freeze::EncoderAndMetadata}};

}  // namespace

int ModelConfig::head_input_width() const {
  const int z = encoder_channels.empty() ? 0 : encoder_channels.back();
  return views() * z + (uses_metadata() ? metadata_width() : 0);
}

void validate(const ModelConfig& m) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (m.encoder_channels.empty()) fail("encoder needs at least one conv block");
  for (int c : m.encoder_channels)
    if (c < 1) fail("encoder channels must be positive");
  if (m.input_size < 1) fail("input_size must be positive");
  if (m.input_size % (1 << m.encoder_channels.size()) != 0)
    fail("input_size must be divisible by 2^blocks for the pooling stages");
  if (m.head == HeadKind::TwoLayer && m.head_hidden < 1) fail("head_hidden must be positive");
  if (m.architecture == Architecture::MetadataAware && m.metadata_inputs.empty())
    fail("metadata-aware model needs metadata inputs");
  if (m.uses_metadata() && m.metadata_width() < 1) fail("metadata_hidden must be positive");
  if (m.task == Task::Classification && m.num_classes < 2) fail("classification needs at least two classes");
}

void validate(const TrainConfig& t) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (t.epochs < 1) fail("epochs must be at least 1");
  if (t.batch_size < 1) fail("batch_size must be at least 1");
  if (!(t.lr_min >= 0.0) || !(t.lr_min <= t.lr_max)) fail("need 0 <= lr_min <= lr_max");
  if (!(t.weight_decay >= 0.0)) fail("weight_decay must be non-negative");
  if (t.max_images_per_specimen < 0) fail("max_images_per_specimen must be non-negative");
  if (!(t.trim_fraction >= 0.0 && t.trim_fraction < 0.5)) fail("trim_fraction must lie in [0, 0.5)");
}

const char* to_string(Architecture a) { return enum_name(a, kArchitectures); }
const char* to_string(HeadKind h) { return enum_name(h, kHeads); }
const char* to_string(MetaInput m) { return enum_name(m, kMetaInputs); }
const char* to_string(Task t) { return enum_name(t, kTasks); }
const char* to_string(LossKind l) { return enum_name(l, kLosses); }
const char* to_string(LossSpace s) { return enum_name(s, kSpaces); }
const char* to_string(Augmentation a) { return enum_name(a, kAugmentations); }
const char* to_string(Freeze f) { return enum_name(f, kFreezes); }

Architecture parse_architecture(std::string_view s) { return parse_enum(s, kArchitectures, "architecture"); }
HeadKind parse_head(std::string_view s) { return parse_enum(s, kHeads, "head"); }
MetaInput parse_meta_input(std::string_view s) { return parse_enum(s, kMetaInputs, "metadata input"); }
Task parse_task(std::string_view s) { return parse_enum(s, kTasks, "task"); }
LossKind parse_loss(std::string_view s) { return parse_enum(s, kLosses, "loss"); }
LossSpace parse_loss_space(std::string_view s) { return parse_enum(s, kSpaces, "loss space"); }
Augmentation parse_augmentation(std::string_view s) { return parse_enum(s, kAugmentations, "augmentation"); }
Freeze parse_freeze(std::string_view s) { return parse_enum(s, kFreezes, "freeze mode"); }

void to_json(nlohmann::json& j, const ModelConfig& c) {
  std::vector<std::string> inputs;
  for (auto m : c.metadata_inputs) inputs.emplace_back(to_string(m));
  j = {{"architecture", to_string(c.architecture)},
       {"task", to_string(c.task)},
       {"encoder_channels", c.encoder_channels},
       {"head", to_string(c.head)},
       {"head_hidden", c.head_hidden},
       {"metadata_inputs", inputs},
       {"metadata_hidden", c.metadata_hidden},
       {"target_space", biomass::to_string(c.target_space)},
       {"input_size", c.input_size},
       {"num_classes", c.num_classes}};
}

// Keys absent from `j` keep the values already in `c`.
void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (j.contains("architecture")) c.architecture = parse_architecture(j["architecture"].get<std::string>());
  if (j.contains("task")) c.task = parse_task(j["task"].get<std::string>());
  if (j.contains("encoder_channels")) c.encoder_channels = j["encoder_channels"].get<std::vector<int>>();
  if (j.contains("head")) c.head = parse_head(j["head"].get<std::string>());
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  if (j.contains("metadata_inputs")) {
    c.metadata_inputs.clear();
    for (const auto& s : j["metadata_inputs"]) c.metadata_inputs.push_back(parse_meta_input(s.get<std::string>()));
  }
  c.metadata_hidden = j.value("metadata_hidden", c.metadata_hidden);
  if (j.contains("target_space")) c.target_space = parse_target_space(j["target_space"].get<std::string>());
  c.input_size = j.value("input_size", c.input_size);
  c.num_classes = j.value("num_classes", c.num_classes);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"loss", to_string(c.loss)},
       {"space", to_string(c.space)},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"lr_max", c.lr_max},
       {"lr_min", c.lr_min},
       {"weight_decay", c.weight_decay},
       {"seed", c.seed},
       {"augmentation", to_string(c.augmentation)},
       {"freeze", to_string(c.freeze)},
       {"max_images_per_specimen", c.max_images_per_specimen},
       {"trim_fraction", c.trim_fraction}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (j.contains("loss")) c.loss = parse_loss(j["loss"].get<std::string>());
  if (j.contains("space")) c.space = parse_loss_space(j["space"].get<std::string>());
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr_max = j.value("lr_max", c.lr_max);
  c.lr_min = j.value("lr_min", c.lr_min);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.seed = j.value("seed", c.seed);
  if (j.contains("augmentation")) c.augmentation = parse_augmentation(j["augmentation"].get<std::string>());
  if (j.contains("freeze")) c.freeze = parse_freeze(j["freeze"].get<std::string>());
  c.max_images_per_specimen = j.value("max_images_per_specimen", c.max_images_per_specimen);
  c.trim_fraction = j.value("trim_fraction", c.trim_fraction);
}

}  // namespace biomass::nn
