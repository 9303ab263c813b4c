#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"
#include "slm/error.hpp"

namespace slm::lm {

enum class Backbone { UniversalTransformer, BiLstm };

inline std::string to_string(Backbone b) {
  return b == Backbone::UniversalTransformer ? "universal-transformer" : "bilstm";
}

inline Backbone parse_backbone(std::string_view name) {
  if (name == "universal-transformer" || name == "ut") return Backbone::UniversalTransformer;
  if (name == "bilstm") return Backbone::BiLstm;
  throw ValidationError("unknown backbone '" + std::string(name) + "'");
}

/// Architecture hyperparameters. `hidden` is the transition (feed-forward)
/// width and the attention width of the transformer; for the BiLSTM it is the
/// per-direction state size.
struct ModelConfig {
  std::size_t dim = 768;
  std::size_t hidden = 4 * 768;
  std::size_t heads = 8;
  std::size_t depth_steps = 4;
  Backbone backbone = Backbone::UniversalTransformer;
  std::uint64_t seed = 0;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline void validate(const ModelConfig& c) {
  if (c.dim == 0) throw ValidationError("model dim must be positive");
  if (c.hidden == 0) throw ValidationError("hidden size must be positive");
  if (c.heads == 0 || c.hidden % c.heads != 0) {
    throw ValidationError("hidden size " + std::to_string(c.hidden) +
                          " is not divisible by heads " + std::to_string(c.heads));
  }
  if (c.depth_steps == 0) throw ValidationError("depth_steps must be at least 1");
}

/// Convenience: the default hidden = 4 * dim.
inline ModelConfig default_config(std::size_t dim, Backbone backbone = Backbone::UniversalTransformer) {
  ModelConfig c;
  c.dim = dim;
  c.hidden = 4 * dim;
  c.heads = 8;
  while (c.hidden % c.heads != 0) c.heads /= 2;
  c.backbone = backbone;
  return c;
}

enum class ScheduleKind { Constant, InverseTime, Exponential };

struct LrSchedule {
  ScheduleKind kind = ScheduleKind::InverseTime;
  double decay = 0.01;

  // rate for a 0-based epoch
  double rate(double initial, std::size_t epoch) const {
    const auto e = static_cast<double>(epoch);
    switch (kind) {
      case ScheduleKind::Constant: return initial;
      case ScheduleKind::InverseTime: return initial / (1.0 + decay * e);
      case ScheduleKind::Exponential: return initial * std::pow(1.0 - decay, e);
    }
    return initial;
  }
};

inline std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::Constant: return "constant";
    case ScheduleKind::InverseTime: return "inverse-time";
    case ScheduleKind::Exponential: return "exponential";
  }
  return "constant";
}

inline ScheduleKind parse_schedule(std::string_view name) {
  if (name == "constant") return ScheduleKind::Constant;
  if (name == "inverse-time") return ScheduleKind::InverseTime;
  if (name == "exponential") return ScheduleKind::Exponential;
  throw ValidationError("unknown learning-rate schedule '" + std::string(name) + "'");
}

struct TrainingConfig {
  double learning_rate = 0.5;  // initial rate
  double l2 = 1e-5;            // coefficient on the sum of squared weights
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  LrSchedule schedule{};
  std::uint64_t seed = 0;  // batch order
};

inline void validate(const TrainingConfig& t) {
  if (!(t.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(t.l2 >= 0.0)) throw ValidationError("regularization must be non-negative");
  if (t.epochs == 0) throw ValidationError("epochs must be positive");
  if (t.batch_size == 0) throw ValidationError("batch size must be positive");
  if (t.schedule.decay < 0.0) throw ValidationError("schedule decay must be non-negative");
}

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"dim", c.dim},       {"hidden", c.hidden},
          {"heads", c.heads},   {"depth_steps", c.depth_steps},
          {"backbone", to_string(c.backbone)}, {"seed", c.seed}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig c = {}) {
  if (j.contains("dim")) c.dim = j["dim"].get<std::size_t>();
  if (j.contains("hidden")) c.hidden = j["hidden"].get<std::size_t>();
  else if (j.contains("dim")) c.hidden = 4 * c.dim;
  if (j.contains("heads")) c.heads = j["heads"].get<std::size_t>();
  if (j.contains("depth_steps")) c.depth_steps = j["depth_steps"].get<std::size_t>();
  if (j.contains("backbone")) c.backbone = parse_backbone(j["backbone"].get<std::string>());
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  return c;
}

inline nlohmann::json to_json(const TrainingConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"l2", t.l2},
          {"epochs", t.epochs},               {"batch_size", t.batch_size},
          {"schedule", to_string(t.schedule.kind)}, {"decay", t.schedule.decay},
          {"seed", t.seed}};
}

inline TrainingConfig training_config_from_json(const nlohmann::json& j, TrainingConfig t = {}) {
  if (j.contains("learning_rate")) t.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("l2")) t.l2 = j["l2"].get<double>();
  if (j.contains("epochs")) t.epochs = j["epochs"].get<std::size_t>();
  if (j.contains("batch_size")) t.batch_size = j["batch_size"].get<std::size_t>();
  if (j.contains("schedule")) t.schedule.kind = parse_schedule(j["schedule"].get<std::string>());
  if (j.contains("decay")) t.schedule.decay = j["decay"].get<double>();
  if (j.contains("seed")) t.seed = j["seed"].get<std::uint64_t>();
  return t;
}

}  // namespace slm::lm
