#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "slm/error.hpp"
#include "slm/lm/config.hpp"
#include "slm/lm/params.hpp"
#include "slm/meta.hpp"

namespace slm::lm {

inline constexpr std::string_view kCheckpointFormat = "slm-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  TrainingConfig training{};
  std::size_t epochs_completed = 0;
  std::vector<double> loss_trace;
};

inline std::string to_string(TensorKind k) {
  switch (k) {
    case TensorKind::Weight: return "weight";
    case TensorKind::Bias: return "bias";
    case TensorKind::Gain: return "gain";
  }
  return "weight";
}

inline TensorKind parse_tensor_kind(const std::string& s) {
  if (s == "weight") return TensorKind::Weight;
  if (s == "bias") return TensorKind::Bias;
  if (s == "gain") return TensorKind::Gain;
  throw ValidationError("unknown tensor kind '" + s + "'");
}

// Tensor data is stored row-major; doubles use shortest round-trip text.
inline nlohmann::json to_json(const Checkpoint& c) {
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto& [name, t] : c.params.tensors) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(t.value.size()));
    for (Eigen::Index r = 0; r < t.value.rows(); ++r)
      for (Eigen::Index col = 0; col < t.value.cols(); ++col) data.push_back(t.value(r, col));
    tensors[name] = {{"kind", to_string(t.kind)},
                     {"rows", t.value.rows()},
                     {"cols", t.value.cols()},
                     {"data", std::move(data)}};
  }
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"tool_version", kToolVersion},
          {"model", to_json(c.params.config)},
          {"training", to_json(c.training)},
          {"epochs_completed", c.epochs_completed},
          {"loss_trace", c.loss_trace},
          {"tensors", std::move(tensors)}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != kCheckpointFormat) throw ValidationError("not an slm checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint version");
  }
  Checkpoint c;
  c.params.config = model_config_from_json(j.at("model"));
  validate(c.params.config);
  c.training = training_config_from_json(j.at("training"));
  c.epochs_completed = j.at("epochs_completed").get<std::size_t>();
  c.loss_trace = j.at("loss_trace").get<std::vector<double>>();
  const auto& tensors = j.at("tensors");
  for (const auto& spec : tensor_specs(c.params.config)) {
    if (!tensors.contains(spec.name)) throw ValidationError("checkpoint lacks tensor '" + spec.name + "'");
    const auto& t = tensors[spec.name];
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    const auto data = t.at("data").get<std::vector<double>>();
    if (rows != spec.rows || cols != spec.cols ||
        data.size() != static_cast<std::size_t>(rows * cols)) {
      throw ValidationError("tensor '" + spec.name + "' has the wrong shape");
    }
    Tensor tensor{Matrix(rows, cols), parse_tensor_kind(t.at("kind").get<std::string>())};
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index col = 0; col < cols; ++col)
        tensor.value(r, col) = data[static_cast<std::size_t>(r * cols + col)];
    if (!tensor.value.allFinite()) throw ValidationError("tensor '" + spec.name + "' is not finite");
    c.params.tensors.emplace(spec.name, std::move(tensor));
  }
  if (tensors.size() != c.params.tensors.size()) {
    throw ValidationError("checkpoint has tensors the configured backbone does not use");
  }
  return c;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c,
                            const std::optional<nlohmann::json>& meta = std::nullopt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  auto j = to_json(c);
  if (meta) j["_meta"] = metadata_record(*meta)["_meta"];
  out << j.dump() << '\n';
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint '" + path + "': " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace slm::lm
