#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "slm/corpus.hpp"
#include "slm/embedding_io.hpp"
#include "slm/language_model.hpp"
#include "slm/pipeline.hpp"

namespace slm::ablation {

// Backbone column values. The two language models are trained per encoder;
// "gold-oracle" uses c_i = e_{gold successor}; the last two are the
// training-free baseline scorers.
inline constexpr const char* kBackbones[] = {"universal-transformer", "bilstm", "gold-oracle",
                                             "ngram-overlap", "cbow-cosine"};

struct EncoderSpec {
  std::string name;
  std::string embeddings;  // path to an embedding JSONL file
};

struct Grid {
  std::vector<EncoderSpec> encoders;
  std::vector<std::string> backbones{"universal-transformer", "bilstm"};
  std::vector<search::Strategy> searches{search::Strategy::BruteForce,
                                         search::Strategy::NearestNeighbor};
  nlohmann::json model = nlohmann::json::object();  // overrides; dim comes from the file
  lm::TrainingConfig training{};
  corpus::SplitSpec split{};
  std::string evaluate_on = "test";  // "test", "validation", "train" or "all"
  std::uint64_t seed = 0;
  std::size_t brute_force_cap = search::kDefaultBruteForceCap;
};

struct CellResult {
  std::string encoder, backbone, search;
  std::string status = "ok";  // ok | error | dominance-violation
  std::size_t stories = 0;
  double tau = std::numeric_limits<double>::quiet_NaN();
  double pmr = std::numeric_limits<double>::quiet_NaN();
  double pairwise_ratio = std::numeric_limits<double>::quiet_NaN();
  std::size_t dominance_violations = 0;
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

inline bool known_backbone(const std::string& name) {
  for (const char* b : kBackbones)
    if (name == b) return true;
  return name == "ut";
}

inline void validate(const Grid& g) {
  if (g.encoders.empty()) throw ValidationError("grid has no encoders");
  if (g.backbones.empty()) throw ValidationError("grid has no backbones");
  if (g.searches.empty()) throw ValidationError("grid has no searches");
  for (const auto& b : g.backbones)
    if (!known_backbone(b)) throw ValidationError("unknown grid backbone '" + b + "'");
  if (g.evaluate_on != "test" && g.evaluate_on != "validation" && g.evaluate_on != "train" &&
      g.evaluate_on != "all") {
    throw ValidationError("evaluate_on must be test, validation, train or all");
  }
  lm::validate(g.training);
  corpus::validate(g.split);
}

inline corpus::SplitSpec split_from_json(const nlohmann::json& j, corpus::SplitSpec s = {}) {
  auto fraction = [](const nlohmann::json& v) {
    return v.is_string() ? corpus::parse_fraction(v.get<std::string>())
                         : corpus::parse_fraction(v.dump());
  };
  if (j.contains("train")) s.train = fraction(j["train"]);
  if (j.contains("validation")) s.validation = fraction(j["validation"]);
  if (j.contains("test")) s.test = fraction(j["test"]);
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  return s;
}

inline nlohmann::json to_json(const corpus::SplitSpec& s) {
  auto text = [](corpus::Fraction f) {
    return std::to_string(f.num) + "/" + std::to_string(f.den);
  };
  return {{"train", text(s.train)},
          {"validation", text(s.validation)},
          {"test", text(s.test)},
          {"seed", s.seed}};
}

/// Reads a grid description. Relative embedding paths resolve against `base_dir`.
inline Grid grid_from_json(const nlohmann::json& j, const std::string& base_dir = "") {
  Grid g;
  for (const auto& e : j.at("encoders")) {
    EncoderSpec spec{e.at("name").get<std::string>(), e.at("embeddings").get<std::string>()};
    if (!base_dir.empty() && !spec.embeddings.empty() && spec.embeddings.front() != '/') {
      spec.embeddings = base_dir + "/" + spec.embeddings;
    }
    g.encoders.push_back(std::move(spec));
  }
  if (j.contains("backbones")) g.backbones = j["backbones"].get<std::vector<std::string>>();
  if (j.contains("searches")) {
    g.searches.clear();
    for (const auto& s : j["searches"]) g.searches.push_back(search::parse_strategy(s.get<std::string>()));
  }
  if (j.contains("model")) g.model = j["model"];
  if (j.contains("training")) g.training = lm::training_config_from_json(j["training"]);
  if (j.contains("split")) g.split = split_from_json(j["split"]);
  if (j.contains("evaluate_on")) g.evaluate_on = j["evaluate_on"].get<std::string>();
  if (j.contains("seed")) g.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("brute_force_cap")) g.brute_force_cap = j["brute_force_cap"].get<std::size_t>();
  validate(g);
  return g;
}

inline nlohmann::json to_json(const Grid& g) {
  nlohmann::json enc = nlohmann::json::array();
  for (const auto& e : g.encoders) enc.push_back({{"name", e.name}, {"embeddings", e.embeddings}});
  nlohmann::json searches = nlohmann::json::array();
  for (auto s : g.searches) searches.push_back(search::to_string(s));
  return {{"encoders", enc},           {"backbones", g.backbones},
          {"searches", searches},      {"model", g.model},
          {"training", lm::to_json(g.training)}, {"split", to_json(g.split)},
          {"evaluate_on", g.evaluate_on}, {"seed", g.seed},
          {"brute_force_cap", g.brute_force_cap}};
}

// Model shape for an encoder of dimension `dim`: defaults scaled to dim,
// then any explicit overrides from the grid (except dim and backbone).
inline lm::ModelConfig model_for(const nlohmann::json& overrides, std::size_t dim,
                                 lm::Backbone backbone) {
  auto c = lm::default_config(dim, backbone);
  auto o = overrides;
  o.erase("dim");
  o.erase("backbone");
  c = lm::model_config_from_json(o, c);
  lm::validate(c);
  return c;
}

template <typename T>
std::vector<T> pick(const corpus::SplitOf<T>& split, const std::string& which,
                    const std::vector<T>& all) {
  if (which == "train") return split.train;
  if (which == "validation") return split.validation;
  if (which == "test") return split.test;
  return all;
}

using Loader = std::function<std::vector<embedding::EmbeddedStory>(const std::string&)>;
using Progress = std::function<void(const CellResult&)>;

/// Runs every encoder x backbone x search cell. A failing cell is reported
/// with status "error" and the grid moves on.
inline std::vector<CellResult> run(const Grid& grid, const Loader& load = embedding::load_embeddings,
                                   const Progress& progress = {}) {
  validate(grid);
  std::vector<CellResult> rows;
  for (const auto& enc : grid.encoders) {
    std::vector<embedding::EmbeddedStory> stories;
    corpus::SplitOf<embedding::EmbeddedStory> split;
    std::string load_error;
    try {
      stories = load(enc.embeddings);
      split = corpus::split_items(stories, grid.split);
    } catch (const std::exception& e) {
      load_error = e.what();
    }
    const auto eval_set = load_error.empty() ? pick(split, grid.evaluate_on, stories)
                                             : std::vector<embedding::EmbeddedStory>{};
    if (load_error.empty() && eval_set.empty()) load_error = "evaluation subset is empty";

    for (const auto& backbone_name : grid.backbones) {
      const std::string backbone = backbone_name == "ut" ? "universal-transformer" : backbone_name;
      std::string cell_error = load_error;
      double final_loss = std::numeric_limits<double>::quiet_NaN();
      std::optional<lm::ModelParams> params;
      pipeline::CandidateFn candidates;
      pipeline::Scorer scorer = pipeline::Scorer::LmCosine;

      if (cell_error.empty()) {
        try {
          if (backbone == "gold-oracle") {
            candidates = pipeline::gold_oracle_candidates();
          } else if (backbone == "ngram-overlap") {
            scorer = pipeline::Scorer::NgramOverlap;
          } else if (backbone == "cbow-cosine") {
            scorer = pipeline::Scorer::CbowCosine;
          } else {
            const auto config = model_for(grid.model, stories.front().dim(), lm::parse_backbone(backbone));
            auto trained = lm::train(lm::init_params(config), split.train, grid.training);
            final_loss = trained.loss_trace.back();
            params = std::move(trained.params);
            candidates = pipeline::model_candidates(*params);
          }
        } catch (const std::exception& e) {
          cell_error = e.what();
        }
      }

      std::map<search::Strategy, std::vector<pipeline::Prediction>> by_search;
      const std::size_t first_row = rows.size();
      for (auto strategy : grid.searches) {
        CellResult row;
        row.encoder = enc.name;
        row.backbone = backbone;
        row.search = search::to_string(strategy);
        row.final_loss = final_loss;
        if (cell_error.empty()) {
          try {
            pipeline::OrderOptions opt{scorer, strategy, grid.seed, grid.brute_force_cap};
            auto preds = pipeline::order_corpus(eval_set, opt, candidates);
            const auto report = pipeline::evaluate(preds, pipeline::gold_sizes(eval_set));
            row.stories = report.story_count;
            row.tau = report.mean_tau;
            row.pmr = report.pmr;
            row.pairwise_ratio = report.mean_pairwise_ratio;
            by_search[strategy] = std::move(preds);
          } catch (const std::exception& e) {
            row.status = "error";
            row.error = e.what();
          }
        } else {
          row.status = "error";
          row.error = cell_error;
        }
        rows.push_back(std::move(row));
      }

      // Exhaustive search can never lose to the greedy chain on the same matrix.
      const auto bf = by_search.find(search::Strategy::BruteForce);
      const auto nn = by_search.find(search::Strategy::NearestNeighbor);
      if (bf != by_search.end() && nn != by_search.end()) {
        std::size_t violations = 0;
        for (std::size_t i = 0; i < bf->second.size(); ++i) {
          if (nn->second[i].total_score > bf->second[i].total_score) ++violations;
        }
        for (std::size_t r = first_row; r < rows.size(); ++r) {
          rows[r].dominance_violations = violations;
          if (violations > 0 && rows[r].status == "ok") rows[r].status = "dominance-violation";
        }
      }
      if (progress)
        for (std::size_t r = first_row; r < rows.size(); ++r) progress(rows[r]);
    }
  }
  return rows;
}

inline constexpr std::string_view kCsvHeader =
    "encoder,backbone,search,status,stories,tau,pmr,pairwise_ratio,dominance_violations,"
    "final_loss,error";

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::string number(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string csv_row(const CellResult& r) {
  return csv_field(r.encoder) + "," + csv_field(r.backbone) + "," + r.search + "," + r.status +
         "," + std::to_string(r.stories) + "," + number(r.tau) + "," + number(r.pmr) + "," +
         number(r.pairwise_ratio) + "," + std::to_string(r.dominance_violations) + "," +
         number(r.final_loss) + "," + csv_field(r.error);
}

}  // namespace slm::ablation
