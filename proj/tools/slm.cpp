// slm: command-line front end for the sentence ordering pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "slm/ablation.hpp"
#include "slm/corpus.hpp"
#include "slm/embedding_io.hpp"
#include "slm/language_model.hpp"
#include "slm/meta.hpp"
#include "slm/metrics.hpp"
#include "slm/pipeline.hpp"
#include "slm/synthetic.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Flag values. Unset optionals leave the config file (or the default) alone.
struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> strategy, scorer;

  std::optional<std::string> corpus, embeddings, out, checkpoint, candidates, predictions, gold,
      trace, csv, resume, grid, format, subset, backbone, schedule;
  std::optional<std::size_t> dim, hidden, heads, depth_steps, epochs, batch_size, cap, count;
  std::optional<double> learning_rate, l2, decay;
  bool oracle = false;
  bool no_per_story = false;
};

json default_config() {
  return {{"seed", 0},
          {"strategy", "brute-force"},
          {"scorer", "lm-cosine"},
          {"brute_force_cap", slm::search::kDefaultBruteForceCap},
          {"paths", json::object()},
          {"encode", {{"dim", 768}}},
          {"model", json::object()},
          {"training", json::object()},
          {"split", json::object()},
          {"subset", nullptr}};
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw slm::ValidationError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw slm::ValidationError("'" + path + "': " + e.what());
  }
}

// defaults < config file < flags
json resolve_config(const Flags& f) {
  json cfg = default_config();
  if (!f.config_path.empty()) {
    const json file = read_json_file(f.config_path);
    if (!file.is_object()) throw slm::ValidationError("config must be a JSON object");
    cfg.merge_patch(file);
  }
  auto set = [](json& at, const char* key, const auto& value) {
    if (value) at[key] = *value;
  };
  set(cfg, "seed", f.seed);
  set(cfg, "strategy", f.strategy);
  set(cfg, "scorer", f.scorer);
  set(cfg, "brute_force_cap", f.cap);
  set(cfg, "subset", f.subset);
  json& paths = cfg["paths"];
  set(paths, "corpus", f.corpus);
  set(paths, "embeddings", f.embeddings);
  set(paths, "out", f.out);
  set(paths, "checkpoint", f.checkpoint);
  set(paths, "candidates", f.candidates);
  set(paths, "predictions", f.predictions);
  set(paths, "gold", f.gold);
  set(paths, "trace", f.trace);
  set(paths, "csv", f.csv);
  set(paths, "resume", f.resume);
  set(paths, "grid", f.grid);
  set(cfg["encode"], "dim", f.dim);
  set(cfg["encode"], "format", f.format);
  json& model = cfg["model"];
  set(model, "hidden", f.hidden);
  set(model, "heads", f.heads);
  set(model, "depth_steps", f.depth_steps);
  set(model, "backbone", f.backbone);
  json& training = cfg["training"];
  set(training, "epochs", f.epochs);
  set(training, "batch_size", f.batch_size);
  set(training, "learning_rate", f.learning_rate);
  set(training, "l2", f.l2);
  set(training, "schedule", f.schedule);
  set(training, "decay", f.decay);
  if (f.oracle) cfg["oracle"] = true;
  if (f.no_per_story) cfg["per_story"] = false;
  if (f.count) cfg["count"] = *f.count;
  return cfg;
}

std::uint64_t seed_of(const json& cfg) { return cfg.at("seed").get<std::uint64_t>(); }

// Section seeds fall back to the global seed.
std::uint64_t section_seed(const json& cfg, const char* section) {
  const json& s = cfg.at(section);
  return s.contains("seed") ? s["seed"].get<std::uint64_t>() : seed_of(cfg);
}

std::string path_of(const json& cfg, const char* key, bool required = true) {
  const json& paths = cfg.at("paths");
  if (paths.contains(key) && paths[key].is_string()) return paths[key].get<std::string>();
  if (required) throw slm::ValidationError(std::string("missing required path --") + key);
  return {};
}

slm::corpus::SplitSpec split_spec(const json& cfg) {
  auto spec = slm::ablation::split_from_json(cfg.at("split"));
  if (!cfg.at("split").contains("seed")) spec.seed = seed_of(cfg);
  return spec;
}

void ensure_parent(const std::string& path) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
}

std::ofstream open_out(const std::string& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw slm::Error("cannot write '" + path + "'");
  return out;
}

std::string csv_meta_line(const json& cfg) {
  return std::string("# ") + std::string(slm::kToolName) + " " + std::string(slm::kToolVersion) +
         " config_hash=" + slm::config_hash(cfg);
}

std::string with_suffix(const std::string& path, const std::string& ext) {
  return fs::path(path).replace_extension(ext).string();
}

template <typename T>
std::vector<T> subset_of(const std::vector<T>& all, const json& cfg, const char* fallback) {
  const std::string which =
      cfg.at("subset").is_string() ? cfg["subset"].get<std::string>() : std::string(fallback);
  if (which == "all") return all;
  const auto split = slm::corpus::split_items(all, split_spec(cfg));
  if (which == "train") return split.train;
  if (which == "validation") return split.validation;
  if (which == "test") return split.test;
  throw slm::ValidationError("unknown subset '" + which + "' (all, train, validation, test)");
}

// ---------------------------------------------------------------------------

int cmd_synth(const json& cfg) {
  const auto count = cfg.value("count", std::size_t{100});
  const auto stories = slm::synthetic::routine_stories(count, seed_of(cfg));
  const auto out_path = path_of(cfg, "out");
  auto out = open_out(out_path);
  if (slm::corpus::guess_format(out_path) == slm::corpus::Format::CsvRoc) {
    slm::corpus::write_csv_roc(out, stories);
  } else {
    slm::corpus::write_jsonl(out, stories);
  }
  std::cerr << "wrote " << stories.size() << " stories to " << out_path << "\n";
  return 0;
}

int cmd_encode(const json& cfg) {
  const auto corpus_path = path_of(cfg, "corpus");
  const json& enc = cfg.at("encode");
  const auto stories =
      enc.contains("format")
          ? slm::corpus::load_corpus(corpus_path,
                                     slm::corpus::parse_format(enc["format"].get<std::string>()))
          : slm::corpus::load_corpus(corpus_path);
  const auto dim = enc.at("dim").get<std::size_t>();
  if (dim == 0) throw slm::ValidationError("--dim must be positive");
  const auto seed = section_seed(cfg, "encode");
  std::vector<slm::embedding::EmbeddedStory> out;
  out.reserve(stories.size());
  for (const auto& s : stories) out.push_back(slm::embedding::embed_story(s, dim, seed));
  const auto out_path = path_of(cfg, "out");
  auto file = open_out(out_path);
  slm::embedding::write_embeddings(file, out, cfg);
  std::cerr << "encoded " << out.size() << " stories (d=" << dim << ") to " << out_path << "\n";
  return 0;
}

int cmd_train(const json& cfg) {
  const auto all = slm::embedding::load_embeddings(path_of(cfg, "embeddings"));
  if (all.empty()) throw slm::ValidationError("embedding file has no stories");
  const auto stories = subset_of(all, cfg, "train");
  const auto dim = all.front().dim();

  slm::lm::Checkpoint ckpt;
  const auto resume = path_of(cfg, "resume", false);
  if (!resume.empty()) {
    ckpt = slm::lm::load_checkpoint(resume);
    ckpt.training = slm::lm::training_config_from_json(cfg.at("training"), ckpt.training);
  } else {
    json model = cfg.at("model");
    const auto backbone =
        slm::lm::parse_backbone(model.value("backbone", std::string("universal-transformer")));
    auto config = slm::lm::default_config(model.value("dim", dim), backbone);
    config.seed = section_seed(cfg, "model");
    config = slm::lm::model_config_from_json(model, config);
    slm::lm::validate(config);
    ckpt.params = slm::lm::init_params(config);
    auto tcfg = slm::lm::TrainingConfig{};
    tcfg.seed = section_seed(cfg, "training");
    ckpt.training = slm::lm::training_config_from_json(cfg.at("training"), tcfg);
  }
  if (ckpt.params.config.dim != dim) {
    throw slm::ValidationError("embedding dim " + std::to_string(dim) + " does not match model dim " +
                               std::to_string(ckpt.params.config.dim));
  }

  const auto out_path = path_of(cfg, "out");
  auto result = slm::lm::train(ckpt.params, stories, ckpt.training, ckpt.epochs_completed,
                               [](std::size_t epoch, double loss) {
                                 std::fprintf(stderr, "epoch %zu mean loss %.6f\n", epoch + 1, loss);
                               });
  ckpt.params = std::move(result.params);
  ckpt.epochs_completed = result.epochs_completed;
  ckpt.loss_trace.insert(ckpt.loss_trace.end(), result.loss_trace.begin(), result.loss_trace.end());
  ensure_parent(out_path);
  slm::lm::save_checkpoint(out_path, ckpt, cfg);

  auto trace_path = path_of(cfg, "trace", false);
  if (trace_path.empty()) trace_path = with_suffix(out_path, ".trace.csv");
  auto trace = open_out(trace_path);
  trace << csv_meta_line(cfg) << "\nepoch,mean_loss\n";
  for (std::size_t e = 0; e < ckpt.loss_trace.size(); ++e) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%zu,%.9g\n", e + 1, ckpt.loss_trace[e]);
    trace << buf;
  }
  std::cerr << "checkpoint " << out_path << " (" << ckpt.epochs_completed << " epochs), trace "
            << trace_path << "\n";
  return 0;
}

int cmd_order(const json& cfg) {
  const auto all = slm::embedding::load_embeddings(path_of(cfg, "embeddings"));
  const auto stories = subset_of(all, cfg, "all");
  slm::pipeline::OrderOptions opt;
  opt.scorer = slm::pipeline::parse_scorer(cfg.at("scorer").get<std::string>());
  opt.strategy = slm::search::parse_strategy(cfg.at("strategy").get<std::string>());
  opt.seed = seed_of(cfg);
  opt.brute_force_cap = cfg.at("brute_force_cap").get<std::size_t>();

  std::optional<slm::lm::ModelParams> params;
  std::vector<slm::embedding::EmbeddedStory> candidate_file;
  slm::pipeline::CandidateFn candidates;
  if (opt.scorer == slm::pipeline::Scorer::LmCosine) {
    const auto ckpt_path = path_of(cfg, "checkpoint", false);
    const auto cand_path = path_of(cfg, "candidates", false);
    const bool oracle = cfg.value("oracle", false);
    if (int(!ckpt_path.empty()) + int(!cand_path.empty()) + int(oracle) != 1) {
      throw slm::ValidationError("lm-cosine needs exactly one of --checkpoint, --candidates, --oracle");
    }
    if (!ckpt_path.empty()) {
      params = slm::lm::load_checkpoint(ckpt_path).params;
      if (!all.empty() && all.front().dim() != params->config.dim) {
        throw slm::ValidationError("embedding dim " + std::to_string(all.front().dim()) +
                                   " does not match model dim " +
                                   std::to_string(params->config.dim));
      }
      candidates = slm::pipeline::model_candidates(*params);
    } else if (!cand_path.empty()) {
      candidate_file = slm::embedding::load_embeddings(cand_path);
      candidates = slm::pipeline::precomputed_candidates(candidate_file);
    } else {
      candidates = slm::pipeline::gold_oracle_candidates();
    }
  }

  const auto preds = slm::pipeline::order_corpus(stories, opt, candidates);
  const auto out_path = path_of(cfg, "out");
  auto out = open_out(out_path);
  slm::pipeline::write_predictions(out, preds, cfg);
  std::cerr << "ordered " << preds.size() << " stories to " << out_path << "\n";
  return 0;
}

// Story id -> sentence count, from a corpus or an embedding file.
std::map<std::string, std::size_t> load_gold_sizes(const std::string& path) {
  if (slm::corpus::guess_format(path) == slm::corpus::Format::CsvRoc) {
    return slm::pipeline::gold_sizes(slm::corpus::load_corpus(path));
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw slm::ValidationError("cannot open gold file '" + path + "'");
  std::string line;
  bool embedded = false;
  while (std::getline(in, line)) {
    if (slm::text::trim(line).empty()) continue;
    const auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || slm::is_metadata_record(j)) continue;
    embedded = j.is_object() && j.contains("embeddings");
    break;
  }
  if (embedded) return slm::pipeline::gold_sizes(slm::embedding::load_embeddings(path));
  return slm::pipeline::gold_sizes(slm::corpus::load_corpus(path, slm::corpus::Format::Jsonl));
}

int cmd_evaluate(const json& cfg) {
  const auto pred_path = path_of(cfg, "predictions");
  std::ifstream in(pred_path, std::ios::binary);
  if (!in) throw slm::ValidationError("cannot open predictions '" + pred_path + "'");
  const auto preds = slm::pipeline::read_predictions(in);
  const auto report = slm::pipeline::evaluate(preds, load_gold_sizes(path_of(cfg, "gold")));

  auto j = slm::metrics::to_json(report, cfg.value("per_story", true));
  j["_meta"] = slm::metadata_record(cfg)["_meta"];
  const auto out_path = path_of(cfg, "out");
  open_out(out_path) << j.dump(2) << '\n';
  auto csv_path = path_of(cfg, "csv", false);
  if (csv_path.empty()) csv_path = with_suffix(out_path, ".csv");
  open_out(csv_path) << csv_meta_line(cfg) << '\n'
                     << slm::metrics::kSummaryCsvHeader << '\n'
                     << slm::metrics::summary_csv_row(report) << '\n';
  std::printf("stories %zu  tau %.6f  pmr %.6f  pairwise %.6f\n", report.story_count,
              report.mean_tau, report.pmr, report.mean_pairwise_ratio);
  return 0;
}

int cmd_ablate(const json& cfg, bool seed_flag) {
  const auto grid_path = path_of(cfg, "grid");
  auto grid_json = read_json_file(grid_path);
  if (seed_flag) grid_json["seed"] = seed_of(cfg);
  auto grid = slm::ablation::grid_from_json(grid_json, fs::path(grid_path).parent_path().string());

  const auto out_path = path_of(cfg, "out");
  json meta = cfg;
  meta["grid"] = slm::ablation::to_json(grid);
  auto out = open_out(out_path);
  out << csv_meta_line(meta) << '\n' << slm::ablation::kCsvHeader << '\n';
  bool all_ok = true;
  const auto rows = slm::ablation::run(grid, slm::embedding::load_embeddings,
                                       [&](const slm::ablation::CellResult& r) {
                                         out << slm::ablation::csv_row(r) << '\n' << std::flush;
                                         std::cerr << r.encoder << " / " << r.backbone << " / "
                                                   << r.search << ": " << r.status;
                                         if (!r.error.empty()) std::cerr << " (" << r.error << ")";
                                         std::cerr << "\n";
                                         all_ok = all_ok && r.status == "ok";
                                       });
  std::cerr << rows.size() << " cells written to " << out_path << "\n";
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sentence ordering with a sentence-level language model"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config_path, "JSON config file; flags override its values")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", f.seed, "global seed");
  app.add_option("--strategy", f.strategy, "brute-force | nn");
  app.add_option("--scorer", f.scorer, "lm-cosine | ngram-overlap | cbow-cosine");

  auto* synth = app.add_subcommand("synth", "write a synthetic routine-story corpus");
  synth->add_option("--count", f.count, "number of stories (default 100)");
  synth->add_option("--out", f.out, "output corpus (.csv or .jsonl)");

  auto* encode = app.add_subcommand("encode", "embed a corpus with the toy bag-of-words encoder");
  encode->add_option("--corpus", f.corpus, "story corpus (.csv ROCStories layout or JSONL)");
  encode->add_option("--format", f.format, "csv-roc | jsonl (default: from extension)");
  encode->add_option("--dim", f.dim, "embedding dimension (default 768)");
  encode->add_option("--out", f.out, "embedding JSONL to write");

  auto* train = app.add_subcommand("train", "train a sentence-level language model");
  train->add_option("--embeddings", f.embeddings, "gold-ordered embedding JSONL");
  train->add_option("--out", f.out, "checkpoint to write");
  train->add_option("--trace", f.trace, "loss trace CSV (default: <out>.trace.csv)");
  train->add_option("--resume", f.resume, "continue from this checkpoint");
  train->add_option("--subset", f.subset, "train | validation | test | all (default train)");
  train->add_option("--backbone", f.backbone, "universal-transformer | bilstm");
  train->add_option("--hidden", f.hidden, "hidden width (default 4*dim)");
  train->add_option("--heads", f.heads, "attention heads");
  train->add_option("--depth-steps", f.depth_steps, "recurrent transformer steps");
  train->add_option("--epochs", f.epochs, "epochs to run");
  train->add_option("--batch-size", f.batch_size, "stories per batch");
  train->add_option("--learning-rate", f.learning_rate, "initial learning rate");
  train->add_option("--l2", f.l2, "weight regularization");
  train->add_option("--schedule", f.schedule, "constant | inverse-time | exponential");
  train->add_option("--decay", f.decay, "schedule decay");

  auto* order = app.add_subcommand("order", "shuffle stories and recover their order");
  order->add_option("--embeddings", f.embeddings, "gold-ordered embedding JSONL");
  order->add_option("--checkpoint", f.checkpoint, "trained model (lm-cosine)");
  order->add_option("--candidates", f.candidates,
                    "precomputed candidate vectors, one per gold sentence (lm-cosine)");
  order->add_flag("--oracle", f.oracle, "use the gold successor as candidate (lm-cosine)");
  order->add_option("--subset", f.subset, "all | train | validation | test (default all)");
  order->add_option("--brute-force-cap", f.cap, "largest story for brute-force search");
  order->add_option("--out", f.out, "predictions JSONL to write");

  auto* evaluate = app.add_subcommand("evaluate", "score predictions against gold order");
  evaluate->add_option("--predictions", f.predictions, "predictions JSONL");
  evaluate->add_option("--gold", f.gold, "gold corpus or embedding file");
  evaluate->add_option("--out", f.out, "report JSON to write");
  evaluate->add_option("--csv", f.csv, "summary CSV (default: <out>.csv)");
  evaluate->add_flag("--no-per-story", f.no_per_story, "omit per-story rows from the JSON report");

  auto* ablate = app.add_subcommand("ablate", "run an encoder x backbone x search grid");
  ablate->add_option("--grid", f.grid, "grid JSON");
  ablate->add_option("--out", f.out, "grid CSV to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const json cfg = resolve_config(f);
    if (synth->parsed()) return cmd_synth(cfg);
    if (encode->parsed()) return cmd_encode(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (order->parsed()) return cmd_order(cfg);
    if (evaluate->parsed()) return cmd_evaluate(cfg);
    if (ablate->parsed()) return cmd_ablate(cfg, f.seed.has_value());
  } catch (const slm::ValidationError& e) {
    std::cerr << "slm: error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "slm: error: bad configuration value: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "slm: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
