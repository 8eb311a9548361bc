// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0
//
// tgraph: synthesize datasets, preprocess them, train ranking models and
// score configurations.

#include <cstdio>
#include <filesystem>
#if defined(__GLIBC__) || defined(__linux__)
#include <malloc.h>
#endif
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "tgraph/dataset.hpp"
#include "tgraph/gradcheck.hpp"
#include "tgraph/inference.hpp"
#include "tgraph/kernels.hpp"
#include "tgraph/model.hpp"
#include "tgraph/preprocess.hpp"
#include "tgraph/ranking.hpp"
#include "tgraph/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Config files are JSON: top-level scalars are global options, top-level
// objects hold per-subcommand options. Flags given on the command line win.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const std::exception& e) {
      throw CLI::FileError(std::string("config: ") + e.what());
    }
    std::vector<CLI::ConfigItem> items;
    if (!j.is_object()) throw CLI::FileError("config: top level must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        for (const auto& [name, v] : value.items()) append_item(items, {key}, name, v);
      } else {
        append_item(items, {}, key, value);
      }
    }
    return items;
  }

 private:
  static void append_item(std::vector<CLI::ConfigItem>& items, std::vector<std::string> parents,
                          const std::string& name, const json& v) {
    CLI::ConfigItem item;
    item.parents = std::move(parents);
    item.name = name;
    if (v.is_array()) {
      for (const auto& e : v) item.inputs.push_back(scalar_to_string(e));
    } else {
      item.inputs.push_back(scalar_to_string(v));
    }
    items.push_back(std::move(item));
  }

  static std::string scalar_to_string(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }
};

std::pair<int64_t, int64_t> parse_node_range(const std::string& s) {
  const auto pos = s.find("..");
  if (pos == std::string::npos)
    throw tgraph::ValidationError("--nodes expects MIN..MAX, got '" + s + "'");
  try {
    return {std::stoll(s.substr(0, pos)), std::stoll(s.substr(pos + 2))};
  } catch (const std::exception&) {
    throw tgraph::ValidationError("--nodes expects MIN..MAX, got '" + s + "'");
  }
}

void write_json_output(const json& j, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw tgraph::IoError("cannot write " + out);
  f << j.dump(2) << '\n';
}

std::vector<fs::path> expand_checkpoints(const std::vector<std::string>& specs) {
  std::vector<fs::path> out;
  for (const std::string& s : specs) {
    fs::path p(s);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p))
        if (e.path().extension() == ".ckpt") found.push_back(e.path());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(p);
    }
  }
  if (out.empty()) throw tgraph::ValidationError("rank: no checkpoints found");
  return out;
}

struct TrainCliOptions {
  std::string data;
  std::string collection;
  std::string out;
  std::string log_path;
  int64_t fold = 0;
  tgraph::TrainConfig train;
  tgraph::ModelConfig model;
  bool no_self_attention = false;
  bool no_cross_attention = false;
  bool no_edges = false;
};

void add_model_flags(CLI::App* cmd, TrainCliOptions& o) {
  cmd->add_option("--hidden-dim", o.model.hidden_dim, "Hidden width C (blocks run at C/2)")
      ->capture_default_str();
  cmd->add_option("--blocks", o.model.n_blocks, "Graph convolutional blocks")
      ->capture_default_str();
  cmd->add_option("--se-reduction", o.model.se_reduction, "Self-attention bottleneck reduction")
      ->capture_default_str();
  cmd->add_flag("--no-self-attention", o.no_self_attention,
                "Disable channel-wise self-attention");
  cmd->add_flag("--no-cross-attention", o.no_cross_attention,
                "Disable cross-configuration attention");
  cmd->add_flag("--no-edges", o.no_edges, "Drop graph edges (neighbor sums become zero)");
}

void add_train_flags(CLI::App* cmd, TrainCliOptions& o) {
  cmd->add_option("--seed", o.train.seed, "Seed for folds, init and batching")
      ->capture_default_str();
  cmd->add_option("--epochs", o.train.epochs,
                  "Training epochs, fractional allowed (default: per-collection)");
  cmd->add_option("--batch-configs", o.train.configs_per_batch,
                  "Configurations sampled per step (default: per-collection)");
  cmd->add_option("--k-folds", o.train.k_folds, "Cross-validation fold count")
      ->capture_default_str();
  cmd->add_option("--lr", o.train.lr_peak, "Peak learning rate")->capture_default_str();
  cmd->add_option("--val-every", o.train.val_every_epochs, "Validation cadence in epochs")
      ->capture_default_str();
  add_model_flags(cmd, o);
}

tgraph::ModelConfig resolved_model_config(const TrainCliOptions& o) {
  tgraph::ModelConfig mc = o.model;
  mc.use_self_attention = !o.no_self_attention;
  mc.use_cross_attention = !o.no_cross_attention;
  mc.use_edges = !o.no_edges;
  return mc;
}

void check_collection_name(const tgraph::Dataset& ds, const std::string& requested) {
  if (requested.empty()) return;
  const std::string dir = ds.manifest.kind.dir_name();
  if (requested != dir && requested != tgraph::to_string(ds.manifest.kind.collection))
    throw tgraph::ValidationError("dataset holds collection '" + dir + "', not '" + requested +
                                  "'");
}

int run_train(TrainCliOptions o) {
  o.train.normalize();
  tgraph::Dataset ds = tgraph::load_dataset(o.data);
  check_collection_name(ds, o.collection);
  std::ofstream log_file;
  std::ostream* log = nullptr;
  const std::string log_path = o.log_path.empty() ? o.out + ".log.jsonl" : o.log_path;
  if (log_path != "none") {
    log_file.open(log_path, std::ios::binary);
    if (!log_file) throw tgraph::IoError("cannot write " + log_path);
    log = &log_file;
  }
  tgraph::TrainResult result =
      tgraph::train_fold(ds, o.fold, o.train, resolved_model_config(o), log);
  tgraph::save_checkpoint(result.model, o.out);
  json summary{{"fold", o.fold},
               {"best_val_tau", result.best_val_tau},
               {"best_epoch", result.best_epoch},
               {"steps", result.total_steps},
               {"trained_graphs", result.trained_graphs},
               {"parameters", result.model.parameter_count()},
               {"checkpoint", o.out}};
  std::cout << summary.dump() << '\n';
  return 0;
}

int run_rank(const std::string& data, const std::vector<std::string>& ckpt_specs,
             const std::string& out, int64_t tta, int64_t batch, uint64_t tta_seed) {
  tgraph::Dataset ds = tgraph::load_dataset(data);
  const auto paths = expand_checkpoints(ckpt_specs);
  std::vector<tgraph::TGraphModel> models;
  models.reserve(paths.size());
  for (const auto& p : paths) models.push_back(tgraph::load_checkpoint(p));
  std::vector<const tgraph::TGraphModel*> model_ptrs;
  for (const auto& m : models) model_ptrs.push_back(&m);

  json graphs = json::object();
  for (const auto& g : ds.graphs) {
    if (g.graph.n_nodes() == 0) continue;  // no layout signal after pruning
    tgraph::RankingResult r = tgraph::rank(g, model_ptrs, tta, batch, tta_seed);
    graphs[g.graph.graph_id] = json{{"scores", r.scores}, {"order", r.order}};
  }
  json pred;
  json ckpt_names = json::array();
  for (const auto& p : paths) ckpt_names.push_back(p.filename().string());
  pred["provenance"] = json{{"checkpoints", ckpt_names},
                            {"n_tta", tta},
                            {"tta_seed", tta_seed},
                            {"batch", batch},
                            {"kernels", tgraph::kernels::lane_name(tgraph::kernels::active_lane())}};
  pred["graphs"] = std::move(graphs);
  std::ofstream f(out, std::ios::binary);
  if (!f) throw tgraph::IoError("cannot write " + out);
  f << pred.dump() << '\n';
  return 0;
}

int run_evaluate(const std::string& pred_path, const std::string& data, const std::string& out,
                 int64_t k) {
  tgraph::Dataset ds = tgraph::load_dataset(data);
  std::ifstream f(pred_path);
  if (!f) throw tgraph::IoError("cannot open " + pred_path);
  json pred;
  try {
    f >> pred;
  } catch (const std::exception& e) {
    throw tgraph::SchemaError(pred_path + ": " + e.what());
  }
  const json& graphs = pred.at("graphs");

  const bool tile = ds.manifest.kind.is_tile();
  json per_graph = json::object();
  double sum = 0.0;
  int64_t counted = 0;
  for (const auto& g : ds.graphs) {
    const auto it = graphs.find(g.graph.graph_id);
    if (it == graphs.end()) continue;
    const auto scores = it->at("scores").get<std::vector<double>>();
    if (static_cast<int64_t>(scores.size()) != g.configs.n_configs())
      throw tgraph::ValidationError("evaluate: prediction/config count mismatch for graph '" +
                                    g.graph.graph_id + "'");
    std::vector<double> runtimes;
    runtimes.reserve(scores.size());
    for (int64_t rt : g.configs.runtimes_ns) runtimes.push_back(static_cast<double>(rt));
    double value;
    if (tile) {
      value = tgraph::tile_metric(runtimes, scores, k);
    } else {
      if (scores.size() < 2) continue;
      value = tgraph::kendall_tau(runtimes, scores);
    }
    per_graph[g.graph.graph_id] = value;
    sum += value;
    ++counted;
  }
  if (counted == 0) throw tgraph::ValidationError("evaluate: no predictions matched the dataset");
  json result{{"collection", ds.manifest.kind.dir_name()},
              {"metric", tile ? "m_tile" : "kendall_tau"},
              {"per_graph", per_graph},
              {"mean", sum / static_cast<double>(counted)},
              {"graphs", counted}};
  write_json_output(result, out);
  return 0;
}

int run_gradcheck(uint64_t seed) {
  const auto reports = tgraph::gradcheck_suite(seed);
  bool ok = true;
  for (const auto& r : reports) {
    std::printf("%-22s max_rel_err=%.3e tol=%.0e %s\n", r.name.c_str(), r.max_rel_err,
                r.tolerance, r.pass ? "PASS" : "FAIL");
    ok = ok && r.pass;
  }
  if (!ok) {
    TGRAPH_LOG_ERROR("gradcheck failed");
    return 3;
  }
  return 0;
}

struct AblateOptions {
  std::string data;
  std::string out;
  std::string variants = "full,no_self_attention,no_cross_attention,no_edges";
  int64_t folds = 1;
  bool parallel_folds = false;
  TrainCliOptions base;
};

int run_ablate(AblateOptions o) {
  o.base.train.normalize();
  tgraph::Dataset ds = tgraph::load_dataset(o.data);
  std::vector<std::string> names;
  {
    std::stringstream ss(o.variants);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) names.push_back(item);
    }
  }
  if (names.empty()) throw tgraph::ValidationError("ablate: no variants requested");

  json table = json::object();
  double full_tau = std::nan("");
  for (const std::string& name : names) {
    tgraph::ModelConfig mc = resolved_model_config(o.base);
    if (name == "full") {
      // all features on
    } else if (name == "no_self_attention") {
      mc.use_self_attention = false;
    } else if (name == "no_cross_attention") {
      mc.use_cross_attention = false;
    } else if (name == "no_edges") {
      mc.use_edges = false;
    } else {
      throw tgraph::ValidationError("ablate: unknown variant '" + name + "'");
    }

    std::vector<double> taus(static_cast<size_t>(o.folds));
    auto train_one = [&](int64_t fold) {
      tgraph::TrainResult r = tgraph::train_fold(ds, fold, o.base.train, mc, nullptr);
      taus[static_cast<size_t>(fold)] = r.best_val_tau;
    };
    if (o.parallel_folds && o.folds > 1) {
      std::vector<std::thread> workers;
      for (int64_t f = 0; f < o.folds; ++f) workers.emplace_back(train_one, f);
      for (auto& w : workers) w.join();
    } else {
      for (int64_t f = 0; f < o.folds; ++f) train_one(f);
    }
    double mean = 0.0;
    for (double t : taus) mean += t;
    mean /= static_cast<double>(o.folds);
    if (name == "full") full_tau = mean;
    table[name] = json{{"tau", mean}, {"per_fold", taus}};
    TGRAPH_LOG_INFO("ablate: %s tau=%.4f", name.c_str(), mean);
  }
  for (auto& [name, entry] : table.items()) {
    if (!std::isnan(full_tau)) entry["delta_vs_full"] = entry["tau"].get<double>() - full_tau;
  }

  std::printf("%-24s %10s %14s\n", "variant", "tau", "delta");
  for (const auto& [name, entry] : table.items()) {
    const double d = entry.contains("delta_vs_full") ? entry["delta_vs_full"].get<double>() : 0.0;
    std::printf("%-24s %10.4f %+14.4f\n", name.c_str(), entry["tau"].get<double>(), d);
  }
  json result{{"variants", table},
              {"folds", o.folds},
              {"epochs", o.base.train.epochs},
              {"k_folds", o.base.train.k_folds},
              {"seed", o.base.train.seed}};
  if (!o.out.empty()) write_json_output(result, o.out);
  return 0;
}

void log_startup(const CLI::App& app) {
  for (const CLI::App* sub : app.get_subcommands()) {
    std::string opts;
    for (const CLI::Option* opt : sub->get_options()) {
      if (opt->count() == 0 && opt->get_default_str().empty()) continue;
      if (opt->get_name().empty()) continue;
      opts += " " + opt->get_name() + "=" +
              (opt->count() ? opt->as<std::string>() : opt->get_default_str());
    }
    TGRAPH_LOG_INFO("command %s%s", sub->get_name().c_str(), opts.c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__) || defined(__linux__)
  // Tape tensors are large and short-lived; keep them in the arena instead
  // of round-tripping through mmap/munmap.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"TGraph: learned ranking of tensor-program configurations"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file (flags take precedence)");
  app.require_subcommand(0, 1);

  std::string kernels_lane = "auto";
  app.add_option("--kernels", kernels_lane, "Kernel lane: auto, scalar or avx2")
      ->capture_default_str();

  // synth ------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with known runtimes");
  tgraph::SynthParams sp;
  std::string nodes_range = "8..40";
  std::string synth_out;
  std::string synth_collection = "layout_random";
  std::string synth_group = "xla";
  synth->add_option("--seed", sp.seed, "Generator seed")->capture_default_str();
  synth->add_option("--graphs", sp.n_graphs, "Number of graphs")->capture_default_str();
  synth->add_option("--nodes", nodes_range, "Node count range MIN..MAX")->capture_default_str();
  synth->add_option("--configs", sp.configs_per_graph, "Configurations per graph")
      ->capture_default_str();
  synth->add_option("--out", synth_out, "Output dataset directory")->required();
  synth->add_option("--collection", synth_collection,
                    "layout_random, layout_default or tile")
      ->capture_default_str();
  synth->add_option("--group", synth_group, "xla or nlp")->capture_default_str();
  synth->add_option("--v-op", sp.v_op, "Opcode vocabulary size")->capture_default_str();
  synth->add_option("--max-rank", sp.max_rank, "Largest tensor rank (1..4)")->capture_default_str();

  // preprocess ---------------------------------------------------------
  auto* prep = app.add_subcommand("preprocess", "Prune, dedup, compress and fit scalers");
  std::string prep_in, prep_out;
  bool no_prune = false, no_dedup = false;
  prep->add_option("--in", prep_in, "Raw dataset directory")->required();
  prep->add_option("--out", prep_out, "Preprocessed dataset directory")->required();
  prep->add_flag("--no-prune", no_prune, "Keep all nodes");
  prep->add_flag("--no-dedup", no_dedup, "Keep duplicate configurations");

  // train --------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Train one cross-validation fold");
  TrainCliOptions to;
  train->add_option("--data", to.data, "Preprocessed dataset directory")->required();
  train->add_option("--collection", to.collection, "Collection name (must match the dataset)");
  train->add_option("--fold", to.fold, "Fold index to train")->capture_default_str();
  train->add_option("--out", to.out, "Checkpoint output path")->required();
  train->add_option("--log", to.log_path, "Training log path (JSON lines; 'none' disables)");
  add_train_flags(train, to);

  // rank -----------------------------------------------------------------
  auto* rankc = app.add_subcommand("rank", "Score and rank configurations with TTA + ensembling");
  std::string rank_data, rank_out;
  std::vector<std::string> rank_ckpts;
  int64_t rank_tta = 10, rank_batch = 128;
  uint64_t rank_tta_seed = 0;
  rankc->add_option("--data", rank_data, "Dataset directory")->required();
  rankc->add_option("--ckpt", rank_ckpts, "Checkpoint file or directory (repeatable)")
      ->required();
  rankc->add_option("--out", rank_out, "Predictions JSON path")->required();
  rankc->add_option("--tta", rank_tta, "Test-time augmentation rounds")->capture_default_str();
  rankc->add_option("--batch", rank_batch, "Configurations per inference batch")
      ->capture_default_str();
  rankc->add_option("--tta-seed", rank_tta_seed, "Seed for TTA permutations")
      ->capture_default_str();

  // evaluate ----------------------------------------------------------
  auto* eval = app.add_subcommand("evaluate", "Per-graph and mean metric for predictions");
  std::string eval_pred, eval_data, eval_out;
  int64_t eval_k = 5;
  eval->add_option("--pred", eval_pred, "Predictions JSON from rank")->required();
  eval->add_option("--data", eval_data, "Dataset directory")->required();
  eval->add_option("--out", eval_out, "Output path (default stdout)");
  eval->add_option("--k", eval_k, "Top-k for the tile metric")->capture_default_str();

  // gradcheck ----------------------------------------------------------
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference oracle suite");
  uint64_t gc_seed = 1;
  gc->add_option("--seed", gc_seed, "Input seed")->capture_default_str();

  // ablate -------------------------------------------------------------
  auto* ablate = app.add_subcommand("ablate", "Train and compare model variants");
  AblateOptions ao;
  ao.base.train.k_folds = 5;
  ao.base.train.epochs = 60;
  ao.base.train.configs_per_batch = 32;
  ao.base.model.hidden_dim = 64;
  ablate->add_option("--data", ao.data, "Preprocessed dataset directory")->required();
  ablate->add_option("--out", ao.out, "Report JSON path");
  ablate->add_option("--variants", ao.variants, "Comma list of variants")->capture_default_str();
  ablate->add_option("--folds", ao.folds, "Folds to train per variant")->capture_default_str();
  ablate->add_flag("--parallel-folds", ao.parallel_folds, "Train folds in parallel threads");
  add_train_flags(ablate, ao.base);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp" ||
        e.get_name() == "CallForVersion")
      return app.exit(e);
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (kernels_lane == "scalar") {
      tgraph::kernels::set_lane(tgraph::kernels::Lane::scalar);
    } else if (kernels_lane == "avx2") {
      tgraph::kernels::set_lane(tgraph::kernels::Lane::avx2);
    } else if (kernels_lane != "auto") {
      throw tgraph::ValidationError("--kernels must be auto, scalar or avx2");
    }
    log_startup(app);
    TGRAPH_LOG_INFO("kernel lane: %s",
                    tgraph::kernels::lane_name(tgraph::kernels::active_lane()));

    if (synth->parsed()) {
      const auto [lo, hi] = parse_node_range(nodes_range);
      sp.nodes_min = lo;
      sp.nodes_max = hi;
      sp.collection = tgraph::collection_from_string(synth_collection);
      sp.group = tgraph::group_from_string(synth_group);
      tgraph::generate_synthetic(sp, synth_out);
      return 0;
    }
    if (prep->parsed()) {
      tgraph::PreprocessOptions po;
      po.prune = !no_prune;
      po.dedup = !no_dedup;
      tgraph::preprocess_dataset(prep_in, prep_out, po);
      return 0;
    }
    if (train->parsed()) return run_train(to);
    if (rankc->parsed())
      return run_rank(rank_data, rank_ckpts, rank_out, rank_tta, rank_batch, rank_tta_seed);
    if (eval->parsed()) return run_evaluate(eval_pred, eval_data, eval_out, eval_k);
    if (gc->parsed()) return run_gradcheck(gc_seed);
    if (ablate->parsed()) return run_ablate(ao);
    std::cout << app.help();
    return 0;
  } catch (const tgraph::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const tgraph::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 4;
  } catch (const tgraph::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
