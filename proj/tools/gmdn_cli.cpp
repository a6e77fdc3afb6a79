// Apache License, Version 2.0, refer to LICENSE.txt
//
// Command-line harness: generate | train | evaluate | transfer | trace |
// reconstruct. All randomness flows from the config seed; every report
// carries the config hash and code version.
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gmdn/baselines.hpp"
#include "gmdn/linkpred.hpp"
#include "gmdn/model.hpp"
#include "gmdn/sir.hpp"
#include "gmdn/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gmdn;

namespace {

constexpr const char* kCodeVersion = "0.1.0";

// Config problems exit with 1; runtime failures with 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  if (!cfg.is_object()) throw ConfigError("config root must be a JSON object");
  return cfg;
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("unknown config key '" + it.key() + "' in " + where);
}

template <typename T>
T require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError("missing config key '" + key + "' in " + where);
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + key + "' in " + where + ": " + e.what());
  }
}

template <typename T>
T optional_or(const json& obj, const std::string& key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + key + "' in " + where + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_report(const fs::path& out_dir, const std::string& stem, json report,
                  const std::string& csv) {
  write_text(out_dir / (stem + ".json"), report.dump(2) + "\n");
  write_text(out_dir / (stem + ".csv"), csv);
}

json provenance(const std::string& command, const json& cfg, std::uint64_t seed) {
  return json{{"command", command},
              {"config_hash", fnv1a_hex(cfg.dump())},
              {"code_version", kCodeVersion},
              {"seed", seed}};
}

ModelConfig parse_model_config(const json& m) {
  check_keys(m, {"conv", "layers", "hidden", "components", "family", "readout", "alpha",
                 "concat_layers"},
             "model");
  ModelConfig cfg;
  const std::string conv = optional_or<std::string>(m, "conv", "model", "gin");
  if (conv == "gin")
    cfg.conv = ConvKind::gin;
  else if (conv == "gcn")
    cfg.conv = ConvKind::gcn;
  else if (conv == "dense")
    cfg.conv = ConvKind::dense;
  else
    throw ConfigError("model.conv must be gin|gcn|dense");
  cfg.layers = optional_or(m, "layers", "model", 2);
  cfg.hidden = optional_or(m, "hidden", "model", 64);
  cfg.components = optional_or(m, "components", "model", 5);
  const std::string family = optional_or<std::string>(m, "family", "model", "binomial");
  if (family == "binomial")
    cfg.family = Family::binomial;
  else if (family == "gaussian")
    cfg.family = Family::gaussian;
  else
    throw ConfigError("model.family must be binomial|gaussian");
  const std::string readout = optional_or<std::string>(m, "readout", "model", "sum");
  if (readout == "sum")
    cfg.readout = ReadoutKind::sum;
  else if (readout == "mean")
    cfg.readout = ReadoutKind::mean;
  else
    throw ConfigError("model.readout must be sum|mean");
  cfg.concat_layers = optional_or(m, "concat_layers", "model", false);
  if (m.contains("alpha")) {
    if (m.at("alpha").is_number())
      cfg.alpha.assign(cfg.components, m.at("alpha").get<double>());
    else
      cfg.alpha = require<std::vector<double>>(m, "alpha", "model");
  }
  cfg.input_dim = 5;
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid model config: ") + e.what());
  }
  return cfg;
}

TrainConfig parse_train_config(const json& t, std::uint64_t seed, int workers_override) {
  check_keys(t, {"epochs", "patience", "lr", "m_steps_per_e_step", "chunk_records", "workers",
                 "fixed_epochs"},
             "train");
  TrainConfig cfg;
  cfg.epochs = optional_or(t, "epochs", "train", cfg.epochs);
  cfg.patience = optional_or(t, "patience", "train", cfg.patience);
  cfg.lr = optional_or(t, "lr", "train", cfg.lr);
  cfg.m_steps_per_e_step = optional_or(t, "m_steps_per_e_step", "train", cfg.m_steps_per_e_step);
  cfg.chunk_records = optional_or(t, "chunk_records", "train", cfg.chunk_records);
  cfg.workers = optional_or(t, "workers", "train", cfg.workers);
  if (workers_override > 0) cfg.workers = workers_override;
  if (t.contains("fixed_epochs")) cfg.fixed_epochs = require<int>(t, "fixed_epochs", "train");
  cfg.init_seed = seed;
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid train config: ") + e.what());
  }
  return cfg;
}

Graph load_graph_config(const json& g, std::uint64_t seed) {
  check_keys(g, {"type", "block_size", "p_in", "p_out", "n", "p", "m", "edge_list", "features"},
             "graph");
  const std::string type = require<std::string>(g, "type", "graph");
  if (type == "two_block") {
    return generate_two_block(require<int>(g, "block_size", "graph"),
                              require<double>(g, "p_in", "graph"),
                              require<double>(g, "p_out", "graph"), seed);
  }
  if (type == "er")
    return generate_er(require<int>(g, "n", "graph"), require<double>(g, "p", "graph"), seed);
  if (type == "ba")
    return generate_ba(require<int>(g, "n", "graph"), require<int>(g, "m", "graph"), seed);
  if (type == "edge_list") {
    const std::string path = require<std::string>(g, "edge_list", "graph");
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open edge list: " + path);
    Graph out;
    int u, v;
    while (in >> u >> v) {
      out.edges.emplace_back(std::min(u, v), std::max(u, v));
      out.num_nodes = std::max(out.num_nodes, std::max(u, v) + 1);
    }
    if (g.contains("features")) {
      const std::string fpath = require<std::string>(g, "features", "graph");
      std::ifstream fin(fpath);
      if (!fin) throw std::runtime_error("cannot open feature file: " + fpath);
      std::string line;
      while (std::getline(fin, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::vector<double> vals;
        double x;
        while (row >> x) vals.push_back(x);
        out.features.push_back(std::move(vals));
      }
    }
    out.validate();
    return out;
  }
  throw ConfigError("graph.type must be two_block|er|ba|edge_list");
}

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw ConfigError("split must be train|val|test");
}

DistanceKind parse_distance(const std::string& name) {
  if (name == "l2") return DistanceKind::l2;
  if (name == "jeffrey") return DistanceKind::jeffrey;
  if (name == "bhattacharyya") return DistanceKind::bhattacharyya;
  throw ConfigError("distance must be l2|jeffrey|bhattacharyya");
}

// ---- commands ------------------------------------------------------------

int cmd_generate(const json& cfg, std::uint64_t seed, const fs::path& out_dir, int workers) {
  check_keys(cfg, {"family", "n", "connectivities", "graphs_per_conn", "sims_per_config", "seed",
                   "output"},
             "generate config");
  const std::string family = require<std::string>(cfg, "family", "generate config");
  const int n = require<int>(cfg, "n", "generate config");
  const auto conns = require<std::vector<double>>(cfg, "connectivities", "generate config");
  const int graphs = require<int>(cfg, "graphs_per_conn", "generate config");
  const int sims = require<int>(cfg, "sims_per_config", "generate config");
  const std::string output = optional_or<std::string>(cfg, "output", "generate config",
                                                      std::string("dataset.jsonl"));

  Dataset d = generate_dataset(family, n, conns, graphs, sims, seed, std::max(1, workers));
  const fs::path data_path = out_dir / output;
  save_dataset(d, data_path.string());

  json manifest = provenance("generate", cfg, seed);
  manifest["dataset"] = data_path.string();
  manifest["family"] = d.family;
  manifest["n"] = d.n;
  manifest["num_graphs"] = d.graphs.size();
  manifest["num_records"] = d.records.size();
  for (Split s : {Split::train, Split::val, Split::test})
    manifest["records_" + split_name(s)] = d.record_ids(s).size();
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "generated " << d.records.size() << " records over " << d.graphs.size()
            << " graphs -> " << data_path.string() << "\n";
  return 0;
}

void write_checkpoint_meta(const fs::path& ckpt, const Dataset& d) {
  json meta{{"n", d.n}, {"family", d.family}};
  write_text(ckpt.string() + ".meta.json", meta.dump(2) + "\n");
}

json history_json(const FitResult& fit) {
  json rows = json::array();
  for (const auto& e : fit.history)
    rows.push_back({{"epoch", e.epoch},
                    {"objective_before", e.objective_before},
                    {"objective_after", e.objective_after},
                    {"train_ll", e.train_ll},
                    {"val_ll", e.val_ll},
                    {"violation", e.violation}});
  return rows;
}

int cmd_train(const json& cfg, std::uint64_t seed, const fs::path& out_dir, int workers) {
  check_keys(cfg, {"dataset", "grid", "train", "checkpoint", "seed"}, "train config");
  Dataset data = load_dataset(require<std::string>(cfg, "dataset", "train config"));
  const fs::path ckpt_path = out_dir / "model.ckpt";

  json report = provenance("train", cfg, seed);
  report["dataset_n"] = data.n;

  if (cfg.contains("checkpoint")) {
    // resume: continue training an existing model with a single train config
    Model model = load_checkpoint(cfg.at("checkpoint").get<std::string>());
    TrainConfig tc = parse_train_config(cfg.value("train", json::object()), seed, workers);
    FitResult fit = gmdn::fit(model, data, tc);
    save_checkpoint(model, ckpt_path.string());
    write_checkpoint_meta(ckpt_path, data);
    save_history_csv(fit.history, (out_dir / "history.csv").string());
    report["resumed_from"] = cfg.at("checkpoint").get<std::string>();
    report["best_val_ll"] = fit.best_val_ll;
    report["epochs_run"] = fit.epochs_run;
    report["violation_rate"] = fit.violation_rate;
    report["history"] = history_json(fit);
  } else {
    if (!cfg.contains("grid") || !cfg.at("grid").is_array() || cfg.at("grid").empty())
      throw ConfigError("train config needs a non-empty 'grid' array (or 'checkpoint')");
    std::vector<GridEntry> grid;
    for (std::size_t i = 0; i < cfg.at("grid").size(); ++i) {
      const json& entry = cfg.at("grid")[i];
      check_keys(entry, {"model", "train"}, "grid entry");
      GridEntry ge;
      ge.model = parse_model_config(entry.value("model", json::object()));
      ge.train = parse_train_config(entry.value("train", json::object()),
                                    Rng(seed).split(i).next_u64(), workers);
      grid.push_back(std::move(ge));
    }
    SelectionResult sel = model_select(grid, data);
    save_checkpoint(sel.refit_model, ckpt_path.string());
    write_checkpoint_meta(ckpt_path, data);
    save_history_csv(sel.refit_result.history, (out_dir / "history.csv").string());
    report["best_grid_index"] = sel.best_index;
    report["grid_val_lls"] = sel.val_lls;
    report["best_val_ll"] = sel.best_val_ll;
    report["test_ll"] = sel.test_ll;
    report["violation_rate"] = sel.refit_result.violation_rate;
    report["history"] = history_json(sel.refit_result);
  }
  report["checkpoint"] = ckpt_path.string();

  std::ostringstream csv;
  csv << "config_hash,code_version,best_val_ll,test_ll\n"
      << report["config_hash"].get<std::string>() << "," << kCodeVersion << ","
      << report["best_val_ll"].get<double>() << ","
      << (report.contains("test_ll") ? report["test_ll"].get<double>() : std::nan("")) << "\n";
  write_report(out_dir, "train_report", report, csv.str());
  std::cout << "trained model -> " << ckpt_path.string() << "\n";
  return 0;
}

int cmd_evaluate(const json& cfg, std::uint64_t seed, const fs::path& out_dir, int workers) {
  check_keys(cfg, {"dataset", "checkpoint", "split", "baselines", "seed"}, "evaluate config");
  Dataset data = load_dataset(require<std::string>(cfg, "dataset", "evaluate config"));
  const std::string ckpt = require<std::string>(cfg, "checkpoint", "evaluate config");
  const Split split = parse_split(optional_or<std::string>(cfg, "split", "evaluate config",
                                                           std::string("test")));
  const bool baselines = optional_or(cfg, "baselines", "evaluate config", true);

  const fs::path meta_path = ckpt + ".meta.json";
  if (fs::exists(meta_path)) {
    json meta = load_config(meta_path.string());
    if (meta.value("n", data.n) != data.n)
      throw std::runtime_error("checkpoint was trained on n=" +
                               std::to_string(meta["n"].get<int>()) + " but dataset has n=" +
                               std::to_string(data.n) + " (use the transfer command)");
  }

  Model model = load_checkpoint(ckpt);
  const double model_ll = evaluate_ll(model, data, split, 512, std::max(1, workers));
  const std::size_t count = data.record_ids(split).size();

  json report = provenance("evaluate", cfg, seed);
  report["split"] = split_name(split);
  report["sample_count"] = count;
  report["model_ll"] = model_ll;

  std::ostringstream csv;
  csv << "model,mean_loglik,sample_count,config_hash,code_version\n";
  csv << "model," << model_ll << "," << count << ","
      << report["config_hash"].get<std::string>() << "," << kCodeVersion << "\n";
  if (baselines) {
    report["rand_ll"] = rand_loglik(data.n);
    std::vector<int> train_targets;
    for (std::size_t id : data.record_ids(Split::train))
      train_targets.push_back(data.records[id].target);
    HistModel hist = hist_fit(train_targets, data.n);
    double hist_ll = 0.0;
    for (std::size_t id : data.record_ids(split)) hist_ll += hist.loglik(data.records[id].target);
    hist_ll /= static_cast<double>(count);
    report["hist_ll"] = hist_ll;
    csv << "rand," << report["rand_ll"].get<double>() << "," << count << ","
        << report["config_hash"].get<std::string>() << "," << kCodeVersion << "\n";
    csv << "hist," << hist_ll << "," << count << ","
        << report["config_hash"].get<std::string>() << "," << kCodeVersion << "\n";
  }
  write_report(out_dir, "evaluate_report", report, csv.str());
  std::cout << "mean test log-lik " << model_ll << " over " << count << " samples\n";
  return 0;
}

int cmd_transfer(const json& cfg, std::uint64_t seed, const fs::path& out_dir, int workers) {
  check_keys(cfg, {"checkpoint", "datasets", "split", "seed"}, "transfer config");
  Model model = load_checkpoint(require<std::string>(cfg, "checkpoint", "transfer config"));
  const auto paths = require<std::vector<std::string>>(cfg, "datasets", "transfer config");
  const Split split = parse_split(optional_or<std::string>(cfg, "split", "transfer config",
                                                           std::string("test")));
  json report = provenance("transfer", cfg, seed);
  json rows = json::array();
  std::ostringstream csv;
  csv << "dataset,family,n,mean_loglik,rand_loglik,sample_count,config_hash,code_version\n";
  for (const std::string& path : paths) {
    Dataset data = load_dataset(path);
    const double ll = evaluate_ll(model, data, split, 512, std::max(1, workers));
    const double rand_ll = rand_loglik(data.n);
    const std::size_t count = data.record_ids(split).size();
    rows.push_back({{"dataset", path},
                    {"family", data.family},
                    {"n", data.n},
                    {"model_ll", ll},
                    {"rand_ll", rand_ll},
                    {"sample_count", count}});
    csv << path << "," << data.family << "," << data.n << "," << ll << "," << rand_ll << ","
        << count << "," << report["config_hash"].get<std::string>() << "," << kCodeVersion
        << "\n";
  }
  report["results"] = rows;
  write_report(out_dir, "transfer_report", report, csv.str());
  std::cout << "transfer evaluated on " << paths.size() << " dataset(s)\n";
  return 0;
}

int cmd_trace(const json& cfg, std::uint64_t seed, const fs::path& out_dir, int /*workers*/) {
  check_keys(cfg, {"checkpoint", "dataset", "graph_id", "gamma", "init_prob", "r0_from", "r0_to",
                   "r0_steps", "seed"},
             "trace config");
  Model model = load_checkpoint(require<std::string>(cfg, "checkpoint", "trace config"));
  Dataset data = load_dataset(require<std::string>(cfg, "dataset", "trace config"));
  const int graph_id = optional_or(cfg, "graph_id", "trace config", 0);
  if (graph_id < 0 || graph_id >= static_cast<int>(data.graphs.size()))
    throw ConfigError("trace config graph_id out of range");
  const double gamma = optional_or(cfg, "gamma", "trace config", 0.2);
  const double init_prob = optional_or(cfg, "init_prob", "trace config", 0.05);
  const double r0_from = optional_or(cfg, "r0_from", "trace config", 0.5);
  const double r0_to = optional_or(cfg, "r0_to", "trace config", 5.0);
  const int r0_steps = optional_or(cfg, "r0_steps", "trace config", 10);
  if (r0_steps < 1) throw ConfigError("trace config needs r0_steps >= 1");

  const Graph& g = data.graphs[graph_id];
  const NeighborIndex nbr(g);
  // one fixed initial mask across the sweep so only (beta, gamma) moves
  Rng rng(seed);
  std::vector<std::uint8_t> mask(g.num_nodes, 0);
  bool any = false;
  while (!any) {
    for (int v = 0; v < g.num_nodes; ++v) {
      mask[v] = rng.bernoulli(init_prob) ? 1 : 0;
      any = any || mask[v];
    }
  }

  const int c = model.cfg.components;
  std::ostringstream csv;
  csv << "r0,beta,gamma";
  for (int i = 0; i < c; ++i) csv << ",w_" << i;
  for (int i = 0; i < c; ++i) csv << ",p_" << i;
  csv << "\n";
  json rows = json::array();
  for (int k = 0; k < r0_steps; ++k) {
    const double r0 =
        r0_steps == 1 ? r0_from : r0_from + (r0_to - r0_from) * k / double(r0_steps - 1);
    SirParams params{std::min(1.0, r0 * gamma), gamma, init_prob};
    params.validate();
    Batch batch;
    batch.append(g, nbr, build_node_features(g, params, mask),
                 record_summary(SimulationRecord{graph_id, params.beta, params.gamma, mask, 0},
                                g.num_nodes),
                 g.num_nodes, 0.0);
    Tape tape;
    Forward fwd = model_forward(tape, model, batch);
    const Tensor& w = tape.val(fwd.weights);
    const Tensor& p = tape.val(fwd.comp_p);
    csv << r0 << "," << params.beta << "," << gamma;
    json row{{"r0", r0}, {"beta", params.beta}, {"gamma", gamma}};
    for (int i = 0; i < c; ++i) csv << "," << w.at(0, i);
    for (int i = 0; i < c; ++i) csv << "," << p.at(0, i);
    row["weights"] = std::vector<double>(w.v.begin(), w.v.end());
    row["p"] = std::vector<double>(p.v.begin(), p.v.end());
    rows.push_back(row);
    csv << "\n";
  }
  json report = provenance("trace", cfg, seed);
  report["graph_id"] = graph_id;
  report["rows"] = rows;
  write_report(out_dir, "trace", report, csv.str());
  std::cout << "traced " << r0_steps << " sweep points -> " << (out_dir / "trace.csv").string()
            << "\n";
  return 0;
}

std::string table2_style(double mean, double std_dev) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(1);
  os << 100.0 * mean << "(" << 100.0 * std_dev << ")";
  return os.str();
}

int cmd_reconstruct(const json& cfg, std::uint64_t seed, const fs::path& out_dir,
                    int /*workers*/) {
  check_keys(cfg, {"graph", "distance", "splits", "fractions", "components", "hidden", "layers",
                   "lr", "epochs", "patience", "seed"},
             "reconstruct config");
  if (!cfg.contains("graph")) throw ConfigError("reconstruct config needs a 'graph' object");
  Graph g = load_graph_config(cfg.at("graph"), Rng(seed).split(0).next_u64());

  ReconstructionConfig rc;
  rc.distance = parse_distance(
      optional_or<std::string>(cfg, "distance", "reconstruct config", std::string("jeffrey")));
  rc.components = optional_or(cfg, "components", "reconstruct config", rc.components);
  rc.hidden = optional_or(cfg, "hidden", "reconstruct config", rc.hidden);
  rc.layers = optional_or(cfg, "layers", "reconstruct config", rc.layers);
  rc.lr = optional_or(cfg, "lr", "reconstruct config", rc.lr);
  rc.epochs = optional_or(cfg, "epochs", "reconstruct config", rc.epochs);
  rc.patience = optional_or(cfg, "patience", "reconstruct config", rc.patience);

  const int splits = optional_or(cfg, "splits", "reconstruct config", 5);
  if (splits < 1) throw ConfigError("reconstruct config needs splits >= 1");
  std::array<double, 3> fractions{0.85, 0.05, 0.10};
  if (cfg.contains("fractions")) {
    const auto f = require<std::vector<double>>(cfg, "fractions", "reconstruct config");
    if (f.size() != 3) throw ConfigError("reconstruct fractions must have 3 entries");
    std::copy(f.begin(), f.end(), fractions.begin());
  }

  std::vector<double> aucs, aps;
  json rows = json::array();
  for (int s = 0; s < splits; ++s) {
    Rng stream = Rng(seed).split(100 + s);
    LinkSplit split = make_link_split(g, fractions, stream.next_u64());
    rc.seed = stream.next_u64();
    ReconstructionResult res = fit_reconstruction(g, split, rc);
    aucs.push_back(res.test_auc);
    aps.push_back(res.test_ap);
    rows.push_back({{"split", s},
                    {"test_auc", res.test_auc},
                    {"test_ap", res.test_ap},
                    {"best_val_auc", res.best_val_auc},
                    {"epochs_run", res.epochs_run}});
  }
  auto mean_std = [](const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return std::pair<double, double>(mean, std::sqrt(var));
  };
  auto [auc_mean, auc_std] = mean_std(aucs);
  auto [ap_mean, ap_std] = mean_std(aps);

  json report = provenance("reconstruct", cfg, seed);
  report["splits"] = rows;
  report["auc_mean"] = auc_mean;
  report["auc_std"] = auc_std;
  report["ap_mean"] = ap_mean;
  report["ap_std"] = ap_std;
  report["auc"] = table2_style(auc_mean, auc_std);
  report["ap"] = table2_style(ap_mean, ap_std);

  std::ostringstream csv;
  csv << "metric,mean,std,formatted,config_hash,code_version\n";
  csv << "auc," << auc_mean << "," << auc_std << "," << table2_style(auc_mean, auc_std) << ","
      << report["config_hash"].get<std::string>() << "," << kCodeVersion << "\n";
  csv << "ap," << ap_mean << "," << ap_std << "," << table2_style(ap_mean, ap_std) << ","
      << report["config_hash"].get<std::string>() << "," << kCodeVersion << "\n";
  write_report(out_dir, "reconstruct_report", report, csv.str());
  std::cout << "reconstruction AUC " << table2_style(auc_mean, auc_std) << " AP "
            << table2_style(ap_mean, ap_std) << " over " << splits << " split(s)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph mixture density network experiment harness"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".";
  std::int64_t seed_flag = -1;
  int workers = 0;  // 0 = take from config

  for (const char* verb : {"generate", "train", "evaluate", "transfer", "trace", "reconstruct"}) {
    CLI::App* sub = app.add_subcommand(verb);
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--seed", seed_flag, "overrides the config seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--workers", workers, "overrides config worker counts");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    json cfg = load_config(config_path);
    std::uint64_t seed = cfg.value("seed", std::uint64_t{0});
    if (seed_flag >= 0) seed = static_cast<std::uint64_t>(seed_flag);
    fs::create_directories(out_dir);
    const std::string verb = app.get_subcommands().front()->get_name();
    if (verb == "generate") return cmd_generate(cfg, seed, out_dir, workers);
    if (verb == "train") return cmd_train(cfg, seed, out_dir, workers);
    if (verb == "evaluate") return cmd_evaluate(cfg, seed, out_dir, workers);
    if (verb == "transfer") return cmd_transfer(cfg, seed, out_dir, workers);
    if (verb == "trace") return cmd_trace(cfg, seed, out_dir, workers);
    if (verb == "reconstruct") return cmd_reconstruct(cfg, seed, out_dir, workers);
    std::cerr << "error: unknown command " << verb << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
