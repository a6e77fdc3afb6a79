// Apache License, Version 2.0, refer to LICENSE.txt
#include "gmdn/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

namespace gmdn {

namespace {
using nlohmann::json;
constexpr int kCheckpointVersion = 1;
}  // namespace

std::string family_name(Family f) { return f == Family::binomial ? "binomial" : "gaussian"; }
std::string conv_name(ConvKind k) {
  switch (k) {
    case ConvKind::gin: return "gin";
    case ConvKind::gcn: return "gcn";
    case ConvKind::dense: return "dense";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (layers < 1) throw std::invalid_argument("layers must be >= 1");
  if (hidden < 1) throw std::invalid_argument("hidden must be >= 1");
  if (components < 1) throw std::invalid_argument("components must be >= 1");
  if (input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
  if (!alpha.empty() && static_cast<int>(alpha.size()) != components)
    throw std::invalid_argument("alpha length must equal components");
  for (double a : alpha)
    if (a <= 0.0) throw std::invalid_argument("alpha entries must be positive");
  if (level == Level::node && conv == ConvKind::dense)
    throw std::invalid_argument("node-level model needs a graph encoder");
}

void Batch::append(const Graph& g, const NeighborIndex& nbr, const Tensor& features,
                   const std::vector<double>& summary_row, double trials_n, double y) {
  const int offset = num_nodes;
  const int n = g.num_nodes;
  if (features.rows() != n) throw std::invalid_argument("Batch::append: feature rows != n");

  if (node_x.v.empty()) {
    node_x = features;
  } else {
    if (node_x.cols() != features.cols())
      throw std::invalid_argument("Batch::append: feature width mismatch");
    node_x.shape[0] += n;
    node_x.v.insert(node_x.v.end(), features.v.begin(), features.v.end());
  }
  for (auto [u, v] : g.edges) {
    edge_src.push_back(offset + u);
    edge_dst.push_back(offset + v);
    edge_src.push_back(offset + v);
    edge_dst.push_back(offset + u);
  }
  for (int v = 0; v < n; ++v) {
    const double dv = nbr.degree(v) + 1.0;
    gcn_src.push_back(offset + v);  // self loop
    gcn_dst.push_back(offset + v);
    gcn_coef.push_back(1.0 / dv);
    for (int u : nbr.neighbors[v]) {
      gcn_src.push_back(offset + u);
      gcn_dst.push_back(offset + v);
      gcn_coef.push_back(1.0 / std::sqrt(dv * (nbr.degree(u) + 1.0)));
    }
    node_graph.push_back(num_samples);
  }
  if (summary.v.empty()) {
    summary = Tensor::zeros(0, static_cast<int>(summary_row.size()));
  }
  summary.shape[0] += 1;
  summary.v.insert(summary.v.end(), summary_row.begin(), summary_row.end());
  trials.push_back(trials_n);
  target.push_back(y);
  num_nodes += n;
  num_samples += 1;
}

Batch build_batch(const Dataset& d, const std::vector<std::size_t>& record_ids) {
  Batch b;
  std::unordered_map<int, NeighborIndex> nbr_cache;
  for (std::size_t ri : record_ids) {
    const SimulationRecord& rec = d.records[ri];
    const Graph& g = d.graphs[rec.graph_id];
    auto it = nbr_cache.find(rec.graph_id);
    if (it == nbr_cache.end()) it = nbr_cache.emplace(rec.graph_id, NeighborIndex(g)).first;
    SirParams p;
    p.beta = rec.beta;
    p.gamma = rec.gamma;
    b.append(g, it->second, build_node_features(g, p, rec.initial_mask),
             record_summary(rec, g.num_nodes), g.num_nodes, rec.target);
  }
  return b;
}

Model Model::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model m;
  m.cfg = cfg;
  if (m.cfg.alpha.empty()) m.cfg.alpha.assign(cfg.components, 1.0);  // uniform prior
  Rng rng(seed);
  int in = cfg.input_dim;
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string pfx = "enc.l" + std::to_string(l) + ".";
    switch (cfg.conv) {
      case ConvKind::gin:
        m.params.add(pfx + "eps", Tensor::zeros(1, 1));
        m.params.add_linear(pfx + "mlp1.W", in, cfg.hidden, rng);
        m.params.add(pfx + "mlp1.b", Tensor::zeros(1, cfg.hidden));
        m.params.add_linear(pfx + "mlp2.W", cfg.hidden, cfg.hidden, rng);
        m.params.add(pfx + "mlp2.b", Tensor::zeros(1, cfg.hidden));
        break;
      case ConvKind::gcn:
      case ConvKind::dense:
        m.params.add_linear(pfx + "W", in, cfg.hidden, rng);
        m.params.add(pfx + "b", Tensor::zeros(1, cfg.hidden));
        break;
    }
    in = cfg.hidden;
  }
  const int head_in = cfg.concat_layers ? cfg.layers * cfg.hidden : cfg.hidden;
  const int c = cfg.components;
  m.params.add_linear("gate.W", head_in, c, rng);
  m.params.add("gate.b", Tensor::zeros(1, c));
  if (cfg.family == Family::binomial) {
    m.params.add_linear("head.p.W", head_in, c, rng);
    m.params.add("head.p.b", Tensor::zeros(1, c));
  } else {
    m.params.add_linear("head.mu.W", head_in, c, rng);
    m.params.add("head.mu.b", Tensor::zeros(1, c));
    m.params.add_linear("head.sigma.W", head_in, c, rng);
    m.params.add("head.sigma.b", Tensor::zeros(1, c));
  }
  return m;
}

namespace {

// linear layer on the tape
NodeId linear(Tape& t, NodeId x, NodeId w, NodeId b) { return t.add(t.matmul(x, w), b); }

}  // namespace

Forward model_forward(Tape& tape, const Model& model, const Batch& batch) {
  const ModelConfig& cfg = model.cfg;
  Forward fwd;
  for (const auto& [name, e] : model.params.entries)
    fwd.param_ids[name] = tape.param(e.value);
  auto P = [&](const std::string& name) { return fwd.param_ids.at(name); };

  NodeId h;
  if (cfg.conv == ConvKind::dense) {
    h = tape.constant(batch.summary);
  } else {
    h = tape.constant(batch.node_x);
  }
  const int n_nodes = batch.num_nodes;
  NodeId concat_states = -1;
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string pfx = "enc.l" + std::to_string(l) + ".";
    switch (cfg.conv) {
      case ConvKind::gin: {
        NodeId nbr_sum = tape.edge_weighted_sum(h, batch.edge_src, batch.edge_dst, {}, n_nodes);
        NodeId eps1 = tape.affine(P(pfx + "eps"), 1.0, 1.0);
        NodeId z = tape.add(tape.mul(h, eps1), nbr_sum);
        NodeId a = tape.relu(linear(tape, z, P(pfx + "mlp1.W"), P(pfx + "mlp1.b")));
        h = linear(tape, a, P(pfx + "mlp2.W"), P(pfx + "mlp2.b"));
        break;
      }
      case ConvKind::gcn: {
        NodeId hw = tape.matmul(h, P(pfx + "W"));
        NodeId agg =
            tape.edge_weighted_sum(hw, batch.gcn_src, batch.gcn_dst, batch.gcn_coef, n_nodes);
        h = tape.relu(tape.add(agg, P(pfx + "b")));
        break;
      }
      case ConvKind::dense: {
        h = tape.relu(linear(tape, h, P(pfx + "W"), P(pfx + "b")));
        break;
      }
    }
    if (cfg.concat_layers) concat_states = l == 0 ? h : tape.concat_cols(concat_states, h);
  }
  if (cfg.concat_layers) h = concat_states;
  fwd.node_states = h;

  // per-head readout: node-wise linear map, then permutation-invariant
  // aggregation per sample (identity for dense / node-level outputs)
  auto readout = [&](const std::string& w, const std::string& b) {
    NodeId node_out = linear(tape, h, P(w), P(b));
    if (cfg.conv == ConvKind::dense || cfg.level == Level::node) return node_out;
    return cfg.readout == ReadoutKind::sum
               ? tape.segment_sum(node_out, batch.node_graph, batch.num_samples)
               : tape.segment_mean(node_out, batch.node_graph, batch.num_samples);
  };

  NodeId gate_logits = readout("gate.W", "gate.b");
  fwd.log_weights = tape.log_softmax_rows(gate_logits);
  fwd.weights = tape.softmax_rows(gate_logits);

  if (cfg.family == Family::binomial) {
    NodeId p_logits = readout("head.p.W", "head.p.b");
    fwd.comp_p = tape.affine(tape.sigmoid(p_logits), 1.0 - 2.0 * kPFloor, kPFloor);
  } else {
    fwd.comp_p = readout("head.mu.W", "head.mu.b");
    fwd.comp_sigma =
        tape.affine(tape.softplus(readout("head.sigma.W", "head.sigma.b")), 1.0, kSigmaFloor);
  }

  if (cfg.level == Level::node) return fwd;  // reconstruction path stops here

  // per-component log density of the observed target
  const int b_rows = batch.num_samples;
  Tensor ycol = Tensor::zeros(b_rows, 1);
  for (int i = 0; i < b_rows; ++i) ycol.v[i] = batch.target[i];
  NodeId y = tape.constant(ycol);

  if (cfg.family == Family::binomial) {
    Tensor nmy = Tensor::zeros(b_rows, 1);       // trials - y
    Tensor log_comb = Tensor::zeros(b_rows, 1);  // log C(n, y), constant per sample
    for (int i = 0; i < b_rows; ++i) {
      const double n = batch.trials[i], yy = batch.target[i];
      nmy.v[i] = n - yy;
      log_comb.v[i] = std::lgamma(n + 1.0) - std::lgamma(yy + 1.0) - std::lgamma(n - yy + 1.0);
    }
    NodeId term1 = tape.mul(y, tape.log_(fwd.comp_p));
    NodeId term2 = tape.mul(tape.constant(nmy), tape.log_(tape.affine(fwd.comp_p, -1.0, 1.0)));
    fwd.log_pmf = tape.add(tape.add(term1, term2), tape.constant(log_comb));
  } else {
    NodeId z = tape.div(tape.sub(y, fwd.comp_p), fwd.comp_sigma);
    NodeId quad = tape.affine(tape.mul(z, z), -0.5, -0.5 * std::log(2.0 * M_PI));
    fwd.log_pmf = tape.sub(quad, tape.log_(fwd.comp_sigma));
  }

  fwd.per_sample_ll = tape.logsumexp_rows(tape.add(fwd.log_weights, fwd.log_pmf));
  fwd.marginal_ll = tape.sum_all(fwd.per_sample_ll);
  return fwd;
}

std::vector<MixtureOutput> extract_mixtures(const Tape& tape, const Forward& fwd,
                                            const Batch& batch, Family family) {
  const Tensor& w = tape.val(fwd.weights);
  const Tensor& p1 = tape.val(fwd.comp_p);
  const int c = w.cols();
  std::vector<MixtureOutput> out(batch.num_samples);
  for (int i = 0; i < batch.num_samples; ++i) {
    MixtureOutput& m = out[i];
    m.family = family;
    m.weights.resize(c);
    for (int j = 0; j < c; ++j) m.weights[j] = w.at(i, j);
    if (family == Family::binomial) {
      m.trials = static_cast<int>(batch.trials[i]);
      m.p.resize(c);
      for (int j = 0; j < c; ++j) m.p[j] = p1.at(i, j);
    } else {
      const Tensor& sg = tape.val(fwd.comp_sigma);
      m.mu.resize(c);
      m.sigma.resize(c);
      for (int j = 0; j < c; ++j) {
        m.mu[j] = p1.at(i, j);
        m.sigma[j] = sg.at(i, j);
      }
    }
  }
  return out;
}

std::map<std::string, Tensor> collect_grads(const Tape& tape, const Forward& fwd) {
  std::map<std::string, Tensor> grads;
  for (const auto& [name, id] : fwd.param_ids) grads[name] = tape.grad(id);
  return grads;
}

NodeId dirichlet_term(Tape& tape, NodeId log_weights, const std::vector<double>& alpha) {
  Tensor am1 = Tensor::row(alpha);
  for (double& a : am1.v) a -= 1.0;
  return tape.sum_all(tape.mul(tape.constant(am1), log_weights));
}

// ---- checkpoint io ----

namespace {

json tensor_to_json(const Tensor& t) { return json{{"shape", t.shape}, {"values", t.v}}; }

Tensor tensor_from_json(const json& j) {
  Tensor t;
  t.shape = j.at("shape").get<std::vector<int>>();
  t.v = j.at("values").get<std::vector<double>>();
  std::size_t expect = 1;
  for (int s : t.shape) expect *= static_cast<std::size_t>(s);
  if (t.v.size() != expect) throw std::runtime_error("checkpoint tensor shape/value mismatch");
  return t;
}

json config_to_json(const ModelConfig& c) {
  return json{{"conv", conv_name(c.conv)},
              {"layers", c.layers},
              {"hidden", c.hidden},
              {"components", c.components},
              {"family", family_name(c.family)},
              {"readout", c.readout == ReadoutKind::sum ? "sum" : "mean"},
              {"level", c.level == Level::graph ? "graph" : "node"},
              {"alpha", c.alpha},
              {"input_dim", c.input_dim},
              {"concat_layers", c.concat_layers}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  const std::string conv = j.at("conv").get<std::string>();
  if (conv == "gin")
    c.conv = ConvKind::gin;
  else if (conv == "gcn")
    c.conv = ConvKind::gcn;
  else if (conv == "dense")
    c.conv = ConvKind::dense;
  else
    throw std::runtime_error("unknown conv kind '" + conv + "'");
  c.layers = j.at("layers").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.components = j.at("components").get<int>();
  c.family = j.at("family").get<std::string>() == "binomial" ? Family::binomial : Family::gaussian;
  c.readout = j.at("readout").get<std::string>() == "sum" ? ReadoutKind::sum : ReadoutKind::mean;
  c.level = j.at("level").get<std::string>() == "graph" ? Level::graph : Level::node;
  c.alpha = j.at("alpha").get<std::vector<double>>();
  c.input_dim = j.at("input_dim").get<int>();
  c.concat_layers = j.at("concat_layers").get<bool>();
  return c;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  json j = {{"format", "gmdn-checkpoint"},
            {"version", kCheckpointVersion},
            {"config", config_to_json(model.cfg)},
            {"step", model.params.step}};
  json params = json::object();
  for (const auto& [name, e] : model.params.entries)
    params[name] = {{"value", tensor_to_json(e.value)},
                    {"m", tensor_to_json(e.m)},
                    {"v", tensor_to_json(e.v)}};
  j["params"] = std::move(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << j.dump() << '\n';
  if (!out) throw std::runtime_error("write error on '" + path + "'");
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("failed to parse checkpoint '" + path + "': " + e.what());
  }
  if (j.value("format", "") != "gmdn-checkpoint")
    throw std::runtime_error("'" + path + "' is not a gmdn checkpoint");
  if (j.value("version", -1) != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version in '" + path + "'");
  Model m;
  m.cfg = config_from_json(j.at("config"));
  m.params.step = j.at("step").get<long>();
  for (const auto& [name, pj] : j.at("params").items()) {
    ParamStore::Entry e;
    e.value = tensor_from_json(pj.at("value"));
    e.m = tensor_from_json(pj.at("m"));
    e.v = tensor_from_json(pj.at("v"));
    m.params.entries.emplace(name, std::move(e));
  }
  return m;
}

}  // namespace gmdn
