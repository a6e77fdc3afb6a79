// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <map>
#include <string>
#include <vector>

#include "gmdn/graph.hpp"
#include "gmdn/mixture.hpp"
#include "gmdn/optim.hpp"
#include "gmdn/sir.hpp"
#include "gmdn/tape.hpp"

namespace gmdn {

enum class ConvKind { gin, gcn, dense };  // dense = structure-blind MDN encoder
enum class ReadoutKind { sum, mean };
enum class Level { graph, node };

struct ModelConfig {
  ConvKind conv = ConvKind::gin;
  int layers = 2;
  int hidden = 64;
  int components = 5;
  Family family = Family::binomial;
  ReadoutKind readout = ReadoutKind::sum;
  Level level = Level::graph;
  std::vector<double> alpha;  // Dirichlet prior, length = components
  int input_dim = 5;
  bool concat_layers = false;  // readout consumes all layer states concatenated

  void validate() const;
};

// A set of graphs (or structure-blind summaries) flattened into one batch.
struct Batch {
  Tensor node_x;                   // N x F node features
  std::vector<int> edge_src, edge_dst;  // directed, both orientations
  std::vector<int> gcn_src, gcn_dst;    // incl. self loops
  std::vector<double> gcn_coef;         // 1/sqrt((deg_u+1)(deg_v+1))
  std::vector<int> node_graph;          // node -> sample index
  int num_samples = 0;
  int num_nodes = 0;
  Tensor summary;                // B x 5, structure-blind record summaries
  std::vector<double> trials;    // per sample: binomial n
  std::vector<double> target;    // per sample

  // Appends one (graph, features, target) sample.
  void append(const Graph& g, const NeighborIndex& nbr, const Tensor& features,
              const std::vector<double>& summary_row, double trials_n, double y);
};

Batch build_batch(const Dataset& d, const std::vector<std::size_t>& record_ids);

struct Model {
  ModelConfig cfg;
  ParamStore params;

  static Model init(const ModelConfig& cfg, std::uint64_t seed);
};

// One forward pass on a tape. Graph-level: log_weights/log_pmf are B x C and
// per_sample_ll is B x 1. Node-level: log_weights/mu/sigma are N x C and the
// pmf/ll nodes are unset (-1).
struct Forward {
  std::map<std::string, NodeId> param_ids;
  NodeId node_states = -1;
  NodeId log_weights = -1;
  NodeId weights = -1;      // softmax, same rows as log_weights
  NodeId comp_p = -1;       // binomial p or gaussian mu
  NodeId comp_sigma = -1;   // gaussian only
  NodeId log_pmf = -1;      // per-component log density at the target
  NodeId per_sample_ll = -1;
  NodeId marginal_ll = -1;  // scalar sum over samples
};

Forward model_forward(Tape& tape, const Model& model, const Batch& batch);

// Per-sample mixtures extracted from a graph-level forward pass.
std::vector<MixtureOutput> extract_mixtures(const Tape& tape, const Forward& fwd,
                                            const Batch& batch, Family family);

// Collects d(root)/d(param) for every parameter after tape.backward().
std::map<std::string, Tensor> collect_grads(const Tape& tape, const Forward& fwd);

// Dirichlet prior contribution on the tape: sum over rows of
// (alpha_i - 1) log w_i. The (constant) log normalizer is excluded here and
// added by callers when reporting objective values.
NodeId dirichlet_term(Tape& tape, NodeId log_weights, const std::vector<double>& alpha);

// Checkpoint round-trip (exact values, config included).
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

std::string family_name(Family f);
std::string conv_name(ConvKind k);

}  // namespace gmdn
