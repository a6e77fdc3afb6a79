// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <array>
#include <utility>
#include <vector>

#include "gmdn/distances.hpp"
#include "gmdn/model.hpp"

namespace gmdn {

// Bootstrap link split: positive edges partitioned by fraction, negatives
// sampled as directed non-adjacent pairs, count-matched per split and
// disjoint across splits.
struct LinkSplit {
  std::vector<std::pair<int, int>> pos[3];  // indexed by Split
  std::vector<std::pair<int, int>> neg[3];
};

LinkSplit make_link_split(const Graph& g, const std::array<double, 3>& fractions,
                          std::uint64_t seed);

// Rank-based AUC (Mann-Whitney with tie averaging) and average precision.
std::pair<double, double> auc_ap(const std::vector<double>& scores,
                                 const std::vector<int>& labels);

enum class DistanceKind { l2, jeffrey, bhattacharyya };

// Tape-built distances between the node mixtures at pair endpoints; the
// result is a (P x 1) node usable inside a training loss.
NodeId pair_distances(Tape& tape, const Forward& fwd,
                      const std::vector<std::pair<int, int>>& pairs, DistanceKind kind);

struct ReconstructionConfig {
  DistanceKind distance = DistanceKind::jeffrey;
  int components = 5;
  int hidden = 64;
  int layers = 1;  // GCN per the reconstruction setup
  double lr = 0.01;
  int epochs = 500;
  int patience = 50;
  std::uint64_t seed = 0;
};

struct ReconstructionResult {
  double test_auc = 0.0;
  double test_ap = 0.0;
  double best_val_auc = 0.0;
  int epochs_run = 0;
  Model model;
};

// Node-level Gaussian-mixture model trained by gradient descent on the L1
// distance loss over train pairs, early-stopped on validation AUC. Uses the
// graph's features, or one-hot identity features when it has none.
ReconstructionResult fit_reconstruction(const Graph& g, const LinkSplit& split,
                                        const ReconstructionConfig& cfg);

// Scores (probabilities via 1/(1+d)) and labels for a split's pairs.
std::pair<std::vector<double>, std::vector<int>> score_pairs(const Model& model, const Graph& g,
                                                             const LinkSplit& split, Split which,
                                                             DistanceKind kind);

}  // namespace gmdn
