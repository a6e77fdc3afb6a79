// Apache License, Version 2.0, refer to LICENSE.txt
#include "gmdn/linkpred.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace gmdn {

LinkSplit make_link_split(const Graph& g, const std::array<double, 3>& fractions,
                          std::uint64_t seed) {
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9)
    throw std::invalid_argument("make_link_split: fractions must sum to 1");
  Rng rng(seed);

  std::vector<std::pair<int, int>> edges = g.edges;
  for (std::size_t i = edges.size(); i > 1; --i)
    std::swap(edges[i - 1], edges[rng.next_below(i)]);

  const std::size_t total = edges.size();
  const std::size_t n_train = static_cast<std::size_t>(std::llround(fractions[0] * total));
  const std::size_t n_val = static_cast<std::size_t>(std::llround(fractions[1] * total));

  LinkSplit split;
  for (std::size_t i = 0; i < total; ++i) {
    const int s = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
    split.pos[s].push_back(edges[i]);
  }

  std::set<std::pair<int, int>> adjacent;
  for (auto [u, v] : g.edges) {
    adjacent.insert({u, v});
    adjacent.insert({v, u});
  }
  std::set<std::pair<int, int>> used;
  const std::uint64_t n = g.num_nodes;
  for (int s = 0; s < 3; ++s) {
    std::size_t attempts = 0;
    const std::size_t cap = 1000 * (split.pos[s].size() + 1);
    while (split.neg[s].size() < split.pos[s].size()) {
      if (++attempts > cap)
        throw std::runtime_error(
            "make_link_split: graph too dense to sample enough negative pairs");
      const int u = static_cast<int>(rng.next_below(n));
      const int v = static_cast<int>(rng.next_below(n));
      if (u == v) continue;
      const std::pair<int, int> pr{u, v};  // negatives are directed
      if (adjacent.count(pr) || used.count(pr)) continue;
      used.insert(pr);
      split.neg[s].push_back(pr);
    }
  }
  return split;
}

std::pair<double, double> auc_ap(const std::vector<double>& scores,
                                 const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("auc_ap: misaligned inputs");
  const std::size_t total = scores.size();
  std::size_t num_pos = 0;
  for (int l : labels) num_pos += l == 1 ? 1 : 0;
  if (num_pos == 0 || num_pos == total)
    throw std::invalid_argument("auc_ap: need at least one positive and one negative");

  // AUC: tie-averaged ranks of the positive scores
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(total);
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    while (j < total && scores[order[j]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j - 1) + 1.0;  // 1-based
    for (std::size_t k = i; k < j; ++k) rank[order[k]] = avg;
    i = j;
  }
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < total; ++i)
    if (labels[i] == 1) rank_sum += rank[i];
  const double num_neg = static_cast<double>(total - num_pos);
  const double auc =
      (rank_sum - 0.5 * num_pos * (num_pos + 1.0)) / (static_cast<double>(num_pos) * num_neg);

  // AP: precision at each true positive, descending scores (stable order)
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double ap = 0.0;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < total; ++i)
    if (labels[order[i]] == 1) {
      ++tp;
      ap += static_cast<double>(tp) / static_cast<double>(i + 1);
    }
  ap /= static_cast<double>(num_pos);
  return {auc, ap};
}

namespace {

struct PairCols {
  NodeId w, mu, sigma;  // each P x C, endpoint rows gathered
};

NodeId gaussian_kl_node(Tape& t, const PairCols& a, const PairCols& b) {
  NodeId d = t.sub(a.mu, b.mu);
  NodeId ratio = t.div(t.add(t.mul(a.sigma, a.sigma), t.mul(d, d)),
                       t.mul(b.sigma, b.sigma));
  return t.add(t.sub(t.log_(b.sigma), t.log_(a.sigma)), t.affine(ratio, 0.5, -0.5));
}

}  // namespace

NodeId pair_distances(Tape& tape, const Forward& fwd,
                      const std::vector<std::pair<int, int>>& pairs, DistanceKind kind) {
  std::vector<int> us, vs;
  us.reserve(pairs.size());
  vs.reserve(pairs.size());
  for (auto [u, v] : pairs) {
    us.push_back(u);
    vs.push_back(v);
  }
  PairCols a{tape.gather_rows(fwd.weights, us), tape.gather_rows(fwd.comp_p, us),
             tape.gather_rows(fwd.comp_sigma, us)};
  PairCols b{tape.gather_rows(fwd.weights, vs), tape.gather_rows(fwd.comp_p, vs),
             tape.gather_rows(fwd.comp_sigma, vs)};

  switch (kind) {
    case DistanceKind::jeffrey: {
      NodeId terms = tape.add(tape.mul(a.w, gaussian_kl_node(tape, a, b)),
                              tape.mul(b.w, gaussian_kl_node(tape, b, a)));
      return tape.affine(tape.sum_rows(terms), 0.5, 0.0);
    }
    case DistanceKind::bhattacharyya: {
      NodeId d = tape.sub(a.mu, b.mu);
      NodeId s = tape.add(tape.mul(a.sigma, a.sigma), tape.mul(b.sigma, b.sigma));
      NodeId quad = tape.affine(tape.div(tape.mul(d, d), s), 0.25, 0.0);
      NodeId logterm = tape.affine(
          tape.sub(tape.log_(s), tape.log_(tape.affine(tape.mul(a.sigma, b.sigma), 2.0, 0.0))),
          0.5, 0.0);
      NodeId bd = tape.add(quad, logterm);
      return tape.sum_rows(tape.mul(tape.affine(tape.add(a.w, b.w), 0.5, 0.0), bd));
    }
    case DistanceKind::l2: {
      // pairwise Gaussian overlap terms; quadratic in C
      auto cross = [&](const PairCols& x, const PairCols& y) {
        const int c = tape.val(x.w).cols();
        NodeId acc = -1;
        for (int i = 0; i < c; ++i)
          for (int j = 0; j < c; ++j) {
            NodeId wi = tape.slice_col(x.w, i);
            NodeId wj = tape.slice_col(y.w, j);
            NodeId si = tape.slice_col(x.sigma, i);
            NodeId sj = tape.slice_col(y.sigma, j);
            NodeId var = tape.add(tape.mul(si, si), tape.mul(sj, sj));
            NodeId d = tape.sub(tape.slice_col(x.mu, i), tape.slice_col(y.mu, j));
            NodeId expo = tape.exp_(tape.affine(tape.div(tape.mul(d, d), var), -0.5, 0.0));
            NodeId pdf = tape.div(expo, tape.sqrt_(tape.affine(var, 2.0 * M_PI, 0.0)));
            NodeId term = tape.mul(tape.mul(wi, wj), pdf);
            acc = acc < 0 ? term : tape.add(acc, term);
          }
        return acc;
      };
      NodeId pp = cross(a, a);
      NodeId qq = cross(b, b);
      NodeId pq = cross(a, b);
      // relu clamps round-off noise below zero at identical endpoints
      return tape.relu(tape.add(tape.sub(pp, tape.affine(pq, 2.0, 0.0)), qq));
    }
  }
  throw std::logic_error("pair_distances: unknown distance kind");
}

namespace {

Batch single_graph_batch(const Graph& g) {
  Graph local = g;
  if (local.features.empty()) {
    local.features.assign(g.num_nodes, std::vector<double>(g.num_nodes, 0.0));
    for (int v = 0; v < g.num_nodes; ++v) local.features[v][v] = 1.0;  // one-hot identity
  }
  Tensor x = Tensor::zeros(local.num_nodes, local.feature_width());
  for (int v = 0; v < local.num_nodes; ++v)
    for (int j = 0; j < local.feature_width(); ++j) x.at(v, j) = local.features[v][j];
  Batch b;
  b.append(local, NeighborIndex(local), x, std::vector<double>(5, 0.0), local.num_nodes, 0.0);
  return b;
}

std::pair<std::vector<double>, std::vector<int>> pairs_and_labels(const LinkSplit& split,
                                                                  Split which,
                                                                  std::vector<std::pair<int, int>>* out) {
  const int s = static_cast<int>(which);
  std::vector<int> labels;
  for (auto pr : split.pos[s]) {
    out->push_back(pr);
    labels.push_back(1);
  }
  for (auto pr : split.neg[s]) {
    out->push_back(pr);
    labels.push_back(0);
  }
  return {std::vector<double>(), labels};
}

std::vector<double> eval_distances(const Model& model, const Batch& batch,
                                   const std::vector<std::pair<int, int>>& pairs,
                                   DistanceKind kind) {
  Tape tape;
  Forward fwd = model_forward(tape, model, batch);
  NodeId d = pair_distances(tape, fwd, pairs, kind);
  return tape.val(d).v;
}

}  // namespace

std::pair<std::vector<double>, std::vector<int>> score_pairs(const Model& model, const Graph& g,
                                                             const LinkSplit& split, Split which,
                                                             DistanceKind kind) {
  Batch batch = single_graph_batch(g);
  std::vector<std::pair<int, int>> pairs;
  auto [unused, labels] = pairs_and_labels(split, which, &pairs);
  std::vector<double> distances = eval_distances(model, batch, pairs, kind);
  std::vector<double> scores(distances.size());
  for (std::size_t i = 0; i < distances.size(); ++i)
    scores[i] = distance_to_probability(std::max(0.0, distances[i]));
  return {scores, labels};
}

ReconstructionResult fit_reconstruction(const Graph& g, const LinkSplit& split,
                                        const ReconstructionConfig& cfg) {
  Batch batch = single_graph_batch(g);

  ModelConfig mc;
  mc.conv = ConvKind::gcn;
  mc.layers = cfg.layers;
  mc.hidden = cfg.hidden;
  mc.components = cfg.components;
  mc.family = Family::gaussian;
  mc.level = Level::node;
  mc.input_dim = batch.node_x.cols();
  Model model = Model::init(mc, cfg.seed);

  std::vector<std::pair<int, int>> train_pairs, val_pairs;
  auto [u0, train_labels] = pairs_and_labels(split, Split::train, &train_pairs);
  auto [u1, val_labels] = pairs_and_labels(split, Split::val, &val_pairs);

  Tensor target = Tensor::zeros(static_cast<int>(train_pairs.size()), 1);
  for (std::size_t i = 0; i < train_labels.size(); ++i)
    target.v[i] = train_labels[i] == 1 ? 0.0 : 2.0;

  const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};
  ReconstructionResult result;
  result.best_val_auc = -1.0;
  ParamStore best = model.params;
  // Early stopping tracks the validation AUC; the validation L1 loss breaks
  // ties because the AUC on a small pair set is a step function.
  double best_val_loss = std::numeric_limits<double>::infinity();
  int wait = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Tape tape;
    Forward fwd = model_forward(tape, model, batch);
    NodeId d = pair_distances(tape, fwd, train_pairs, cfg.distance);
    NodeId loss = tape.affine(tape.sum_all(tape.abs_(tape.sub(d, tape.constant(target)))),
                              1.0 / static_cast<double>(train_pairs.size()), 0.0);
    tape.backward(loss);
    adam_step(model.params, collect_grads(tape, fwd), adam);

    std::vector<double> vd = eval_distances(model, batch, val_pairs, cfg.distance);
    std::vector<double> vscores(vd.size());
    double val_loss = 0.0;
    for (std::size_t i = 0; i < vd.size(); ++i) {
      const double clamped = std::max(0.0, vd[i]);
      vscores[i] = distance_to_probability(clamped);
      val_loss += std::abs(clamped - (val_labels[i] == 1 ? 0.0 : 2.0));
    }
    val_loss /= static_cast<double>(vd.size());
    const double val_auc = auc_ap(vscores, val_labels).first;
    result.epochs_run = epoch;
    if (val_auc > result.best_val_auc ||
        (val_auc == result.best_val_auc && val_loss < best_val_loss)) {
      result.best_val_auc = val_auc;
      best_val_loss = val_loss;
      best = model.params;
      wait = 0;
    } else if (++wait > cfg.patience) {
      break;
    }
  }
  model.params = std::move(best);

  auto [test_scores, test_labels] = score_pairs(model, g, split, Split::test, cfg.distance);
  auto [auc, ap] = auc_ap(test_scores, test_labels);
  result.test_auc = auc;
  result.test_ap = ap;
  result.model = std::move(model);
  return result;
}

}  // namespace gmdn
