// Apache License, Version 2.0, refer to LICENSE.txt
#include "gmdn/graph.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>

namespace gmdn {

void Graph::validate() const {
  if (num_nodes <= 0) throw std::invalid_argument("graph must have at least one node");
  std::set<std::pair<int, int>> seen;
  for (auto [u, v] : edges) {
    if (u == v) throw std::invalid_argument("self-loop at node " + std::to_string(u));
    if (u < 0 || v < 0 || u >= num_nodes || v >= num_nodes)
      throw std::invalid_argument("edge endpoint out of range");
    auto key = std::minmax(u, v);
    if (!seen.insert({key.first, key.second}).second)
      throw std::invalid_argument("duplicate edge");
  }
  if (!features.empty()) {
    if (static_cast<int>(features.size()) != num_nodes)
      throw std::invalid_argument("feature row count != num_nodes");
    const std::size_t w = features[0].size();
    for (const auto& row : features)
      if (row.size() != w) throw std::invalid_argument("ragged feature matrix");
  }
}

NeighborIndex::NeighborIndex(const Graph& g) : neighbors(g.num_nodes) {
  for (auto [u, v] : g.edges) {
    neighbors[u].push_back(v);
    neighbors[v].push_back(u);
  }
  for (auto& lst : neighbors) std::sort(lst.begin(), lst.end());
}

Graph generate_ba(int n, int m, std::uint64_t seed) {
  if (m < 1 || m >= n) throw std::invalid_argument("generate_ba requires 1 <= m < n");
  Rng rng(seed);
  Graph g;
  g.num_nodes = n;
  // repeated endpoints: each node appears once per incident edge, giving
  // degree-proportional sampling
  std::vector<int> endpoint_pool;
  for (int u = 0; u < m; ++u)
    for (int v = u + 1; v < m; ++v) {
      g.edges.emplace_back(u, v);
      endpoint_pool.push_back(u);
      endpoint_pool.push_back(v);
    }
  for (int v = m; v < n; ++v) {
    std::vector<int> chosen;
    while (static_cast<int>(chosen.size()) < m) {
      int u;
      if (endpoint_pool.empty()) {
        u = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(v)));
      } else {
        u = endpoint_pool[rng.next_below(endpoint_pool.size())];
      }
      if (std::find(chosen.begin(), chosen.end(), u) == chosen.end()) chosen.push_back(u);
    }
    for (int u : chosen) {
      g.edges.emplace_back(std::min(u, v), std::max(u, v));
      endpoint_pool.push_back(u);
      endpoint_pool.push_back(v);
    }
  }
  return g;
}

Graph generate_er(int n, double p, std::uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("generate_er requires n >= 1");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("generate_er requires p in [0,1]");
  Rng rng(seed);
  Graph g;
  g.num_nodes = n;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.bernoulli(p)) g.edges.emplace_back(u, v);
  return g;
}

Graph generate_two_block(int block_size, double p_in, double p_out, std::uint64_t seed) {
  if (block_size <= 0) throw std::invalid_argument("generate_two_block requires block_size >= 1");
  if (p_in < 0.0 || p_in > 1.0 || p_out < 0.0 || p_out > 1.0)
    throw std::invalid_argument("generate_two_block requires probabilities in [0,1]");
  Rng rng(seed);
  Graph g;
  g.num_nodes = 2 * block_size;
  for (int u = 0; u < g.num_nodes; ++u)
    for (int v = u + 1; v < g.num_nodes; ++v) {
      const bool same = (u < block_size) == (v < block_size);
      if (rng.bernoulli(same ? p_in : p_out)) g.edges.emplace_back(u, v);
    }
  return g;
}

Graph permute(const Graph& g, const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != g.num_nodes)
    throw std::invalid_argument("permutation length != num_nodes");
  std::vector<bool> hit(g.num_nodes, false);
  for (int p : perm) {
    if (p < 0 || p >= g.num_nodes || hit[p])
      throw std::invalid_argument("permutation is not a bijection on 0..n-1");
    hit[p] = true;
  }
  Graph out;
  out.num_nodes = g.num_nodes;
  out.edges.reserve(g.edges.size());
  for (auto [u, v] : g.edges) {
    int a = perm[u], b = perm[v];
    out.edges.emplace_back(std::min(a, b), std::max(a, b));
  }
  if (!g.features.empty()) {
    out.features.resize(g.num_nodes);
    for (int v = 0; v < g.num_nodes; ++v) out.features[perm[v]] = g.features[v];
  }
  return out;
}

}  // namespace gmdn
