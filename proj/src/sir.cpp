// Apache License, Version 2.0, refer to LICENSE.txt
#include "gmdn/sir.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace gmdn {

void SirParams::validate() const {
  if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("beta must be in [0,1]");
  if (gamma < 0.1 || gamma > 1.0) throw std::invalid_argument("gamma must be in [0.1,1]");
  if (init_prob <= 0.0 || init_prob >= 1.0)
    throw std::invalid_argument("init_prob must be in (0,1)");
}

std::vector<std::size_t> Dataset::record_ids(Split s) const {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (record_split(i) == s) ids.push_back(i);
  return ids;
}

SimulationRecord simulate_sir_masked(const Graph& g, const NeighborIndex& nbr,
                                     const SirParams& params,
                                     std::vector<std::uint8_t> initial_mask, Rng rng,
                                     std::vector<std::array<int, 3>>* step_counts) {
  const int n = g.num_nodes;
  if (n == 0) throw std::invalid_argument("simulate_sir: empty graph");
  if (static_cast<int>(initial_mask.size()) != n)
    throw std::invalid_argument("simulate_sir: mask length != n");

  enum : std::uint8_t { S = 0, I = 1, R = 2 };
  std::vector<std::uint8_t> state(n, S);
  std::vector<int> infectious;
  for (int v = 0; v < n; ++v)
    if (initial_mask[v]) {
      state[v] = I;
      infectious.push_back(v);
    }

  const long step_cap = 10L * n;
  long step = 0;
  while (!infectious.empty()) {
    if (++step > step_cap)
      throw std::runtime_error("simulate_sir: step cap reached (dynamics did not absorb)");
    std::vector<int> newly_infected;
    for (int v : infectious)
      for (int u : nbr.neighbors[v])
        if (state[u] == S && rng.bernoulli(params.beta)) {
          state[u] = I;
          newly_infected.push_back(u);
        }
    std::vector<int> still_infectious;
    for (int v : infectious)
      if (rng.bernoulli(params.gamma))
        state[v] = R;
      else
        still_infectious.push_back(v);
    still_infectious.insert(still_infectious.end(), newly_infected.begin(),
                            newly_infected.end());
    infectious = std::move(still_infectious);
    if (step_counts) {
      std::array<int, 3> counts{0, 0, 0};
      for (std::uint8_t s : state) ++counts[s];
      step_counts->push_back(counts);
    }
  }

  SimulationRecord rec;
  rec.beta = params.beta;
  rec.gamma = params.gamma;
  rec.initial_mask = std::move(initial_mask);
  rec.target = static_cast<int>(std::count_if(state.begin(), state.end(),
                                              [](std::uint8_t s) { return s != S; }));
  return rec;
}

SimulationRecord simulate_sir(const Graph& g, const SirParams& params, std::uint64_t seed) {
  params.validate();
  Rng rng(seed);
  const int n = g.num_nodes;
  std::vector<std::uint8_t> mask(n, 0);
  bool any = false;
  while (!any) {
    for (int v = 0; v < n; ++v) {
      mask[v] = rng.bernoulli(params.init_prob) ? 1 : 0;
      any = any || mask[v];
    }
  }
  NeighborIndex nbr(g);
  return simulate_sir_masked(g, nbr, params, std::move(mask), rng);
}

Tensor build_node_features(const Graph& g, const SirParams& params,
                           const std::vector<std::uint8_t>& initial_mask) {
  if (static_cast<int>(initial_mask.size()) != g.num_nodes)
    throw std::invalid_argument("build_node_features: mask length != n");
  if (params.gamma == 0.0) throw std::invalid_argument("build_node_features: gamma must be > 0");
  Tensor x = Tensor::zeros(g.num_nodes, 5);
  for (int v = 0; v < g.num_nodes; ++v) {
    x.at(v, 0) = params.beta;
    x.at(v, 1) = params.gamma;
    x.at(v, 2) = params.beta / params.gamma;
    x.at(v, 3) = 1.0;
    x.at(v, 4) = initial_mask[v] ? 1.0 : 0.0;
  }
  return x;
}

std::vector<double> record_summary(const SimulationRecord& rec, int n) {
  const double frac =
      static_cast<double>(std::accumulate(rec.initial_mask.begin(), rec.initial_mask.end(), 0)) /
      static_cast<double>(n);
  return {rec.beta, rec.gamma, rec.beta / rec.gamma, 1.0, frac};
}

Dataset generate_dataset(const std::string& family, int n,
                         const std::vector<double>& connectivities, int graphs_per_conn,
                         int sims_per_config, std::uint64_t seed, int workers) {
  if (family != "BA" && family != "ER")
    throw std::invalid_argument("generate_dataset: family must be BA or ER");
  if (n <= 0 || graphs_per_conn <= 0 || sims_per_config <= 0 || connectivities.empty())
    throw std::invalid_argument("generate_dataset: counts must be positive");

  Dataset d;
  d.family = family;
  d.n = n;
  d.connectivities = connectivities;
  d.graphs_per_conn = graphs_per_conn;
  d.sims_per_config = sims_per_config;
  d.seed = seed;

  Rng master(seed);
  for (std::size_t ci = 0; ci < connectivities.size(); ++ci)
    for (int gi = 0; gi < graphs_per_conn; ++gi) {
      const std::uint64_t gseed = master.split(1000 + ci * graphs_per_conn + gi).next_u64();
      if (family == "BA")
        d.graphs.push_back(generate_ba(n, static_cast<int>(connectivities[ci]), gseed));
      else
        d.graphs.push_back(generate_er(n, connectivities[ci], gseed));
    }

  // 80/10/10 split by graph: shuffle graph ids, take prefixes
  const int num_graphs = static_cast<int>(d.graphs.size());
  std::vector<int> order(num_graphs);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng = master.split(7);
  for (int i = num_graphs - 1; i > 0; --i)
    std::swap(order[i], order[static_cast<int>(split_rng.next_below(i + 1))]);
  const int n_test = std::max(1, num_graphs / 10);
  const int n_val = std::max(1, num_graphs / 10);
  d.graph_split.assign(num_graphs, Split::train);
  for (int i = 0; i < n_test; ++i) d.graph_split[order[i]] = Split::test;
  for (int i = n_test; i < n_test + n_val; ++i) d.graph_split[order[i]] = Split::val;

  static const double kInitProbs[3] = {0.05, 0.10, 0.20};
  const std::size_t total =
      static_cast<std::size_t>(num_graphs) * 3 * static_cast<std::size_t>(sims_per_config);
  d.records.resize(total);

  std::vector<NeighborIndex> nbrs;
  nbrs.reserve(num_graphs);
  for (const Graph& g : d.graphs) nbrs.emplace_back(g);

  Rng record_base = master.split(42);
  auto run_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t rec_idx = lo; rec_idx < hi; ++rec_idx) {
      const std::size_t per_graph = 3 * static_cast<std::size_t>(sims_per_config);
      const int graph_id = static_cast<int>(rec_idx / per_graph);
      const int within = static_cast<int>(rec_idx % per_graph);
      const int ip = within / sims_per_config;

      Rng rng = record_base.split(rec_idx);
      SirParams p;
      p.beta = rng.uniform(0.0, 1.0);
      p.gamma = rng.uniform(0.1, 1.0);
      p.init_prob = kInitProbs[ip];

      const Graph& g = d.graphs[graph_id];
      std::vector<std::uint8_t> mask(n, 0);
      bool any = false;
      while (!any)
        for (int v = 0; v < n; ++v) {
          mask[v] = rng.bernoulli(p.init_prob) ? 1 : 0;
          any = any || mask[v];
        }
      SimulationRecord rec = simulate_sir_masked(g, nbrs[graph_id], p, std::move(mask), rng);
      rec.graph_id = graph_id;
      d.records[rec_idx] = std::move(rec);
    }
  };

  if (workers <= 1) {
    run_range(0, total);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (total + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(total, lo + chunk);
      if (lo < hi) pool.emplace_back(run_range, lo, hi);
    }
    for (auto& t : pool) t.join();
  }
  return d;
}

}  // namespace gmdn
