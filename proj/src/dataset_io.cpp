// Apache License, Version 2.0, refer to LICENSE.txt
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "gmdn/sir.hpp"

namespace gmdn {

namespace {

using nlohmann::json;

constexpr int kDatasetVersion = 1;

std::string mask_to_string(const std::vector<std::uint8_t>& mask) {
  std::string s(mask.size(), '0');
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) s[i] = '1';
  return s;
}

std::vector<std::uint8_t> mask_from_string(const std::string& s) {
  std::vector<std::uint8_t> mask(s.size(), 0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '0' && s[i] != '1') throw std::runtime_error("bad mask character");
    mask[i] = s[i] == '1' ? 1 : 0;
  }
  return mask;
}

[[noreturn]] void parse_error(const std::string& path, std::size_t byte_offset,
                              const std::string& what) {
  throw std::runtime_error("failed to parse dataset file '" + path + "' at byte offset " +
                           std::to_string(byte_offset) + ": " + what);
}

}  // namespace

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");

  json header = {{"format", "gmdn-dataset"},
                 {"version", kDatasetVersion},
                 {"family", d.family},
                 {"n", d.n},
                 {"connectivities", d.connectivities},
                 {"graphs_per_conn", d.graphs_per_conn},
                 {"sims_per_config", d.sims_per_config},
                 {"seed", d.seed},
                 {"num_graphs", d.graphs.size()},
                 {"num_records", d.records.size()}};
  out << header.dump() << '\n';

  static const char* kSplitNames[3] = {"train", "val", "test"};
  for (std::size_t i = 0; i < d.graphs.size(); ++i) {
    const Graph& g = d.graphs[i];
    json jg = {{"id", i},
               {"n", g.num_nodes},
               {"edges", json::array()},
               {"split", kSplitNames[static_cast<int>(d.graph_split[i])]}};
    for (auto [u, v] : g.edges) jg["edges"].push_back({u, v});
    if (!g.features.empty()) jg["features"] = g.features;
    out << jg.dump() << '\n';
  }
  for (const SimulationRecord& r : d.records) {
    json jr = {{"graph", r.graph_id},
               {"beta", r.beta},
               {"gamma", r.gamma},
               {"init", mask_to_string(r.initial_mask)},
               {"target", r.target}};
    out << jr.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write error on '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file '" + path + "'");

  std::size_t offset = 0;
  std::string line;
  auto next_line = [&](const char* what) {
    if (!std::getline(in, line)) parse_error(path, offset, std::string("truncated file, expected ") + what);
    std::size_t start = offset;
    offset += line.size() + 1;
    return start;
  };
  auto parse_json = [&](std::size_t start, const char* what) {
    try {
      return json::parse(line);
    } catch (const json::exception& e) {
      parse_error(path, start, std::string("bad ") + what + ": " + e.what());
    }
  };

  std::size_t start = next_line("header");
  json header = parse_json(start, "header");
  if (header.value("format", "") != "gmdn-dataset")
    parse_error(path, start, "not a gmdn-dataset file");
  if (header.value("version", -1) != kDatasetVersion)
    throw std::runtime_error("dataset file '" + path + "' has unsupported version " +
                             std::to_string(header.value("version", -1)) + ", expected " +
                             std::to_string(kDatasetVersion));

  Dataset d;
  d.family = header.at("family").get<std::string>();
  d.n = header.at("n").get<int>();
  d.connectivities = header.at("connectivities").get<std::vector<double>>();
  d.graphs_per_conn = header.at("graphs_per_conn").get<int>();
  d.sims_per_config = header.at("sims_per_config").get<int>();
  d.seed = header.at("seed").get<std::uint64_t>();
  const std::size_t num_graphs = header.at("num_graphs").get<std::size_t>();
  const std::size_t num_records = header.at("num_records").get<std::size_t>();

  for (std::size_t i = 0; i < num_graphs; ++i) {
    start = next_line("graph record");
    json jg = parse_json(start, "graph record");
    Graph g;
    g.num_nodes = jg.at("n").get<int>();
    for (const auto& e : jg.at("edges")) g.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    if (jg.contains("features")) g.features = jg["features"].get<std::vector<std::vector<double>>>();
    try {
      g.validate();
    } catch (const std::exception& e) {
      parse_error(path, start, e.what());
    }
    const std::string s = jg.at("split").get<std::string>();
    if (s == "train")
      d.graph_split.push_back(Split::train);
    else if (s == "val")
      d.graph_split.push_back(Split::val);
    else if (s == "test")
      d.graph_split.push_back(Split::test);
    else
      parse_error(path, start, "unknown split '" + s + "'");
    d.graphs.push_back(std::move(g));
  }
  for (std::size_t i = 0; i < num_records; ++i) {
    start = next_line("simulation record");
    json jr = parse_json(start, "simulation record");
    SimulationRecord r;
    r.graph_id = jr.at("graph").get<int>();
    r.beta = jr.at("beta").get<double>();
    r.gamma = jr.at("gamma").get<double>();
    r.initial_mask = mask_from_string(jr.at("init").get<std::string>());
    r.target = jr.at("target").get<int>();
    if (r.graph_id < 0 || r.graph_id >= static_cast<int>(d.graphs.size()))
      parse_error(path, start, "record references unknown graph");
    if (r.target < 0 || r.target > d.graphs[r.graph_id].num_nodes)
      parse_error(path, start, "target out of range");
    d.records.push_back(std::move(r));
  }
  return d;
}

}  // namespace gmdn
