#include "aip/graph.hpp"

#include <algorithm>
#include <numeric>

#include "aip/csv.hpp"
#include "aip/error.hpp"

namespace aip {

std::vector<int> AdjacencyGraph::degrees() const {
  std::vector<int> deg(num_nodes, 0);
  for (auto [a, b] : edges) {
    ++deg[a];
    ++deg[b];
  }
  return deg;
}

AdjacencyGraph build_graph(int num_nodes, std::vector<std::pair<int, int>> edges) {
  AdjacencyGraph g;
  g.num_nodes = num_nodes;
  for (auto& [a, b] : edges) {
    if (a < 0 || a >= num_nodes || b < 0 || b >= num_nodes)
      throw DataError("edge node id out of range [1, " + std::to_string(num_nodes) + "]");
    if (a == b) throw DataError("self-loop at node " + std::to_string(a + 1));
    if (a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  g.edges = std::move(edges);

  // Connected components via union-find; labels assigned in node order so
  // they are stable under edge-list permutation.
  std::vector<int> parent(num_nodes);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (auto [a, b] : g.edges) {
    int ra = find(a), rb = find(b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  g.component.assign(num_nodes, -1);
  for (int v = 0; v < num_nodes; ++v) {
    int r = find(v);
    if (g.component[r] < 0) {
      g.component[r] = g.num_components++;
      g.component_size.push_back(0);
    }
    g.component[v] = g.component[r];
    ++g.component_size[g.component[v]];
  }
  return g;
}

AdjacencyGraph load_adjacency(const std::string& path, int num_nodes) {
  auto t = csv::read_file(path);
  int c1 = t.column("node1"), c2 = t.column("node2");
  std::vector<std::pair<int, int>> edges;
  edges.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    long a = csv::to_long(row[c1], "node1");
    long b = csv::to_long(row[c2], "node2");
    edges.emplace_back(static_cast<int>(a) - 1, static_cast<int>(b) - 1);
  }
  return build_graph(num_nodes, std::move(edges));
}

AdjacencyGraph ring_lattice_graph(int num_nodes, int chord_stride) {
  std::vector<std::pair<int, int>> edges;
  for (int v = 0; v < num_nodes; ++v) edges.emplace_back(v, (v + 1) % num_nodes);
  if (chord_stride > 1)
    for (int v = 0; v < num_nodes; v += chord_stride)
      edges.emplace_back(v, (v + chord_stride / 2) % num_nodes);
  return build_graph(num_nodes, std::move(edges));
}

}  // namespace aip
