#pragma once

#include <string>
#include <utility>
#include <vector>

namespace aip {

// Undirected area adjacency. Nodes are 0-based in memory, 1-based in files.
// Edges are canonicalized to node1 < node2 and deduplicated at build.
struct AdjacencyGraph {
  int num_nodes = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<int> component;        // component label per node, 0-based
  std::vector<int> component_size;   // indexed by component label
  int num_components = 0;

  bool is_island(int node) const { return component_size[component[node]] == 1; }
  std::vector<int> degrees() const;
};

AdjacencyGraph build_graph(int num_nodes, std::vector<std::pair<int, int>> edges);

// Edge list CSV with header node1,node2 and 1-based ids.
AdjacencyGraph load_adjacency(const std::string& path, int num_nodes);

// Ring over `num_nodes` areas plus `chord_stride` long-range chords; used as
// the fallback simulation graph when no map is supplied.
AdjacencyGraph ring_lattice_graph(int num_nodes, int chord_stride = 7);

}  // namespace aip
