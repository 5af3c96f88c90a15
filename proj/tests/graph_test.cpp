#include <fstream>

#include "aip/error.hpp"
#include "aip/graph.hpp"
#include "doctest.h"

using namespace aip;

TEST_CASE("edges are canonicalized and deduplicated") {
  auto g = build_graph(4, {{1, 0}, {0, 1}, {2, 3}, {3, 2}, {0, 1}});
  CHECK(g.edges.size() == 2);
  CHECK(g.edges[0] == std::make_pair(0, 1));
  CHECK(g.edges[1] == std::make_pair(2, 3));
}

TEST_CASE("components and islands") {
  auto g = build_graph(5, {{0, 1}, {1, 2}});
  CHECK(g.num_components == 3);
  CHECK(g.component_size[g.component[0]] == 3);
  CHECK(g.is_island(3));
  CHECK(g.is_island(4));
  CHECK(!g.is_island(1));
}

TEST_CASE("component labels stable under edge permutation") {
  auto a = build_graph(6, {{0, 1}, {2, 3}, {4, 5}});
  auto b = build_graph(6, {{4, 5}, {0, 1}, {2, 3}});
  CHECK(a.component == b.component);
}

TEST_CASE("self loops rejected") {
  CHECK_THROWS_AS(build_graph(3, {{1, 1}}), DataError);
}

TEST_CASE("node ids validated") {
  CHECK_THROWS_AS(build_graph(3, {{0, 3}}), DataError);
  CHECK_THROWS_AS(build_graph(3, {{-1, 2}}), DataError);
}

TEST_CASE("adjacency file is 1-based") {
  const char* path = "graph_test_adj.csv";
  {
    std::ofstream f(path);
    f << "node1,node2\n1,2\n2,3\n";
  }
  auto g = load_adjacency(path, 4);
  CHECK(g.edges.size() == 2);
  CHECK(g.edges[0] == std::make_pair(0, 1));
  CHECK(g.is_island(3));
  std::remove(path);
}

TEST_CASE("ring lattice is connected with chords") {
  auto g = ring_lattice_graph(51, 7);
  CHECK(g.num_nodes == 51);
  CHECK(g.num_components == 1);
  auto deg = g.degrees();
  for (int d : deg) CHECK(d >= 2);
}
