#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "reldet/numeric/tensor.hpp"

namespace reldet::relation {

inline constexpr std::size_t kDefaultNeighbors = 3;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Undirected neighbor graph over n objects. Edges are stored once as (i, j)
/// with i < j, sorted lexicographically.
struct RelationGraph {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  bool has_edge(std::size_t a, std::size_t b) const;
  /// Sorted neighbor lists, one per node.
  std::vector<std::vector<std::size_t>> adjacency() const;
};

/// Each node links to its k nearest other nodes by Euclidean center distance
/// (ties to the lower index); the directed edges are then symmetrized by union.
RelationGraph build_knn_graph(std::span<const Point> centers, std::size_t k);

/// Weights of the neighbor-aggregation layer: weight is [d × 2d], bias [d].
struct RelationLayerParams {
  numeric::Tensor weight;
  numeric::Tensor bias;
};

/// [n×n] row-stochastic matrix averaging each node's neighbors; isolated
/// nodes get an all-zero row.
numeric::Tensor neighbor_mean_matrix(const RelationGraph& graph);

/// out_i = relu(weight · [x_i ; mean_{j∈N(i)} x_j] + bias) for features [n×d].
numeric::Tensor aggregate(const numeric::Tensor& features, const RelationGraph& graph,
                          const RelationLayerParams& params);

}  // namespace reldet::relation
