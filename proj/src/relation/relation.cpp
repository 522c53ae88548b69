#include "reldet/relation/relation.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>

#include "reldet/errors.hpp"
#include "reldet/numeric/ops.hpp"

namespace reldet::relation {

namespace nm = reldet::numeric;

bool RelationGraph::has_edge(std::size_t a, std::size_t b) const {
  const auto key = std::minmax(a, b);
  return std::binary_search(edges.begin(), edges.end(), std::make_pair(key.first, key.second));
}

std::vector<std::vector<std::size_t>> RelationGraph::adjacency() const {
  std::vector<std::vector<std::size_t>> out(n);
  for (const auto& [a, b] : edges) {
    out[a].push_back(b);
    out[b].push_back(a);
  }
  for (auto& list : out) std::sort(list.begin(), list.end());
  return out;
}

RelationGraph build_knn_graph(std::span<const Point> centers, std::size_t k) {
  RelationGraph graph;
  graph.n = centers.size();
  graph.k = k;
  const std::size_t budget = graph.n ? std::min(k, graph.n - 1) : 0;
  std::set<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t i = 0; i < graph.n; ++i) {
    ranked.clear();
    for (std::size_t j = 0; j < graph.n; ++j) {
      if (j == i) continue;
      const double dx = centers[i].x - centers[j].x;
      const double dy = centers[i].y - centers[j].y;
      ranked.emplace_back(dx * dx + dy * dy, j);
    }
    std::partial_sort(ranked.begin(), ranked.begin() + budget, ranked.end());
    for (std::size_t r = 0; r < budget; ++r) edges.insert(std::minmax(i, ranked[r].second));
  }
  graph.edges.assign(edges.begin(), edges.end());
  return graph;
}

nm::Tensor neighbor_mean_matrix(const RelationGraph& graph) {
  std::vector<double> m(graph.n * graph.n, 0.0);
  const auto adj = graph.adjacency();
  for (std::size_t i = 0; i < graph.n; ++i) {
    if (adj[i].empty()) continue;
    const double w = 1.0 / static_cast<double>(adj[i].size());
    for (std::size_t j : adj[i]) m[i * graph.n + j] = w;
  }
  return nm::Tensor({graph.n, graph.n}, std::move(m));
}

nm::Tensor aggregate(const nm::Tensor& features, const RelationGraph& graph,
                     const RelationLayerParams& params) {
  if (features.rank() != 2 || features.dim(0) != graph.n)
    throw DimensionError("aggregate: features " + nm::shape_str(features.shape()) + " for " +
                         std::to_string(graph.n) + " graph nodes");
  const std::size_t d = features.dim(1);
  if (params.weight.shape() != nm::Shape{d, 2 * d} || params.bias.shape() != nm::Shape{d})
    throw DimensionError("aggregate: weight " + nm::shape_str(params.weight.shape()) + " / bias " +
                         nm::shape_str(params.bias.shape()) + " do not fit feature width " +
                         std::to_string(d));
  const nm::Tensor neighbor_mean = nm::matmul(neighbor_mean_matrix(graph), features);
  const nm::Tensor joined = nm::concat({features, neighbor_mean}, 1);
  return nm::relu(nm::add_bias(nm::matmul(joined, nm::transpose(params.weight)), params.bias));
}

}  // namespace reldet::relation
