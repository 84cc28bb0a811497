#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "saefin/clustering.hpp"
#include "saefin/common.hpp"

namespace saefin {

/// 1 - cosine similarity, in [0, 2]. Throws UndefinedError for a zero vector.
double cosine_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct GraphNode {
  CompanyId company_id;
  Eigen::VectorXd g;
};

/// Undirected edge between node indices a < b.
struct GraphEdge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  double d_cos = 0.0;
  double cd = 0.0;  // standardized weight; valid once the graph is normalized
};

/// Complete same-year graph over companies with features.
struct DistanceGraph {
  int year = 0;
  std::vector<CompanyId> nodes;  // sorted
  std::vector<GraphEdge> edges;  // every pair a < b, in (a, b) order
  bool normalized = false;
  double mean = 0.0;    // of d_cos over all edges, after normalization
  double stddev = 0.0;  // population standard deviation

  std::size_t index_of(std::string_view company_id) const;  // throws if unknown
};

/// Builds all pairwise cosine distances. Nodes are reordered by company id.
DistanceGraph build_distance_graph(int year, std::vector<GraphNode> nodes);

/// cd = (d_cos - mean) / stddev over all edges of the graph (population stddev).
/// Throws UndefinedError for fewer than 2 edges or zero variance.
DistanceGraph normalize_distances(DistanceGraph graph);

struct MstEdge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  double weight = 0.0;
};

/// Minimum spanning tree under the cd weights.
struct MstForest {
  int year = 0;
  std::vector<CompanyId> nodes;
  std::vector<MstEdge> edges;  // in Kruskal acceptance order

  std::size_t index_of(std::string_view company_id) const;
};

/// Kruskal; ties resolved by (weight, smaller id, larger id).
MstForest build_mst(const DistanceGraph& graph);

/// Components after deleting every tree edge with weight > theta.
YearClustering cut_mst(const MstForest& mst, double theta, ClusterMethod method = ClusterMethod::CD);

/// Largest edge weight on the tree path between two distinct nodes.
double ultrametric_distance(const MstForest& mst, std::string_view i, std::string_view j);

/// year,id_a,id_b,d_cos,cd
void write_edges(std::ostream& out, const DistanceGraph& graph, bool header = true);

}  // namespace saefin
