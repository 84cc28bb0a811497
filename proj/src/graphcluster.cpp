#include "saefin/graphcluster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "saefin/csv.hpp"
#include "saefin/parallel.hpp"

namespace saefin {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

std::size_t find_node(const std::vector<CompanyId>& nodes, std::string_view id) {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), id);
  if (it == nodes.end() || *it != id) throw InputError(fmt::format("unknown node '{}'", id));
  return static_cast<std::size_t>(it - nodes.begin());
}

}  // namespace

double cosine_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw InputError("cosine_distance: length mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw UndefinedError("cosine_distance: zero-norm vector");
  const double s = a.dot(b) / (na * nb);
  return 1.0 - std::clamp(s, -1.0, 1.0);
}

std::size_t DistanceGraph::index_of(std::string_view company_id) const { return find_node(nodes, company_id); }
std::size_t MstForest::index_of(std::string_view company_id) const { return find_node(nodes, company_id); }

DistanceGraph build_distance_graph(int year, std::vector<GraphNode> nodes) {
  std::sort(nodes.begin(), nodes.end(), [](const auto& x, const auto& y) { return x.company_id < y.company_id; });
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (nodes[i].company_id == nodes[i - 1].company_id) {
      throw InputError(fmt::format("duplicate company '{}' in year {} graph", nodes[i].company_id, year));
    }
  }
  const std::size_t n = nodes.size();
  // Unit-normalize once; cosine similarity is then a dot product.
  std::vector<Eigen::VectorXd> unit(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double norm = nodes[i].g.norm();
    if (!(norm > 0.0)) {
      throw UndefinedError(fmt::format("company '{}' has a zero-norm vector in year {}", nodes[i].company_id, year));
    }
    unit[i] = nodes[i].g / norm;
  }

  DistanceGraph graph;
  graph.year = year;
  graph.edges.resize(n < 2 ? 0 : n * (n - 1) / 2);
  parallel_for(n, [&](std::size_t a) {
    std::size_t slot = a * (2 * n - a - 1) / 2;
    for (std::size_t b = a + 1; b < n; ++b, ++slot) {
      const double s = std::clamp(unit[a].dot(unit[b]), -1.0, 1.0);
      graph.edges[slot] = GraphEdge{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), 1.0 - s, 0.0};
    }
  });
  graph.nodes.reserve(n);
  for (auto& node : nodes) graph.nodes.push_back(std::move(node.company_id));
  return graph;
}

DistanceGraph normalize_distances(DistanceGraph graph) {
  const auto m = graph.edges.size();
  if (m < 2) throw UndefinedError(fmt::format("year {}: need at least 2 edges to normalize distances", graph.year));
  double sum = 0.0;
  for (const auto& e : graph.edges) sum += e.d_cos;
  const double mean = sum / static_cast<double>(m);
  double ss = 0.0;
  for (const auto& e : graph.edges) ss += (e.d_cos - mean) * (e.d_cos - mean);
  const double sd = std::sqrt(ss / static_cast<double>(m));
  if (!(sd > 0.0)) throw UndefinedError(fmt::format("year {}: cosine distances have zero variance", graph.year));
  for (auto& e : graph.edges) e.cd = (e.d_cos - mean) / sd;
  graph.mean = mean;
  graph.stddev = sd;
  graph.normalized = true;
  return graph;
}

MstForest build_mst(const DistanceGraph& graph) {
  if (!graph.normalized && !graph.edges.empty()) {
    throw InputError(fmt::format("year {}: build_mst needs a normalized graph", graph.year));
  }
  const std::size_t n = graph.nodes.size();
  std::vector<std::uint32_t> order(graph.edges.size());
  std::iota(order.begin(), order.end(), 0u);
  // Nodes are sorted by id, so (a, b) order is (min id, max id) order.
  std::sort(order.begin(), order.end(), [&](std::uint32_t x, std::uint32_t y) {
    const auto& ex = graph.edges[x];
    const auto& ey = graph.edges[y];
    if (ex.cd != ey.cd) return ex.cd < ey.cd;
    if (ex.a != ey.a) return ex.a < ey.a;
    return ex.b < ey.b;
  });
  MstForest mst;
  mst.year = graph.year;
  mst.nodes = graph.nodes;
  DisjointSets sets(n);
  for (auto idx : order) {
    const auto& e = graph.edges[idx];
    if (sets.unite(e.a, e.b)) {
      mst.edges.push_back(MstEdge{e.a, e.b, e.cd});
      if (mst.edges.size() + 1 == n) break;
    }
  }
  if (n > 0 && mst.edges.size() + 1 != n) {
    throw InputError(fmt::format("year {}: graph is not connected", graph.year));
  }
  return mst;
}

YearClustering cut_mst(const MstForest& mst, double theta, ClusterMethod method) {
  const std::size_t n = mst.nodes.size();
  DisjointSets sets(n);
  for (const auto& e : mst.edges) {
    if (!(e.weight > theta)) sets.unite(e.a, e.b);
  }
  std::vector<std::vector<CompanyId>> groups(n);
  for (std::size_t i = 0; i < n; ++i) groups[sets.find(i)].push_back(mst.nodes[i]);
  YearClustering yc;
  yc.year = mst.year;
  yc.theta = theta;
  yc.method = method;
  for (auto& g : groups) {
    if (!g.empty()) yc.clusters.push_back(std::move(g));
  }
  yc.canonicalize();
  return yc;
}

double ultrametric_distance(const MstForest& mst, std::string_view i, std::string_view j) {
  const std::size_t src = mst.index_of(i);
  const std::size_t dst = mst.index_of(j);
  if (src == dst) throw InputError("ultrametric_distance needs two distinct nodes");
  const std::size_t n = mst.nodes.size();
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  for (const auto& e : mst.edges) {
    adj[e.a].emplace_back(e.b, e.weight);
    adj[e.b].emplace_back(e.a, e.weight);
  }
  // Iterative DFS carrying the running path maximum.
  std::vector<double> best(n, std::nan(""));
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{src};
  seen[src] = true;
  best[src] = -HUGE_VAL;
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    if (u == dst) return best[u];
    for (const auto& [v, w] : adj[u]) {
      if (seen[v]) continue;
      seen[v] = true;
      best[v] = std::max(best[u], w);
      stack.push_back(v);
    }
  }
  throw InputError(fmt::format("no tree path between '{}' and '{}'", i, j));
}

void write_edges(std::ostream& out, const DistanceGraph& graph, bool header) {
  if (header) out << "year,id_a,id_b,d_cos,cd\n";
  for (const auto& e : graph.edges) {
    out << graph.year << ',' << graph.nodes[e.a] << ',' << graph.nodes[e.b] << ',' << csv::fmt_double(e.d_cos)
        << ',' << csv::fmt_double(e.cd) << '\n';
  }
}

}  // namespace saefin
