#include "sawr/topology.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace sawr {

bool chimera_coupled(std::uint32_t n, NodeId u, NodeId v, EdgeKind* kind) {
  const std::size_t count = 8u * n * n;
  if (u.index >= count || v.index >= count || u == v) return false;
  const std::uint32_t cell_u = u.index / 8, cell_v = v.index / 8;
  const std::uint32_t shore_u = (u.index % 8) / 4, shore_v = (v.index % 8) / 4;
  const std::uint32_t k_u = u.index % 4, k_v = v.index % 4;
  if (cell_u == cell_v) {
    if (shore_u == shore_v) return false;
    if (kind) *kind = EdgeKind::Internal;
    return true;
  }
  if (shore_u != shore_v || k_u != k_v) return false;
  const std::uint32_t ru = cell_u / n, cu = cell_u % n;
  const std::uint32_t rv = cell_v / n, cv = cell_v % n;
  const std::uint32_t dr = ru > rv ? ru - rv : rv - ru;
  const std::uint32_t dc = cu > cv ? cu - cv : cv - cu;
  // vertical qubits chain along columns, horizontal ones along rows
  const bool ok = shore_u == 0 ? (dc == 0 && dr == 1) : (dr == 0 && dc == 1);
  if (ok && kind) *kind = EdgeKind::External;
  return ok;
}

ChimeraTopology::ChimeraTopology(std::uint32_t n, std::vector<Edge> edges)
    : n_(n), edges_(std::move(edges)) {
  if (n == 0) throw std::invalid_argument("chimera: n must be >= 1");
  const std::size_t expected = 16u * n * n + 8u * n * (n - 1);
  if (edges_.size() != expected) {
    throw std::invalid_argument("chimera: expected " + std::to_string(expected) +
                                " edges, got " + std::to_string(edges_.size()));
  }
  const std::size_t count = node_count();
  std::vector<std::vector<Neighbor>> lists(count);
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const Edge& edge = edges_[e];
    EdgeKind kind{};
    if (edge.u >= edge.v || !chimera_coupled(n, edge.u, edge.v, &kind) || kind != edge.kind) {
      throw std::invalid_argument("chimera: invalid edge (" + std::to_string(edge.u.index) +
                                  ", " + std::to_string(edge.v.index) + ")");
    }
    lists[edge.u].push_back({edge.v, e});
    lists[edge.v].push_back({edge.u, e});
  }
  adjacency_offsets_.reserve(count + 1);
  adjacency_offsets_.push_back(0);
  for (auto& list : lists) {
    std::sort(list.begin(), list.end(),
              [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
    for (std::size_t k = 1; k < list.size(); ++k) {
      if (list[k].node == list[k - 1].node) throw std::invalid_argument("chimera: duplicate edge");
    }
    adjacency_.insert(adjacency_.end(), list.begin(), list.end());
    adjacency_offsets_.push_back(adjacency_.size());
  }
}

std::span<const Neighbor> ChimeraTopology::neighbors(NodeId i) const {
  if (i.index >= node_count()) {
    throw std::out_of_range("chimera: node " + std::to_string(i.index) + " out of range");
  }
  return std::span<const Neighbor>(adjacency_).subspan(
      adjacency_offsets_[i], adjacency_offsets_[i + 1] - adjacency_offsets_[i]);
}

std::size_t ChimeraTopology::find_edge(NodeId u, NodeId v) const {
  for (const Neighbor& nb : neighbors(u)) {
    if (nb.node == v) return nb.edge;
  }
  return npos;
}

QubitCoord ChimeraTopology::coord(NodeId i) const {
  if (i.index >= node_count()) throw std::out_of_range("chimera: node out of range");
  const std::uint32_t cell = i.index / 8;
  return {cell / n_, cell % n_, (i.index % 8) / 4, i.index % 4};
}

NodeId ChimeraTopology::node_at(const QubitCoord& c) const {
  if (c.row >= n_ || c.col >= n_ || c.shore > 1 || c.offset > 3) {
    throw std::out_of_range("chimera: coordinate out of range");
  }
  return NodeId(8 * (c.row * n_ + c.col) + 4 * c.shore + c.offset);
}

std::string ChimeraTopology::serialize() const {
  std::ostringstream out;
  out << "chimera " << n_ << '\n';
  for (const Edge& e : edges_) {
    out << e.u.index << ' ' << e.v.index << ' ' << (e.kind == EdgeKind::Internal ? 'i' : 'x')
        << '\n';
  }
  for (std::size_t i = 0; i < node_count(); ++i) {
    out << i << ':';
    for (const Neighbor& nb : neighbors(NodeId(static_cast<std::uint32_t>(i)))) {
      out << ' ' << nb.node.index << '/' << nb.edge;
    }
    out << '\n';
  }
  return out.str();
}

TopologyPtr build_chimera(std::uint32_t n) {
  if (n == 0) throw std::invalid_argument("build_chimera: n must be >= 1");
  std::vector<Edge> edges;
  edges.reserve(16u * n * n + 8u * n * (n - 1));
  auto id = [n](std::uint32_t r, std::uint32_t c, std::uint32_t s, std::uint32_t k) {
    return NodeId(8 * (r * n + c) + 4 * s + k);
  };
  for (std::uint32_t r = 0; r < n; ++r) {
    for (std::uint32_t c = 0; c < n; ++c) {
      for (std::uint32_t k0 = 0; k0 < 4; ++k0) {
        for (std::uint32_t k1 = 0; k1 < 4; ++k1) {
          edges.push_back({id(r, c, 0, k0), id(r, c, 1, k1), EdgeKind::Internal});
        }
      }
      if (r + 1 < n) {
        for (std::uint32_t k = 0; k < 4; ++k) {
          edges.push_back({id(r, c, 0, k), id(r + 1, c, 0, k), EdgeKind::External});
        }
      }
      if (c + 1 < n) {
        for (std::uint32_t k = 0; k < 4; ++k) {
          edges.push_back({id(r, c, 1, k), id(r, c + 1, 1, k), EdgeKind::External});
        }
      }
    }
  }
  return std::make_shared<const ChimeraTopology>(n, std::move(edges));
}

std::span<const Neighbor> neighbors(const ChimeraTopology& topo, NodeId i) {
  return topo.neighbors(i);
}

EdgeKindCounts edge_kind_counts(const ChimeraTopology& topo) {
  EdgeKindCounts counts;
  for (const Edge& e : topo.edges()) {
    (e.kind == EdgeKind::Internal ? counts.internal : counts.external)++;
  }
  return counts;
}

}  // namespace sawr
