#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sawr {

/// Dense qubit index in a C_n lattice: 8*(row*n + col) + 4*shore + offset.
struct NodeId {
  std::uint32_t index = 0;

  constexpr NodeId() = default;
  constexpr explicit NodeId(std::uint32_t i) : index(i) {}
  constexpr operator std::size_t() const { return index; }
  friend constexpr auto operator<=>(NodeId, NodeId) = default;
};

enum class EdgeKind : std::uint8_t { Internal, External };

struct Edge {
  NodeId u;
  NodeId v;
  EdgeKind kind;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Neighbor {
  NodeId node;
  std::size_t edge;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct EdgeKindCounts {
  std::size_t internal = 0;
  std::size_t external = 0;
};

/// Position of a qubit inside the lattice.
struct QubitCoord {
  std::uint32_t row;
  std::uint32_t col;
  std::uint32_t shore;   // 0 = vertical/left, 1 = horizontal/right
  std::uint32_t offset;  // 0..3
};

/// Immutable C_n graph. Edges are canonical (u < v) and stored once;
/// adjacency lists are derived and sorted by neighbor index.
class ChimeraTopology {
public:
  /// Builds from an explicit edge list in any order. Every edge is validated
  /// against the Chimera coupler rule and the full coupler set must be present.
  ChimeraTopology(std::uint32_t n, std::vector<Edge> edges);

  std::uint32_t n() const { return n_; }
  std::size_t node_count() const { return 8u * n_ * n_; }
  std::size_t edge_count() const { return edges_.size(); }
  std::span<const Edge> edges() const { return edges_; }
  const Edge& edge(std::size_t e) const { return edges_.at(e); }

  /// Neighbors of i with the canonical index of the shared edge.
  std::span<const Neighbor> neighbors(NodeId i) const;

  /// Index of the edge joining u and v, or npos.
  std::size_t find_edge(NodeId u, NodeId v) const;

  QubitCoord coord(NodeId i) const;
  NodeId node_at(const QubitCoord& c) const;

  /// Text dump of n, edges and adjacency; equal topologies serialize identically.
  std::string serialize() const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
  std::uint32_t n_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> adjacency_offsets_;
  std::vector<Neighbor> adjacency_;
};

using TopologyPtr = std::shared_ptr<const ChimeraTopology>;

/// Canonical C_n topology: cells row-major; within a cell the 16 internal
/// couplers, then the external couplers to the right and below.
TopologyPtr build_chimera(std::uint32_t n);

std::span<const Neighbor> neighbors(const ChimeraTopology& topo, NodeId i);

EdgeKindCounts edge_kind_counts(const ChimeraTopology& topo);

/// Coupler rule: which kind of edge joins u and v, if any.
bool chimera_coupled(std::uint32_t n, NodeId u, NodeId v, EdgeKind* kind = nullptr);

}  // namespace sawr
