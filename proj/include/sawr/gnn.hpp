#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sawr/format.hpp"
#include "sawr/ising.hpp"
#include "sawr/rng.hpp"

namespace sawr {

/// Per-node input features: (h_i, s_i, h_i * s_i, sum_j |J_ij|).
inline constexpr int kNodeFeatureDim = 4;

/// true = spin already flipped, action unavailable.
using ActionMask = Eigen::Array<bool, Eigen::Dynamic, 1>;

template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <class Scalar>
struct LayerParams {
  MatrixX<Scalar> gamma_w;  // edge-space transform, d x d
  VectorX<Scalar> gamma_b;
  MatrixX<Scalar> phi_w;    // node-space transform, d x d
  VectorX<Scalar> phi_b;
};

/// Learnable parameters of the encoder and the Q decoder.
///
/// Layer k applies its gamma/phi pair twice: in the edge update
/// (gamma on the edge, phi on the endpoint sum) and in the node update
/// (phi on the node, gamma on the adjacent-edge sum). The decoder is
/// affine(2d -> d), ReLU, affine(d -> d), ReLU, affine(d -> 1).
template <class Scalar>
struct QNetworkParams {
  int embed_dim = 0;
  int layers = 0;
  VectorX<Scalar> edge_in_w;  // d, input is the scalar coupling
  VectorX<Scalar> edge_in_b;
  MatrixX<Scalar> node_in_w;  // d x kNodeFeatureDim
  VectorX<Scalar> node_in_b;
  std::vector<LayerParams<Scalar>> layer;
  MatrixX<Scalar> dec_w1;  // d x 2d, acting on [Z_s ; Z_i]
  VectorX<Scalar> dec_b1;
  MatrixX<Scalar> dec_w2;  // d x d
  VectorX<Scalar> dec_b2;
  VectorX<Scalar> dec_w3;  // d
  VectorX<Scalar> dec_b3;  // 1

  static QNetworkParams zeros(int d, int k) {
    if (d < 2 || d % 2 != 0) throw std::invalid_argument("embed_dim must be even and >= 2");
    if (k < 1) throw std::invalid_argument("layers must be >= 1");
    QNetworkParams p;
    p.embed_dim = d;
    p.layers = k;
    p.edge_in_w = VectorX<Scalar>::Zero(d);
    p.edge_in_b = VectorX<Scalar>::Zero(d);
    p.node_in_w = MatrixX<Scalar>::Zero(d, kNodeFeatureDim);
    p.node_in_b = VectorX<Scalar>::Zero(d);
    p.layer.resize(static_cast<std::size_t>(k));
    for (auto& l : p.layer) {
      l.gamma_w = MatrixX<Scalar>::Zero(d, d);
      l.gamma_b = VectorX<Scalar>::Zero(d);
      l.phi_w = MatrixX<Scalar>::Zero(d, d);
      l.phi_b = VectorX<Scalar>::Zero(d);
    }
    p.dec_w1 = MatrixX<Scalar>::Zero(d, 2 * d);
    p.dec_b1 = VectorX<Scalar>::Zero(d);
    p.dec_w2 = MatrixX<Scalar>::Zero(d, d);
    p.dec_b2 = VectorX<Scalar>::Zero(d);
    p.dec_w3 = VectorX<Scalar>::Zero(d);
    p.dec_b3 = VectorX<Scalar>::Zero(1);
    return p;
  }
};

using QNetwork = QNetworkParams<double>;

/// Calls f(name, block_of_p0, block_of_p1, ...) for every parameter block in
/// declaration order. All parameter sets must share the same shape.
template <class F, class P0, class... Ps>
void zip_blocks(F&& f, P0& p0, Ps&... ps) {
  f(std::string("edge_in_w"), p0.edge_in_w, ps.edge_in_w...);
  f(std::string("edge_in_b"), p0.edge_in_b, ps.edge_in_b...);
  f(std::string("node_in_w"), p0.node_in_w, ps.node_in_w...);
  f(std::string("node_in_b"), p0.node_in_b, ps.node_in_b...);
  for (std::size_t k = 0; k < p0.layer.size(); ++k) {
    const std::string prefix = "layer" + std::to_string(k) + ".";
    f(prefix + "gamma_w", p0.layer[k].gamma_w, ps.layer[k].gamma_w...);
    f(prefix + "gamma_b", p0.layer[k].gamma_b, ps.layer[k].gamma_b...);
    f(prefix + "phi_w", p0.layer[k].phi_w, ps.layer[k].phi_w...);
    f(prefix + "phi_b", p0.layer[k].phi_b, ps.layer[k].phi_b...);
  }
  f(std::string("dec_w1"), p0.dec_w1, ps.dec_w1...);
  f(std::string("dec_b1"), p0.dec_b1, ps.dec_b1...);
  f(std::string("dec_w2"), p0.dec_w2, ps.dec_w2...);
  f(std::string("dec_b2"), p0.dec_b2, ps.dec_b2...);
  f(std::string("dec_w3"), p0.dec_w3, ps.dec_w3...);
  f(std::string("dec_b3"), p0.dec_b3, ps.dec_b3...);
}

/// Block names ending in _b or _b<digit> hold biases.
inline bool is_bias_block(const std::string& name) {
  return name.find("_b") != std::string::npos;
}

template <class Scalar>
std::size_t parameter_count(const QNetworkParams<Scalar>& p) {
  std::size_t n = 0;
  zip_blocks([&](const std::string&, const auto& b) { n += static_cast<std::size_t>(b.size()); }, p);
  return n;
}

template <class Scalar>
bool all_finite(const QNetworkParams<Scalar>& p) {
  bool ok = true;
  zip_blocks([&](const std::string&, const auto& b) { ok = ok && b.allFinite(); }, p);
  return ok;
}

template <class Scalar>
bool operator==(const QNetworkParams<Scalar>& a, const QNetworkParams<Scalar>& b) {
  if (a.embed_dim != b.embed_dim || a.layers != b.layers) return false;
  bool eq = true;
  zip_blocks([&](const std::string&, const auto& x, const auto& y) { eq = eq && x == y; }, a, b);
  return eq;
}

template <class Scalar>
QNetworkParams<Scalar> zeros_like(const QNetworkParams<Scalar>& p) {
  return QNetworkParams<Scalar>::zeros(p.embed_dim, p.layers);
}

/// He-uniform initialization: weights ~ U(-sqrt(6 / fan_in), sqrt(6 / fan_in)),
/// drawn block by block in declaration order, row-major within a block.
/// Biases are zero.
template <class Scalar = double>
QNetworkParams<Scalar> init_params(int embed_dim, int layers, std::uint64_t seed) {
  auto p = QNetworkParams<Scalar>::zeros(embed_dim, layers);
  Rng rng(seed);
  zip_blocks(
      [&](const std::string& name, auto& block) {
        if (is_bias_block(name)) return;
        const Eigen::Index fan_in = name == "dec_w3" ? block.size() : block.cols();
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (Eigen::Index r = 0; r < block.rows(); ++r) {
          for (Eigen::Index c = 0; c < block.cols(); ++c) {
            block(r, c) = static_cast<Scalar>(bound * (2.0 * rng.uniform01() - 1.0));
          }
        }
      },
      p);
  return p;
}

// ---------------------------------------------------------------------------
// forward

template <class Scalar>
struct EmbeddingSet {
  MatrixX<Scalar> edge_embeddings;  // E x d
  MatrixX<Scalar> node_embeddings;  // N x d, the action embeddings Z_i
  VectorX<Scalar> state_embedding;  // d, Z_s = column sums of node_embeddings
  int layer_count = 0;
};

/// Everything the backward pass needs from one forward evaluation.
template <class Scalar>
struct ForwardPass {
  TopologyPtr topo;
  VectorX<Scalar> couplings;        // E
  MatrixX<Scalar> features;         // N x f0
  std::vector<MatrixX<Scalar>> ze;  // K + 1 edge embeddings, E x d
  std::vector<MatrixX<Scalar>> zn;  // K + 1 node embeddings, N x d
  std::vector<MatrixX<Scalar>> endpoint_sum;  // K, E x d
  std::vector<MatrixX<Scalar>> edge_sum;      // K, N x d
  std::vector<MatrixX<Scalar>> edge_pre;      // K, E x 2d (before ReLU)
  std::vector<MatrixX<Scalar>> node_pre;      // K, N x 2d
  VectorX<Scalar> state_embedding;
  MatrixX<Scalar> h1_pre;  // N x d
  MatrixX<Scalar> h2_pre;  // N x d
  VectorX<Scalar> q;       // N, unmasked

  EmbeddingSet<Scalar> embeddings() const {
    return {ze.back(), zn.back(), state_embedding, static_cast<int>(edge_pre.size())};
  }
};

template <class Scalar>
MatrixX<Scalar> node_features(const IsingInstance& inst, const SpinConfiguration& cfg) {
  if (cfg.size() != inst.size()) throw std::invalid_argument("node_features: size mismatch");
  const auto n = static_cast<Eigen::Index>(inst.size());
  MatrixX<Scalar> f(n, kNodeFeatureDim);
  const auto& topo = inst.topology();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = inst.biases()[i];
    const double s = cfg.spins[i];
    double coupling_mass = 0.0;
    for (const Neighbor& nb : topo.neighbors(NodeId(static_cast<std::uint32_t>(i)))) {
      coupling_mass += std::abs(inst.couplings()[static_cast<Eigen::Index>(nb.edge)]);
    }
    f(i, 0) = static_cast<Scalar>(h);
    f(i, 1) = static_cast<Scalar>(s);
    f(i, 2) = static_cast<Scalar>(h * s);
    f(i, 3) = static_cast<Scalar>(coupling_mass);
  }
  return f;
}

namespace detail {

/// Stride-2 average pooling over columns: (rows x 2d) -> (rows x d).
template <class Derived>
MatrixX<typename Derived::Scalar> pool_pairs(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out(x.rows(), x.cols() / 2);
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    out.col(j) = Scalar(0.5) * (x.col(2 * j) + x.col(2 * j + 1));
  }
  return out;
}

template <class Scalar>
MatrixX<Scalar> unpool_pairs(const MatrixX<Scalar>& g) {
  MatrixX<Scalar> out(g.rows(), g.cols() * 2);
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    out.col(2 * j) = Scalar(0.5) * g.col(j);
    out.col(2 * j + 1) = Scalar(0.5) * g.col(j);
  }
  return out;
}

template <class Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseMax(typename Derived::Scalar(0));
}

template <class Derived>
auto relu_mask(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return (x.array() > Scalar(0)).template cast<Scalar>();
}

template <class Scalar>
void check_layer(const QNetworkParams<Scalar>& params, int k) {
  if (k < 0 || k >= params.layers) throw std::out_of_range("layer index out of range");
}

}  // namespace detail

/// Edge-centric update for one edge:
/// pool(ReLU(gamma_k(z_edge) ++ phi_k(z_u + z_v))).
template <class Scalar>
VectorX<Scalar> edge_update(const VectorX<Scalar>& z_edge, const VectorX<Scalar>& z_u,
                            const VectorX<Scalar>& z_v, const QNetworkParams<Scalar>& params,
                            int k) {
  detail::check_layer(params, k);
  const auto d = params.embed_dim;
  if (z_edge.size() != d || z_u.size() != d || z_v.size() != d) {
    throw std::invalid_argument("edge_update: embedding size mismatch");
  }
  const auto& l = params.layer[static_cast<std::size_t>(k)];
  VectorX<Scalar> cat(2 * d);
  cat << l.gamma_w * z_edge + l.gamma_b, l.phi_w * (z_u + z_v) + l.phi_b;
  return detail::pool_pairs(detail::relu(cat).transpose()).transpose();
}

/// Node-centric update for one node given the sum of its adjacent edge
/// embeddings: pool(ReLU(phi_k(z_node) ++ gamma_k(edge_sum))).
template <class Scalar>
VectorX<Scalar> node_update(const VectorX<Scalar>& z_node, const VectorX<Scalar>& edge_sum,
                            const QNetworkParams<Scalar>& params, int k) {
  detail::check_layer(params, k);
  const auto d = params.embed_dim;
  if (z_node.size() != d || edge_sum.size() != d) {
    throw std::invalid_argument("node_update: embedding size mismatch");
  }
  const auto& l = params.layer[static_cast<std::size_t>(k)];
  VectorX<Scalar> cat(2 * d);
  cat << l.phi_w * z_node + l.phi_b, l.gamma_w * edge_sum + l.gamma_b;
  return detail::pool_pairs(detail::relu(cat).transpose()).transpose();
}

/// Full forward evaluation: input projections, K rounds of message passing,
/// state embedding, and the decoder on every node.
///
/// Round k reads only layer-k embeddings: edges combine their endpoints'
/// z^k, nodes combine the sum of their adjacent edges' z^k. Adjacent edges
/// are summed in increasing neighbor order, independent of edge storage.
template <class Scalar>
ForwardPass<Scalar> forward(const IsingInstance& inst, const SpinConfiguration& cfg,
                            const QNetworkParams<Scalar>& params) {
  using detail::relu;
  const auto& topo = inst.topology();
  const auto d = params.embed_dim;
  const auto n_nodes = static_cast<Eigen::Index>(topo.node_count());
  const auto n_edges = static_cast<Eigen::Index>(topo.edge_count());
  const auto edges = topo.edges();
  const int K = params.layers;

  ForwardPass<Scalar> fp;
  fp.topo = inst.topology_ptr();
  fp.couplings = inst.couplings().template cast<Scalar>();
  fp.features = node_features<Scalar>(inst, cfg);

  fp.ze.reserve(K + 1);
  fp.zn.reserve(K + 1);
  fp.ze.push_back(fp.couplings * params.edge_in_w.transpose());
  fp.ze.back().rowwise() += params.edge_in_b.transpose();
  fp.zn.push_back(fp.features * params.node_in_w.transpose());
  fp.zn.back().rowwise() += params.node_in_b.transpose();

  for (int k = 0; k < K; ++k) {
    const auto& l = params.layer[static_cast<std::size_t>(k)];
    const MatrixX<Scalar>& ze = fp.ze[k];
    const MatrixX<Scalar>& zn = fp.zn[k];

    MatrixX<Scalar> ends(n_edges, d);
    for (Eigen::Index e = 0; e < n_edges; ++e) {
      ends.row(e) = zn.row(edges[e].u) + zn.row(edges[e].v);
    }
    MatrixX<Scalar> epre(n_edges, 2 * d);
    epre.leftCols(d).noalias() = ze * l.gamma_w.transpose();
    epre.leftCols(d).rowwise() += l.gamma_b.transpose();
    epre.rightCols(d).noalias() = ends * l.phi_w.transpose();
    epre.rightCols(d).rowwise() += l.phi_b.transpose();

    MatrixX<Scalar> agg = MatrixX<Scalar>::Zero(n_nodes, d);
    for (Eigen::Index i = 0; i < n_nodes; ++i) {
      for (const Neighbor& nb : topo.neighbors(NodeId(static_cast<std::uint32_t>(i)))) {
        agg.row(i) += ze.row(static_cast<Eigen::Index>(nb.edge));
      }
    }
    MatrixX<Scalar> npre(n_nodes, 2 * d);
    npre.leftCols(d).noalias() = zn * l.phi_w.transpose();
    npre.leftCols(d).rowwise() += l.phi_b.transpose();
    npre.rightCols(d).noalias() = agg * l.gamma_w.transpose();
    npre.rightCols(d).rowwise() += l.gamma_b.transpose();

    fp.ze.push_back(detail::pool_pairs(relu(epre)));
    fp.zn.push_back(detail::pool_pairs(relu(npre)));
    fp.endpoint_sum.push_back(std::move(ends));
    fp.edge_sum.push_back(std::move(agg));
    fp.edge_pre.push_back(std::move(epre));
    fp.node_pre.push_back(std::move(npre));
  }

  const MatrixX<Scalar>& z = fp.zn.back();
  fp.state_embedding = z.colwise().sum().transpose();

  const VectorX<Scalar> shared = params.dec_w1.leftCols(d) * fp.state_embedding + params.dec_b1;
  fp.h1_pre.noalias() = z * params.dec_w1.rightCols(d).transpose();
  fp.h1_pre.rowwise() += shared.transpose();
  fp.h2_pre.noalias() = relu(fp.h1_pre) * params.dec_w2.transpose();
  fp.h2_pre.rowwise() += params.dec_b2.transpose();
  fp.q = relu(fp.h2_pre) * params.dec_w3;
  fp.q.array() += params.dec_b3[0];
  return fp;
}

template <class Scalar>
EmbeddingSet<Scalar> encode(const IsingInstance& inst, const SpinConfiguration& cfg,
                            const QNetworkParams<Scalar>& params) {
  return forward(inst, cfg, params).embeddings();
}

template <class Scalar>
Scalar masked_sentinel() {
  return -std::numeric_limits<Scalar>::infinity();
}

/// Q_i = psi([Z_s ; Z_i]) for unmasked i, -inf for masked i.
template <class Scalar>
VectorX<Scalar> q_values(const EmbeddingSet<Scalar>& emb, const QNetworkParams<Scalar>& params,
                         const ActionMask& mask) {
  using detail::relu;
  const auto d = params.embed_dim;
  if (mask.size() != emb.node_embeddings.rows()) {
    throw std::invalid_argument("q_values: mask size mismatch");
  }
  const VectorX<Scalar> shared = params.dec_w1.leftCols(d) * emb.state_embedding + params.dec_b1;
  MatrixX<Scalar> h1 = emb.node_embeddings * params.dec_w1.rightCols(d).transpose();
  h1.rowwise() += shared.transpose();
  MatrixX<Scalar> h2 = relu(h1) * params.dec_w2.transpose();
  h2.rowwise() += params.dec_b2.transpose();
  VectorX<Scalar> q = relu(h2) * params.dec_w3;
  q.array() += params.dec_b3[0];
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (mask[i]) q[i] = masked_sentinel<Scalar>();
  }
  return q;
}

template <class Scalar>
VectorX<Scalar> masked_q(const ForwardPass<Scalar>& fp, const ActionMask& mask) {
  if (mask.size() != fp.q.size()) throw std::invalid_argument("masked_q: mask size mismatch");
  VectorX<Scalar> q = fp.q;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (mask[i]) q[i] = masked_sentinel<Scalar>();
  }
  return q;
}

// ---------------------------------------------------------------------------
// backward

/// Accumulates into `grads` the gradient of (dq * Q(s, action)) with respect
/// to every parameter, reusing the activations recorded in `fp`.
template <class Scalar>
void backward(const ForwardPass<Scalar>& fp, const QNetworkParams<Scalar>& params, NodeId action,
              Scalar dq, QNetworkParams<Scalar>& grads) {
  using detail::relu;
  using detail::relu_mask;
  const auto d = params.embed_dim;
  const int K = params.layers;
  if (fp.ze.size() != static_cast<std::size_t>(K + 1)) {
    throw std::logic_error("backward: forward pass does not match parameters");
  }
  const auto a = static_cast<Eigen::Index>(action.index);
  if (a >= fp.q.size()) throw std::out_of_range("backward: action out of range");
  const auto edges = fp.topo->edges();
  const auto n_nodes = fp.zn.back().rows();
  const auto n_edges = fp.ze.back().rows();

  // decoder
  const VectorX<Scalar> h1_pre = fp.h1_pre.row(a).transpose();
  const VectorX<Scalar> h2_pre = fp.h2_pre.row(a).transpose();
  const VectorX<Scalar> h1 = relu(h1_pre);
  const VectorX<Scalar> h2 = relu(h2_pre);
  VectorX<Scalar> x(2 * d);
  x << fp.state_embedding, fp.zn.back().row(a).transpose();

  grads.dec_w3 += dq * h2;
  grads.dec_b3[0] += dq;
  const VectorX<Scalar> dh2 = (dq * params.dec_w3).cwiseProduct(relu_mask(h2_pre).matrix());
  grads.dec_w2.noalias() += dh2 * h1.transpose();
  grads.dec_b2 += dh2;
  const VectorX<Scalar> dh1 =
      (params.dec_w2.transpose() * dh2).cwiseProduct(relu_mask(h1_pre).matrix());
  grads.dec_w1.noalias() += dh1 * x.transpose();
  grads.dec_b1 += dh1;
  const VectorX<Scalar> dx = params.dec_w1.transpose() * dh1;

  MatrixX<Scalar> dzn = dx.head(d).transpose().replicate(n_nodes, 1);
  dzn.row(a) += dx.tail(d).transpose();
  MatrixX<Scalar> dze = MatrixX<Scalar>::Zero(n_edges, d);

  for (int k = K - 1; k >= 0; --k) {
    const auto& l = params.layer[static_cast<std::size_t>(k)];
    auto& g = grads.layer[static_cast<std::size_t>(k)];
    MatrixX<Scalar> dzn_prev = MatrixX<Scalar>::Zero(n_nodes, d);
    MatrixX<Scalar> dze_prev = MatrixX<Scalar>::Zero(n_edges, d);

    // node update
    const MatrixX<Scalar> dnpre =
        detail::unpool_pairs(dzn).cwiseProduct(relu_mask(fp.node_pre[k]).matrix());
    const auto dphi = dnpre.leftCols(d);
    const auto dgamma = dnpre.rightCols(d);
    g.phi_w.noalias() += dphi.transpose() * fp.zn[k];
    g.phi_b += dphi.colwise().sum().transpose();
    dzn_prev.noalias() += dphi * l.phi_w;
    g.gamma_w.noalias() += dgamma.transpose() * fp.edge_sum[k];
    g.gamma_b += dgamma.colwise().sum().transpose();
    const MatrixX<Scalar> dagg = dgamma * l.gamma_w;
    for (Eigen::Index e = 0; e < n_edges; ++e) {
      dze_prev.row(e) += dagg.row(edges[e].u) + dagg.row(edges[e].v);
    }

    // edge update; the last round's edge output never reaches Q
    if (k + 1 < K) {
      const MatrixX<Scalar> depre =
          detail::unpool_pairs(dze).cwiseProduct(relu_mask(fp.edge_pre[k]).matrix());
      const auto dg = depre.leftCols(d);
      const auto dp = depre.rightCols(d);
      g.gamma_w.noalias() += dg.transpose() * fp.ze[k];
      g.gamma_b += dg.colwise().sum().transpose();
      dze_prev.noalias() += dg * l.gamma_w;
      g.phi_w.noalias() += dp.transpose() * fp.endpoint_sum[k];
      g.phi_b += dp.colwise().sum().transpose();
      const MatrixX<Scalar> dends = dp * l.phi_w;
      for (Eigen::Index e = 0; e < n_edges; ++e) {
        dzn_prev.row(edges[e].u) += dends.row(e);
        dzn_prev.row(edges[e].v) += dends.row(e);
      }
    }
    dzn = std::move(dzn_prev);
    dze = std::move(dze_prev);
  }

  grads.edge_in_w.noalias() += dze.transpose() * fp.couplings;
  grads.edge_in_b += dze.colwise().sum().transpose();
  grads.node_in_w.noalias() += dzn.transpose() * fp.features;
  grads.node_in_b += dzn.colwise().sum().transpose();
}

// ---------------------------------------------------------------------------
// parameter arithmetic and optimizer

template <class Scalar>
void axpy(Scalar alpha, const QNetworkParams<Scalar>& x, QNetworkParams<Scalar>& y) {
  zip_blocks([&](const std::string&, auto& yb, const auto& xb) { yb += alpha * xb; }, y, x);
}

template <class Scalar>
void set_zero(QNetworkParams<Scalar>& p) {
  zip_blocks([](const std::string&, auto& b) { b.setZero(); }, p);
}

/// Adaptive-moment optimizer state for one parameter set.
template <class Scalar>
struct Adam {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t steps = 0;
  QNetworkParams<Scalar> m;
  QNetworkParams<Scalar> v;

  Adam() = default;
  Adam(const QNetworkParams<Scalar>& shape, double lr)
      : learning_rate(lr), m(zeros_like(shape)), v(zeros_like(shape)) {}

  /// Descends along `grads`.
  void step(QNetworkParams<Scalar>& params, const QNetworkParams<Scalar>& grads) {
    ++steps;
    const Scalar c1 = Scalar(1) / (Scalar(1) - std::pow(Scalar(beta1), Scalar(steps)));
    const Scalar c2 = Scalar(1) / (Scalar(1) - std::pow(Scalar(beta2), Scalar(steps)));
    const Scalar b1 = Scalar(beta1), b2 = Scalar(beta2), lr = Scalar(learning_rate),
                 eps = Scalar(epsilon);
    zip_blocks(
        [&](const std::string&, auto& p, const auto& g, auto& mb, auto& vb) {
          mb = b1 * mb + (Scalar(1) - b1) * g;
          vb = b2 * vb + (Scalar(1) - b2) * g.cwiseAbs2();
          p.array() -= lr * (c1 * mb.array()) / ((c2 * vb.array()).sqrt() + eps);
        },
        params, grads, m, v);
  }
};

// ---------------------------------------------------------------------------
// checkpoint
//
//   sawr-checkpoint 1
//   embed_dim <d>
//   layers <K>
//   node_features 4
//   block <name> <rows> <cols>
//   <rows*cols values, row-major, shortest round-trip decimal>
//   ...

inline void write_checkpoint(std::ostream& out, const QNetwork& params) {
  out << "sawr-checkpoint 1\n"
      << "embed_dim " << params.embed_dim << '\n'
      << "layers " << params.layers << '\n'
      << "node_features " << kNodeFeatureDim << '\n';
  zip_blocks(
      [&](const std::string& name, const auto& b) {
        out << "block " << name << ' ' << b.rows() << ' ' << b.cols() << '\n';
        for (Eigen::Index r = 0; r < b.rows(); ++r) {
          for (Eigen::Index c = 0; c < b.cols(); ++c) {
            if (r || c) out << ' ';
            out << format_double(b(r, c));
          }
        }
        out << '\n';
      },
      params);
}

inline void write_checkpoint(const QNetwork& params, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_checkpoint(out, params);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline QNetwork read_checkpoint(std::istream& in) {
  std::size_t lineno = 0;
  std::string line;
  auto next_tokens = [&]() {
    while (std::getline(in, line)) {
      ++lineno;
      auto tok = tokenize(line);
      if (!tok.empty()) return tok;
    }
    throw ParseError(lineno, "unexpected end of checkpoint");
  };
  auto keyed_int = [&](std::string_view key) {
    auto tok = next_tokens();
    if (tok.size() != 2 || tok[0] != key) throw ParseError(lineno, "expected '" + std::string(key) + "'");
    auto v = parse_int<int>(tok[1]);
    if (!v) throw ParseError(lineno, "bad integer for " + std::string(key));
    return *v;
  };

  auto header = next_tokens();
  if (header.size() != 2 || header[0] != "sawr-checkpoint") {
    throw ParseError(lineno, "not a checkpoint file");
  }
  if (header[1] != "1") throw ParseError(lineno, "unsupported checkpoint version");
  const int d = keyed_int("embed_dim");
  const int k = keyed_int("layers");
  if (keyed_int("node_features") != kNodeFeatureDim) {
    throw ParseError(lineno, "node feature dimension mismatch");
  }
  QNetwork params;
  try {
    params = QNetwork::zeros(d, k);
  } catch (const std::invalid_argument& e) {
    throw ParseError(lineno, e.what());
  }
  zip_blocks(
      [&](const std::string& name, auto& b) {
        auto tok = next_tokens();
        if (tok.size() != 4 || tok[0] != "block" || tok[1] != name ||
            parse_int<Eigen::Index>(tok[2]) != b.rows() ||
            parse_int<Eigen::Index>(tok[3]) != b.cols()) {
          throw ParseError(lineno, "expected block " + name + " " + std::to_string(b.rows()) +
                                       "x" + std::to_string(b.cols()));
        }
        tok = next_tokens();
        if (static_cast<Eigen::Index>(tok.size()) != b.size()) {
          throw ParseError(lineno, "block " + name + " has wrong value count");
        }
        std::size_t t = 0;
        for (Eigen::Index r = 0; r < b.rows(); ++r) {
          for (Eigen::Index c = 0; c < b.cols(); ++c) {
            auto v = parse_double(tok[t++]);
            if (!v || !std::isfinite(*v)) throw ParseError(lineno, "bad value in block " + name);
            b(r, c) = *v;
          }
        }
      },
      params);
  return params;
}

inline QNetwork read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return read_checkpoint(in);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), e.detail(), path.string());
  }
}

}  // namespace sawr
