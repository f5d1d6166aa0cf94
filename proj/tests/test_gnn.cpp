#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <sstream>

#include "sawr/gnn.hpp"

using namespace sawr;

namespace {

/// Random small nonzero biases so no pre-activation sits on a symmetric kink.
QNetwork random_params(int d, int k, std::uint64_t seed) {
  auto p = init_params(d, k, seed);
  Rng rng(seed ^ 0xb1a5);
  zip_blocks(
      [&](const std::string& name, auto& b) {
        if (!is_bias_block(name)) return;
        for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = 0.2 * (2.0 * rng.uniform01() - 1.0);
      },
      p);
  return p;
}

ActionMask no_mask(std::size_t n) { return ActionMask::Constant(static_cast<Eigen::Index>(n), false); }

/// Sign pattern of every pre-activation in a forward pass.
std::vector<bool> activation_pattern(const ForwardPass<double>& fp) {
  std::vector<bool> out;
  auto add = [&](const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) out.push_back(m.data()[i] > 0);
  };
  for (const auto& m : fp.edge_pre) add(m);
  for (const auto& m : fp.node_pre) add(m);
  add(fp.h1_pre);
  add(fp.h2_pre);
  return out;
}

}  // namespace

TEST_CASE("init_params") {
  auto a = init_params(64, 3, 17);
  CHECK(a == init_params(64, 3, 17));
  CHECK_FALSE(a == init_params(64, 3, 18));
  CHECK(a.edge_in_w.size() == 64);
  CHECK(a.node_in_w.rows() == 64);
  CHECK(a.node_in_w.cols() == kNodeFeatureDim);
  REQUIRE(a.layer.size() == 3);
  for (const auto& l : a.layer) {
    CHECK(l.gamma_w.rows() == 64);
    CHECK(l.gamma_w.cols() == 64);
    CHECK(l.phi_w.rows() == 64);
    CHECK(l.phi_w.cols() == 64);
    CHECK(l.gamma_b.size() == 64);
    CHECK(l.phi_b.size() == 64);
  }
  CHECK(a.dec_w1.rows() == 64);
  CHECK(a.dec_w1.cols() == 128);
  CHECK(a.dec_w2.rows() == 64);
  CHECK(a.dec_w3.size() == 64);
  CHECK(a.dec_b3.size() == 1);
  CHECK(a.dec_b1.isZero());
  CHECK(a.layer[2].phi_b.isZero());
  CHECK(std::abs(a.dec_w1.maxCoeff()) <= std::sqrt(6.0 / 128));
  CHECK(parameter_count(a) == 64 * 2 + 64 * 4 + 64 + 3 * (2 * 64 * 64 + 2 * 64) + 64 * 128 + 64 +
                                  64 * 64 + 64 + 64 + 1);

  CHECK_THROWS_AS(init_params(7, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(init_params(0, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(init_params(8, 0, 1), std::invalid_argument);

  auto inst = random_instance(build_chimera(1), 3);
  auto fp = forward(inst, random_configuration(8, 4), a);
  CHECK(fp.q.size() == 8);
  CHECK(fp.q.allFinite());
}

TEST_CASE("edge_update examples") {
  auto p = QNetwork::zeros(4, 1);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(4);
  CHECK(edge_update(z, z, z, p, 0).isZero());

  p = random_params(4, 2, 5);
  Rng rng(6);
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd e(4), a(4), b(4);
    for (int i = 0; i < 4; ++i) {
      e[i] = rng.normal();
      a[i] = rng.normal();
      b[i] = rng.normal();
    }
    CHECK(edge_update(e, a, b, p, 1) == edge_update(e, b, a, p, 1));
  }

  auto id = QNetwork::zeros(2, 1);
  id.layer[0].gamma_w = Eigen::MatrixXd::Identity(2, 2);
  id.layer[0].phi_w = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd ze(2), zu(2), zv(2);
  ze << 1, -1;
  zu << 1.5, 0.25;
  zv << 0.5, -0.25;  // z_u + z_v = (2, 0)
  auto out = edge_update(ze, zu, zv, id, 0);
  CHECK(out[0] == 0.5);
  CHECK(out[1] == 1.0);

  CHECK_THROWS_AS(edge_update(Eigen::VectorXd(Eigen::VectorXd::Zero(3)), zu, zv, id, 0), std::invalid_argument);
  CHECK_THROWS_AS(edge_update(ze, zu, zv, id, 1), std::out_of_range);
}

TEST_CASE("node_update examples") {
  auto p = QNetwork::zeros(6, 1);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(6);
  CHECK(node_update(z, z, p, 0).isZero());

  // isolated node: empty edge sum is the zero vector
  p = random_params(6, 1, 9);
  Eigen::VectorXd zn = Eigen::VectorXd::LinSpaced(6, -1.0, 1.5);
  auto isolated = node_update(zn, z, p, 0);
  Eigen::VectorXd expect(12);
  expect << p.layer[0].phi_w * zn + p.layer[0].phi_b, p.layer[0].gamma_b;
  expect = expect.cwiseMax(0.0);
  for (int j = 0; j < 6; ++j) CHECK(isolated[j] == doctest::Approx(0.5 * (expect[2 * j] + expect[2 * j + 1])));

  // E_i is a plain sum of the adjacent edges, so doubling them doubles it
  auto topo = build_chimera(2);
  auto inst = random_instance(topo, 3);
  auto fp = forward(inst, random_configuration(*topo, 4), p);
  for (std::uint32_t i = 0; i < topo->node_count(); ++i) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(6), doubled = Eigen::VectorXd::Zero(6);
    for (const auto& nb : topo->neighbors(NodeId(i))) {
      sum += fp.ze[0].row(nb.edge).transpose();
      doubled += 2.0 * fp.ze[0].row(nb.edge).transpose();
    }
    CHECK(doubled == 2.0 * sum);
  }
  CHECK_THROWS_AS(node_update(zn, Eigen::VectorXd(Eigen::VectorXd::Zero(5)), p, 0), std::invalid_argument);
}

TEST_CASE("batched forward agrees with the per-element updates") {
  auto topo = build_chimera(2);
  auto inst = random_instance(topo, 21);
  auto cfg = random_configuration(*topo, 22);
  auto p = random_params(8, 3, 23);
  auto fp = forward(inst, cfg, p);
  const auto edges = topo->edges();
  for (int k = 0; k < 3; ++k) {
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const auto ei = static_cast<Eigen::Index>(e);
      Eigen::VectorXd expect = edge_update<double>(fp.ze[k].row(ei).transpose(), fp.zn[k].row(edges[e].u).transpose(),
                                                   fp.zn[k].row(edges[e].v).transpose(), p, k);
      CHECK((fp.ze[k + 1].row(ei).transpose() - expect).cwiseAbs().maxCoeff() <= 1e-12);
    }
    for (std::uint32_t i = 0; i < topo->node_count(); ++i) {
      Eigen::VectorXd agg = Eigen::VectorXd::Zero(8);
      for (const auto& nb : topo->neighbors(NodeId(i))) agg += fp.ze[k].row(nb.edge).transpose();
      Eigen::VectorXd expect = node_update<double>(fp.zn[k].row(i).transpose(), agg, p, k);
      CHECK((fp.zn[k + 1].row(i).transpose() - expect).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("initial embeddings and features") {
  auto topo = build_chimera(1);
  auto inst = random_instance(topo, 30);
  auto cfg = random_configuration(8, 31);
  auto f = node_features<double>(inst, cfg);
  for (int i = 0; i < 8; ++i) {
    CHECK(f(i, 0) == inst.biases()[i]);
    CHECK(f(i, 1) == cfg.spins[i]);
    CHECK(f(i, 2) == inst.biases()[i] * cfg.spins[i]);
    double mass = 0.0;
    for (std::size_t e = 0; e < topo->edge_count(); ++e) {
      if (topo->edges()[e].u == NodeId(i) || topo->edges()[e].v == NodeId(i)) mass += std::abs(inst.couplings()[e]);
    }
    CHECK(f(i, 3) == doctest::Approx(mass).epsilon(1e-14));
  }
  auto p = random_params(4, 1, 32);
  auto fp = forward(inst, cfg, p);
  for (int e = 0; e < 16; ++e) {
    CHECK((fp.ze[0].row(e).transpose() - (inst.couplings()[e] * p.edge_in_w + p.edge_in_b)).norm() <= 1e-14);
  }
}

TEST_CASE("encode shapes and state embedding") {
  auto topo = build_chimera(3);
  auto inst = random_instance(topo, 40);
  auto p = random_params(16, 3, 41);
  auto emb = encode(inst, random_configuration(*topo, 42), p);
  CHECK(emb.edge_embeddings.rows() == static_cast<Eigen::Index>(topo->edge_count()));
  CHECK(emb.edge_embeddings.cols() == 16);
  CHECK(emb.node_embeddings.rows() == 72);
  CHECK(emb.node_embeddings.cols() == 16);
  CHECK(emb.state_embedding.size() == 16);
  CHECK(emb.layer_count == 3);
  CHECK(emb.node_embeddings.minCoeff() >= 0.0);
  CHECK(emb.node_embeddings.allFinite());
  for (int j = 0; j < 16; ++j) {
    double s = 0.0;
    for (int i = 0; i < 72; ++i) s += emb.node_embeddings(i, j);
    CHECK(emb.state_embedding[j] == doctest::Approx(s).epsilon(1e-14));
  }
}

TEST_CASE("shore-swap automorphism permutes node embeddings") {
  auto topo = build_chimera(1);
  auto perm = [](std::uint32_t i) { return (i + 4) % 8; };
  auto p = random_params(8, 2, 50);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto inst = random_instance(topo, seed);
    auto cfg = random_configuration(8, seed + 7);
    Eigen::VectorXd J(16), h(8);
    for (std::size_t e = 0; e < 16; ++e) {
      const Edge& src = topo->edges()[e];
      const auto target = topo->find_edge(NodeId(perm(src.u)), NodeId(perm(src.v)));
      J[static_cast<Eigen::Index>(target)] = inst.couplings()[static_cast<Eigen::Index>(e)];
    }
    SpinConfiguration moved(SpinVector(8));
    for (std::uint32_t i = 0; i < 8; ++i) {
      h[perm(i)] = inst.biases()[i];
      moved.spins[perm(i)] = cfg.spins[i];
    }
    IsingInstance swapped(topo, J, h);
    auto a = encode(inst, cfg, p);
    auto b = encode(swapped, moved, p);
    for (std::uint32_t i = 0; i < 8; ++i) {
      CHECK((a.node_embeddings.row(i) - b.node_embeddings.row(perm(i))).cwiseAbs().maxCoeff() <= 1e-12);
    }
    CHECK((a.state_embedding - b.state_embedding).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("zero instance gives identical node embeddings") {
  for (std::uint32_t n : {1u, 2u}) {
    auto topo = build_chimera(n);
    IsingInstance zero(topo, Eigen::VectorXd::Zero(topo->edge_count()), Eigen::VectorXd::Zero(topo->node_count()));
    auto p = random_params(8, 3, 60);
    auto emb = encode(zero, uniform_configuration(topo->node_count(), 1), p);
    for (Eigen::Index i = 1; i < emb.node_embeddings.rows(); ++i) {
      CHECK((emb.node_embeddings.row(i) - emb.node_embeddings.row(0)).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("encoding does not depend on edge storage order") {
  auto reference = build_chimera(3);
  std::vector<Edge> shuffled_edges(reference->edges().begin(), reference->edges().end());
  std::mt19937 g(8);
  std::shuffle(shuffled_edges.begin(), shuffled_edges.end(), g);
  auto shuffled = std::make_shared<const ChimeraTopology>(3, shuffled_edges);

  auto inst = random_instance(reference, 70);
  Eigen::VectorXd J(inst.couplings().size());
  for (std::size_t e = 0; e < shuffled_edges.size(); ++e) {
    J[static_cast<Eigen::Index>(e)] =
        inst.couplings()[static_cast<Eigen::Index>(reference->find_edge(shuffled_edges[e].u, shuffled_edges[e].v))];
  }
  IsingInstance relabeled(shuffled, J, inst.biases());
  auto cfg = random_configuration(*reference, 71);
  auto p = random_params(16, 3, 72);
  auto a = forward(inst, cfg, p);
  auto b = forward(relabeled, cfg, p);

  auto bits_equal = [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (std::bit_cast<std::uint64_t>(x.data()[i]) != std::bit_cast<std::uint64_t>(y.data()[i])) return false;
    }
    return x.rows() == y.rows() && x.cols() == y.cols();
  };
  CHECK(bits_equal(a.zn.back(), b.zn.back()));
  CHECK(bits_equal(a.state_embedding, b.state_embedding));
  CHECK(bits_equal(a.q, b.q));
  // edge rows compared after mapping back to the reference order
  Eigen::MatrixXd b_edges(a.ze.back().rows(), a.ze.back().cols());
  for (std::size_t e = 0; e < shuffled_edges.size(); ++e) {
    b_edges.row(static_cast<Eigen::Index>(reference->find_edge(shuffled_edges[e].u, shuffled_edges[e].v))) =
        b.ze.back().row(static_cast<Eigen::Index>(e));
  }
  CHECK(bits_equal(a.ze.back(), b_edges));
}

TEST_CASE("q_values") {
  auto topo = build_chimera(2);
  auto inst = random_instance(topo, 80);
  auto p = random_params(8, 2, 81);
  auto fp = forward(inst, random_configuration(*topo, 82), p);
  auto emb = fp.embeddings();

  ActionMask mask = no_mask(32);
  mask[3] = mask[17] = true;
  auto q = q_values(emb, p, mask);
  CHECK(q[3] == -std::numeric_limits<double>::infinity());
  CHECK(q[17] == -std::numeric_limits<double>::infinity());
  for (int i = 0; i < 32; ++i) {
    if (!mask[i]) {
      CHECK(std::isfinite(q[i]));
      CHECK(q[i] == doctest::Approx(fp.q[i]).epsilon(1e-12));
    }
  }
  auto mq = masked_q(fp, mask);
  CHECK(mq[3] == -std::numeric_limits<double>::infinity());

  auto all = q_values(emb, p, ActionMask::Constant(32, true));
  CHECK((all.array() == -std::numeric_limits<double>::infinity()).all());

  auto flat = p;
  flat.dec_w3.setZero();
  flat.dec_b3[0] = 0.75;
  auto c = q_values(emb, flat, no_mask(32));
  CHECK((c.array() == 0.75).all());

  CHECK_THROWS_AS(q_values(emb, p, no_mask(31)), std::invalid_argument);
}

TEST_CASE("backward matches central finite differences") {
  auto topo = build_chimera(1);
  const double h = 1e-5;
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto inst = random_instance(topo, 90 + seed);
    auto cfg = random_configuration(8, 91 + seed);
    auto p = random_params(8, 2, 92 + seed);
    const Eigen::Index action = static_cast<Eigen::Index>(seed * 3 % 8);
    auto fp = forward(inst, cfg, p);
    const auto pattern = activation_pattern(fp);

    auto grads = zeros_like(p);
    backward(fp, p, NodeId(static_cast<std::uint32_t>(action)), 1.0, grads);

    // Walk every scalar of every block in lockstep: params copy and grads.
    auto probe = p;
    zip_blocks(
        [&](const std::string& name, auto& pb, const auto& gb) {
          for (Eigen::Index i = 0; i < pb.size(); ++i) {
            const double orig = pb.data()[i];
            pb.data()[i] = orig + h;
            auto fplus = forward(inst, cfg, probe);
            pb.data()[i] = orig - h;
            auto fminus = forward(inst, cfg, probe);
            pb.data()[i] = orig;
            if (activation_pattern(fplus) != pattern || activation_pattern(fminus) != pattern) {
              ++skipped;  // perturbation crosses a ReLU kink
              continue;
            }
            const double fd = (fplus.q[action] - fminus.q[action]) / (2 * h);
            const double an = gb.data()[i];
            const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
            if (rel > 1e-4) MESSAGE(name << "[" << i << "] analytic " << an << " fd " << fd);
            worst = std::max(worst, rel);
            ++checked;
          }
        },
        probe, grads);
  }
  CHECK(worst <= 1e-4);
  CHECK(skipped * 20 < checked);
}

TEST_CASE("backward: zero upstream gradient and dead branches") {
  auto topo = build_chimera(1);
  auto inst = random_instance(topo, 100);
  auto cfg = random_configuration(8, 101);
  auto p = random_params(8, 2, 102);
  auto fp = forward(inst, cfg, p);

  auto g = zeros_like(p);
  backward(fp, p, NodeId(2), 0.0, g);
  CHECK(g == zeros_like(p));

  // A hidden unit whose outgoing weight is zero passes no gradient back, and
  // the final round's edge output never reaches Q.
  p.dec_w3[5] = 0.0;
  fp = forward(inst, cfg, p);
  g = zeros_like(p);
  backward(fp, p, NodeId(2), 1.0, g);
  CHECK(g.dec_w2.row(5).isZero());
  CHECK(g.dec_b2[5] == 0.0);
  const double q0 = fp.q[2];
  auto probe = p;
  probe.dec_w2(5, 3) += 1e-3;
  CHECK(forward(inst, cfg, probe).q[2] == q0);
}

TEST_CASE("backward rejects mismatched forward pass") {
  auto inst = random_instance(build_chimera(1), 1);
  auto fp = forward(inst, random_configuration(8, 2), random_params(8, 2, 3));
  auto other = random_params(8, 3, 3);
  auto g = zeros_like(other);
  CHECK_THROWS_AS(backward(fp, other, NodeId(0), 1.0, g), std::logic_error);
  auto same = random_params(8, 2, 3);
  auto g2 = zeros_like(same);
  CHECK_THROWS_AS(backward(fp, same, NodeId(8), 1.0, g2), std::out_of_range);
}

TEST_CASE("Adam") {
  auto p = QNetwork::zeros(2, 1);
  auto g = zeros_like(p);
  g.dec_b3[0] = 4.0;
  g.dec_w3[1] = -0.001;
  Adam<double> opt(p, 0.01);
  opt.step(p, g);
  CHECK(p.dec_b3[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(p.dec_w3[1] == doctest::Approx(0.01).epsilon(1e-4));
  CHECK(p.dec_w3[0] == 0.0);
  CHECK(opt.steps == 1);

  // minimizes a quadratic (x - 3)^2
  auto q = QNetwork::zeros(2, 1);
  Adam<double> o2(q, 0.05);
  for (int t = 0; t < 2000; ++t) {
    auto grad = zeros_like(q);
    grad.dec_b3[0] = 2.0 * (q.dec_b3[0] - 3.0);
    o2.step(q, grad);
  }
  CHECK(q.dec_b3[0] == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("checkpoint round-trip is exact") {
  auto p = random_params(8, 3, 110);
  std::stringstream buf;
  write_checkpoint(buf, p);
  auto back = read_checkpoint(buf);
  CHECK(back == p);
  std::stringstream again;
  write_checkpoint(again, back);
  std::stringstream first;
  write_checkpoint(first, p);
  CHECK(again.str() == first.str());

  std::istringstream bad_version("sawr-checkpoint 2\n");
  CHECK_THROWS_AS(read_checkpoint(bad_version), ParseError);
  std::string text = first.str();
  std::istringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(read_checkpoint(truncated), ParseError);
  std::istringstream wrong_features("sawr-checkpoint 1\nembed_dim 8\nlayers 3\nnode_features 5\n");
  CHECK_THROWS_WITH_AS(read_checkpoint(wrong_features), doctest::Contains("line 4"), ParseError);
}
