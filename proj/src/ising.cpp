#include "sawr/ising.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "sawr/format.hpp"
#include "sawr/rng.hpp"

namespace sawr {

IsingInstance::IsingInstance(TopologyPtr topo, Eigen::VectorXd couplings, Eigen::VectorXd biases)
    : topo_(std::move(topo)), couplings_(std::move(couplings)), biases_(std::move(biases)) {
  if (!topo_) throw std::invalid_argument("ising: null topology");
  if (static_cast<std::size_t>(couplings_.size()) != topo_->edge_count() ||
      static_cast<std::size_t>(biases_.size()) != topo_->node_count()) {
    throw std::invalid_argument("ising: parameter vectors do not match topology");
  }
  if (!couplings_.allFinite() || !biases_.allFinite()) {
    throw std::invalid_argument("ising: non-finite parameter");
  }
}

SpinConfiguration uniform_configuration(std::size_t n, std::int8_t value) {
  return SpinConfiguration(SpinVector::Constant(static_cast<Eigen::Index>(n), value));
}

namespace {

void check_length(const IsingInstance& inst, const SpinConfiguration& cfg) {
  if (cfg.size() != inst.size()) {
    throw std::invalid_argument("configuration has " + std::to_string(cfg.size()) +
                                " spins, instance has " + std::to_string(inst.size()));
  }
}

}  // namespace

double energy(const IsingInstance& inst, const SpinConfiguration& cfg) {
  check_length(inst, cfg);
  const auto edges = inst.topology().edges();
  const auto& J = inst.couplings();
  const auto& s = cfg.spins;
  double e = 0.0;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    e += J[k] * s[edges[k].u] * s[edges[k].v];
  }
  for (Eigen::Index i = 0; i < s.size(); ++i) e += inst.biases()[i] * s[i];
  return e;
}

double flip_delta(const IsingInstance& inst, const SpinConfiguration& cfg, NodeId i) {
  check_length(inst, cfg);
  const auto& J = inst.couplings();
  double field = inst.biases()[i];
  for (const Neighbor& nb : inst.topology().neighbors(i)) {
    field += J[nb.edge] * cfg.spins[nb.node];
  }
  return -2.0 * cfg.spins[i] * field;
}

void apply_flip(SpinConfiguration& cfg, NodeId i, double delta) {
  if (i.index >= cfg.size()) throw std::out_of_range("apply_flip: node out of range");
  cfg.spins[i] = static_cast<std::int8_t>(-cfg.spins[i]);
  if (cfg.cached_energy) *cfg.cached_energy += delta;
}

SpinConfiguration with_energy(const IsingInstance& inst, SpinConfiguration cfg) {
  cfg.cached_energy = energy(inst, cfg);
  return cfg;
}

IsingInstance random_instance(TopologyPtr topo, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd J(static_cast<Eigen::Index>(topo->edge_count()));
  Eigen::VectorXd h(static_cast<Eigen::Index>(topo->node_count()));
  for (Eigen::Index k = 0; k < J.size(); ++k) J[k] = rng.normal();
  for (Eigen::Index i = 0; i < h.size(); ++i) h[i] = rng.normal();
  return IsingInstance(std::move(topo), std::move(J), std::move(h));
}

SpinConfiguration random_configuration(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  SpinVector s(static_cast<Eigen::Index>(n));
  for (auto& v : s) v = (rng.next() >> 63) ? std::int8_t{1} : std::int8_t{-1};
  return SpinConfiguration(std::move(s));
}

SpinConfiguration random_configuration(const ChimeraTopology& topo, std::uint64_t seed) {
  return random_configuration(topo.node_count(), seed);
}

std::pair<SpinConfiguration, double> brute_force_ground_state(const IsingInstance& inst) {
  const std::size_t n = inst.size();
  if (n > 24) throw std::invalid_argument("brute_force_ground_state: more than 24 spins");
  SpinConfiguration cfg = uniform_configuration(n, 1);
  std::uint64_t best_code = 0;
  double best = energy(inst, cfg);
  for (std::uint64_t code = 1; code < (std::uint64_t{1} << n); ++code) {
    for (std::size_t i = 0; i < n; ++i) {
      cfg.spins[static_cast<Eigen::Index>(i)] = ((code >> i) & 1) ? -1 : 1;
    }
    const double e = energy(inst, cfg);
    if (e < best) {
      best = e;
      best_code = code;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    cfg.spins[static_cast<Eigen::Index>(i)] = ((best_code >> i) & 1) ? -1 : 1;
  }
  cfg.cached_energy = best;
  return {std::move(cfg), best};
}

IsingInstance scaled(const IsingInstance& inst, double factor) {
  return IsingInstance(inst.topology_ptr(), inst.couplings() * factor, inst.biases() * factor);
}

// ---------------------------------------------------------------------------
// text I/O

void write_instance(std::ostream& out, const IsingInstance& inst) {
  const auto& topo = inst.topology();
  out << "chimera " << topo.n() << '\n';
  for (std::size_t i = 0; i < inst.size(); ++i) {
    out << "b " << i << ' ' << format_double(inst.biases()[static_cast<Eigen::Index>(i)]) << '\n';
  }
  const auto edges = topo.edges();
  for (std::size_t k = 0; k < edges.size(); ++k) {
    out << "c " << edges[k].u.index << ' ' << edges[k].v.index << ' '
        << format_double(inst.couplings()[static_cast<Eigen::Index>(k)]) << '\n';
  }
}

void write_instance(const IsingInstance& inst, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_instance(out, inst);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

IsingInstance read_instance(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  TopologyPtr topo;
  Eigen::VectorXd J, h;
  std::vector<bool> have_b, have_c;

  auto value = [&](std::string_view tok) {
    auto v = parse_double(tok);
    if (!v || !std::isfinite(*v)) throw ParseError(lineno, "bad value '" + std::string(tok) + "'");
    return *v;
  };
  auto node = [&](std::string_view tok) {
    auto v = parse_int<std::uint32_t>(tok);
    if (!v || *v >= topo->node_count()) {
      throw ParseError(lineno, "unknown node index '" + std::string(tok) + "'");
    }
    return NodeId(*v);
  };

  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = tokenize(line);
    if (tok.empty()) continue;
    if (!topo) {
      if (tok[0] != "chimera" || tok.size() != 2) throw ParseError(lineno, "missing 'chimera <n>' header");
      auto n = parse_int<std::uint32_t>(tok[1]);
      if (!n || *n == 0 || *n > 64) throw ParseError(lineno, "bad chimera size");
      topo = build_chimera(*n);
      J = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(topo->edge_count()));
      h = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(topo->node_count()));
      have_b.assign(topo->node_count(), false);
      have_c.assign(topo->edge_count(), false);
      continue;
    }
    if (tok[0] == "b") {
      if (tok.size() != 3) throw ParseError(lineno, "malformed bias line");
      const NodeId i = node(tok[1]);
      if (have_b[i]) throw ParseError(lineno, "duplicate bias for node " + std::to_string(i.index));
      h[i] = value(tok[2]);
      have_b[i] = true;
    } else if (tok[0] == "c") {
      if (tok.size() != 4) throw ParseError(lineno, "malformed coupling line");
      NodeId u = node(tok[1]), v = node(tok[2]);
      if (v < u) std::swap(u, v);
      const std::size_t e = topo->find_edge(u, v);
      if (e == ChimeraTopology::npos) {
        throw ParseError(lineno, "no coupler (" + std::to_string(u.index) + ", " +
                                     std::to_string(v.index) + ") in chimera " +
                                     std::to_string(topo->n()));
      }
      if (have_c[e]) {
        throw ParseError(lineno, "duplicate coupling (" + std::to_string(u.index) + ", " +
                                     std::to_string(v.index) + ")");
      }
      J[static_cast<Eigen::Index>(e)] = value(tok[3]);
      have_c[e] = true;
    } else {
      throw ParseError(lineno, "unknown record '" + std::string(tok[0]) + "'");
    }
  }
  if (!topo) throw ParseError(lineno, "missing 'chimera <n>' header");
  for (std::size_t i = 0; i < have_b.size(); ++i) {
    if (!have_b[i]) throw ParseError(lineno, "missing bias for node " + std::to_string(i));
  }
  for (std::size_t e = 0; e < have_c.size(); ++e) {
    if (!have_c[e]) {
      const Edge& edge = topo->edge(e);
      throw ParseError(lineno, "missing coupling (" + std::to_string(edge.u.index) + ", " +
                                   std::to_string(edge.v.index) + ")");
    }
  }
  return IsingInstance(std::move(topo), std::move(J), std::move(h));
}

IsingInstance read_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return read_instance(in);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), e.detail(), path.string());
  }
}

void write_configuration(std::ostream& out, const SpinConfiguration& cfg) {
  out << "sigma " << cfg.size() << '\n';
  for (Eigen::Index i = 0; i < cfg.spins.size(); ++i) {
    if (i) out << ' ';
    out << (cfg.spins[i] > 0 ? "1" : "-1");
  }
  out << '\n';
}

void write_configuration(const SpinConfiguration& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_configuration(out, cfg);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

SpinConfiguration read_configuration(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::size_t> expected;
  std::vector<std::int8_t> values;
  while (std::getline(in, line)) {
    ++lineno;
    auto tok = tokenize(line);
    std::size_t k = 0;
    if (!expected && !tok.empty()) {
      if (tok[0] != "sigma" || tok.size() < 2) throw ParseError(lineno, "missing 'sigma <N>' header");
      auto n = parse_int<std::size_t>(tok[1]);
      if (!n) throw ParseError(lineno, "bad spin count");
      expected = *n;
      k = 2;
    }
    for (; k < tok.size(); ++k) {
      if (tok[k] == "1" || tok[k] == "+1") {
        values.push_back(1);
      } else if (tok[k] == "-1") {
        values.push_back(-1);
      } else {
        throw ParseError(lineno, "spin must be +1 or -1, got '" + std::string(tok[k]) + "'");
      }
    }
  }
  if (!expected) throw ParseError(lineno, "missing 'sigma <N>' header");
  if (values.size() != *expected) {
    throw ParseError(lineno, "expected " + std::to_string(*expected) + " spins, got " +
                                 std::to_string(values.size()));
  }
  SpinVector s(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) s[static_cast<Eigen::Index>(i)] = values[i];
  return SpinConfiguration(std::move(s));
}

SpinConfiguration read_configuration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return read_configuration(in);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), e.detail(), path.string());
  }
}

}  // namespace sawr
