#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "bergmanlab/common.hpp"
#include "bergmanlab/geometry.hpp"
#include "bergmanlab/linalg.hpp"
#include "bergmanlab/spaces.hpp"
#include "bergmanlab/superform.hpp"

namespace bergman {

struct ScalarSymbol {
  std::string id;
  std::function<double(const Point&)> f;
};

/// Form symbol in the commutative subalgebra of diagonal (p,p) blocks; the
/// coefficient fields are real, so the symbol is dagger-real by construction.
struct SuperSymbol {
  std::string id;
  int n = 1;
  std::map<std::uint32_t, std::function<double(const Point&)>> blocks;  // J -> f_JJ

  void add_block(std::uint32_t I, std::uint32_t J, std::function<double(const Point&)> fn) {
    if (I != J)
      throw std::invalid_argument("SuperSymbol: off-diagonal (I != J) symbol blocks are unsupported");
    blocks[J] = std::move(fn);
  }
  GradedForm at(const Point& p) const {
    GradedForm f(n);
    for (const auto& [J, fn] : blocks) f.set(J, J, fn(p));
    return f;
  }
};

struct ToeplitzMatrix {
  Eigen::MatrixXcd m;
  std::string symbol_id;
  int k = 0;
  int q = 0;
  int n = 1;
  int dim() const { return static_cast<int>(m.rows()); }
};

namespace detail {

// Common assembly core: T = transpose(sum_x Vhat diag(w_x s_x) Vhat^H),
// symmetrized; s_x is the pointwise scalar kernel of the symbol.
inline Eigen::MatrixXcd assemble_with_field(const HarmonicSpace& s, const QuadratureGrid& grid,
                                            const std::function<double(const Point&)>& field) {
  if (!s.has_onb) throw std::logic_error("assemble: orthonormalize() has not run");
  const double cq = comp_metric_scale(s.q);
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(s.dim, s.dim);
  if (s.dim == 0) return A;
  parallel_ranges(
      grid.nodes.size(), A, [&] { return Eigen::MatrixXcd::Zero(s.dim, s.dim).eval(); },
      [&](Eigen::MatrixXcd& acc, std::size_t b, std::size_t e) {
        Eigen::MatrixXcd V, W;
        detail::for_node_blocks(grid, b, e, [&](std::span<const GridNode> nodes, std::size_t) {
          s.eval_onb(nodes, V);
          W = V;
          for (std::size_t i = 0; i < nodes.size(); ++i) {
            const double fx = field(nodes[i].p);
            if (!std::isfinite(fx)) throw std::runtime_error("assemble: non-finite symbol sample");
            W.col(static_cast<Eigen::Index>(i)) *= nodes[i].w * cq * fx;
          }
          acc.noalias() += W * V.adjoint();
        });
      },
      [](Eigen::MatrixXcd& a, const Eigen::MatrixXcd& p) { a += p; });
  Eigen::MatrixXcd T = A.transpose();
  return 0.5 * (T + T.adjoint()).eval();
}

}  // namespace detail

/// Scalar Toeplitz operator in the orthonormal basis.
inline ToeplitzMatrix assemble(const HarmonicSpace& s, const QuadratureGrid& grid,
                               const ScalarSymbol& sym) {
  ToeplitzMatrix T;
  T.m = detail::assemble_with_field(s, grid, sym.f);
  T.symbol_id = sym.id;
  T.k = s.k;
  T.q = s.q;
  T.n = s.geom.n();
  return T;
}

/// Super Toeplitz operator: entries via the wedge/Berezin pipeline per node.
/// For a (0,q) pair (alpha, beta) with a single component block J0 the node
/// kernel is kappa(x) = c_q (i/2)^n Berezin(beta+ ^ f ^ alpha ^ e^{omega'}),
/// evaluated with unit coefficients and multiplied by the value pairing.
inline ToeplitzMatrix assemble_super(const HarmonicSpace& s, const QuadratureGrid& grid,
                                     const SuperSymbol& sym) {
  if (sym.n != s.geom.n()) throw std::invalid_argument("assemble_super: symbol dimension mismatch");
  const int n = s.geom.n();
  const GradedForm basis_form = GradedForm::monomial(n, 0, s.comp, 1.0);
  const GradedForm basis_dag = dagger(basis_form);
  const GradedForm eop = exp_omega_prime(n);
  const GradedForm vol = omega_n_form(n);
  const cplx pref = std::pow(cplx(0, 0.5), n);
  auto kernel = [&](const Point& p) {
    const GradedForm f = sym.at(p);
    const GradedForm integrand = wedge(wedge(wedge(basis_dag, f), basis_form), eop);
    const cplx v = pref * berezin(integrand, vol);
    return v.real();
  };
  ToeplitzMatrix T;
  T.m = detail::assemble_with_field(s, grid, kernel);
  T.symbol_id = sym.id;
  T.k = s.k;
  T.q = s.q;
  T.n = n;
  return T;
}

struct SpectralMeasure {
  Eigen::VectorXd eigs;  // ascending
  int k = 0;
  int n = 1;
  double weight() const { return std::pow(static_cast<double>(k), -n); }
};

inline SpectralMeasure spectrum(const ToeplitzMatrix& T) {
  SpectralMeasure sm;
  sm.k = T.k;
  sm.n = T.n;
  if (T.dim() == 0) {
    sm.eigs.resize(0);
    return sm;
  }
  sm.eigs = jacobi_hermitian(T.m, false).values;
  return sm;
}

inline EigenSystem spectrum_with_vectors(const ToeplitzMatrix& T) { return jacobi_hermitian(T.m); }

/// Counting functions N(T > gamma), N(T < gamma); exact hits excluded.
inline std::pair<int, int> counting(const SpectralMeasure& sm, double gamma) {
  int above = 0, below = 0;
  for (Eigen::Index i = 0; i < sm.eigs.size(); ++i) {
    if (sm.eigs[i] > gamma) ++above;
    if (sm.eigs[i] < gamma) ++below;
  }
  return {above, below};
}

inline double trace(const ToeplitzMatrix& T) { return T.m.trace().real(); }

inline double trace_product(const ToeplitzMatrix& A, const ToeplitzMatrix& B) {
  if (A.dim() != B.dim()) throw std::invalid_argument("trace_product: dimension mismatch");
  return (A.m.cwiseProduct(B.m.transpose())).sum().real();
}

// ---------------------------------------------------------------------------
// Discrete measures on the real line: the limit pushforward of the curvature
// measure under f_chi, and the comparison metric. The comparison metric is
// the Levy distance of the normalized CDFs: the plain sup distance does not
// metrize weak-* convergence against limits with atoms (indicator symbols
// give atomic limits), while the Levy distance does.
// ---------------------------------------------------------------------------

struct DiscreteCDF {
  // sorted unique atom positions with cumulative masses; total > 0
  std::vector<double> pos;
  std::vector<double> cum;  // cum[i] = mass((-inf, pos[i]])
  double total = 0.0;

  static DiscreteCDF from_atoms(std::vector<std::pair<double, double>> atoms) {
    std::sort(atoms.begin(), atoms.end());
    DiscreteCDF c;
    double run = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      run += atoms[i].second;
      if (!c.pos.empty() && atoms[i].first == c.pos.back())
        c.cum.back() = run;
      else {
        c.pos.push_back(atoms[i].first);
        c.cum.push_back(run);
      }
    }
    c.total = run;
    return c;
  }
  double value(double x) const {  // right-continuous CDF (unnormalized)
    auto it = std::upper_bound(pos.begin(), pos.end(), x);
    if (it == pos.begin()) return 0.0;
    return cum[static_cast<std::size_t>(it - pos.begin()) - 1];
  }
  double value_left(double x) const {  // left limit
    auto it = std::lower_bound(pos.begin(), pos.end(), x);
    if (it == pos.begin()) return 0.0;
    return cum[static_cast<std::size_t>(it - pos.begin()) - 1];
  }
};

/// CDF of the positive measure (-1)^q (2 pi)^{-n} (i ddbar phi)_n restricted
/// to X(q) (equivalently pi^{-n} |det| omega_n), pushed forward by the given
/// field. Total mass is the curvature mass of X(q).
inline DiscreteCDF pushforward_cdf(const ModelGeometry& g, const QuadratureGrid& grid, int q,
                                   const std::function<double(const Point&)>& field) {
  std::vector<std::pair<double, double>> atoms;
  const double pin = std::pow(kPi, g.n());
  atoms.reserve(grid.nodes.size());
  for (const auto& nd : grid.nodes) {
    const CurvatureData c = g.curvature_at(nd.p);
    if (c.degenerate() || c.q_index != q) continue;
    atoms.emplace_back(field(nd.p), nd.w * c.det_abs / pin);
  }
  return DiscreteCDF::from_atoms(std::move(atoms));
}

namespace detail {
inline bool levy_ok(const DiscreteCDF& F, const DiscreteCDF& G, double eps) {
  // checks G(x) <= F(x+eps)+eps and F(x) <= G(x+eps)+eps for all x
  auto check_one = [eps](const DiscreteCDF& A, const DiscreteCDF& B) {
    for (std::size_t i = 0; i < A.pos.size(); ++i) {
      const double x = A.pos[i];
      if (A.cum[i] > B.value(x + eps) + eps + 1e-15) return false;
      if (A.value_left(x) > B.value_left(x + eps) + eps + 1e-15) return false;
    }
    return true;
  };
  return check_one(G, F) && check_one(F, G);
}
}  // namespace detail

/// Levy sup-distance between the normalized empirical eigenvalue CDF and the
/// normalized pushforward CDF; 0 for identical discrete measures and a
/// weak-*-faithful comparison for atomic limits.
inline double ks_distance(const SpectralMeasure& sm, const DiscreteCDF& limit) {
  if (sm.eigs.size() == 0 || limit.total <= 0.0)
    throw std::invalid_argument("ks_distance: zero total mass");
  std::vector<std::pair<double, double>> atoms;
  atoms.reserve(static_cast<std::size_t>(sm.eigs.size()));
  const double m = 1.0 / static_cast<double>(sm.eigs.size());
  for (Eigen::Index i = 0; i < sm.eigs.size(); ++i) atoms.emplace_back(sm.eigs[i], m);
  DiscreteCDF F = DiscreteCDF::from_atoms(std::move(atoms));
  DiscreteCDF G = limit;
  for (auto& c : G.cum) c /= G.total;
  G.total = 1.0;
  double lo = 0.0, hi = 1.0;
  if (detail::levy_ok(F, G, 0.0)) return 0.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (detail::levy_ok(F, G, mid) ? hi : lo) = mid;
  }
  return hi;
}

/// Model direction-index set I0 of a geometry in the chart frame (constant
/// over the catalog strata): bits of the negatively curved factors for q = 1,
/// empty for q = 0.
inline std::uint32_t model_I0(const ModelGeometry& g, int q) {
  if (q == 0) return 0;
  std::uint32_t I0 = 0;
  for (int f = 0; f < g.n(); ++f)
    if (g.factors[f].line_degree() < 0) I0 |= (1u << f);
  if (popcount32(I0) != q) throw std::invalid_argument("model_I0: geometry does not carry this q");
  return I0;
}

/// f_chi as a scalar field using the geometry's model direction set.
inline ScalarSymbol f_chi_field(const ModelGeometry& g, int q, const SuperSymbol& sym) {
  const std::uint32_t I0 = model_I0(g, q);
  ScalarSymbol out;
  out.id = sym.id + "_chi";
  std::vector<std::pair<std::uint32_t, std::function<double(const Point&)>>> keep;
  for (const auto& [J, fn] : sym.blocks)
    if (!(J & I0)) keep.emplace_back(J, fn);
  out.f = [keep](const Point& p) {
    double s = 0.0;
    for (const auto& [J, fn] : keep) s += fn(p);
    return s;
  };
  return out;
}

}  // namespace bergman
