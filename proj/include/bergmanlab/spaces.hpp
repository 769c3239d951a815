#pragma once

#include <Eigen/Dense>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "bergmanlab/common.hpp"
#include "bergmanlab/geometry.hpp"
#include "bergmanlab/linalg.hpp"
#include "bergmanlab/superform.hpp"

namespace bergman {

// Pointwise metric normalization on (0,q) coefficient blocks: each
// antiholomorphic coframe factor contributes a factor 2 to the Riemannian
// pairing (so e.g. the NEG_CP1 Gram oracle is 2 pi j!(M-2-j)!/(M-1)!).
inline double comp_metric_scale(int q) { return std::ldexp(1.0, q); }

/// Increasing-bitmask list of the q-element subsets of {1..n}.
inline std::vector<std::uint32_t> component_masks(int n, int q) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t J = 0; J < (1u << n); ++J)
    if (popcount32(J) == q) out.push_back(J);
  return out;
}

// ---------------------------------------------------------------------------
// Harmonic spaces H^0(X, L^k) (monomial ansatz) and H^q(X, L^k) for the
// catalog's negatively-curved factors, with Kuenneth products on the product
// geometry. All section values are stored in weighted frames: unit-coframe
// coefficients times e^{-k phi/2}, which keeps every stored number O(1).
// ---------------------------------------------------------------------------

struct HarmonicSpace {
  ModelGeometry geom;
  int k = 0;
  int q = 0;
  int dim = 0;
  std::uint32_t comp = 0;      // the single (0,q) block carried by the ansatz
  std::array<int, 2> fdim{1, 1};
  Eigen::MatrixXcd gram;       // G_ij = (psi_j, psi_i)
  Eigen::MatrixXcd onb;        // C with C^H G C = I
  double gram_cond = 0.0;
  bool has_gram = false;
  bool has_onb = false;

  // Weighted raw-basis values of one curve factor at a chart point.
  void factor_values(int f, int chart, cplx z, cplx* out) const {
    const CurveFactor& cf = geom.factors[f];
    const double t = std::norm(z);
    const double w2 = std::exp(-0.5 * k * geom.factor_phi(f, chart, t));
    if (cf.kind == WeightKind::Neg) {
      const int M = k * cf.degree;
      const int d = M - 1;  // basis count
      // chart 0: zbar^j (1+t)^{-M} dzbar; chart 1 mirrors with j -> M-2-j.
      const double base = (1.0 + t) * std::pow(1.0 + t, -static_cast<double>(M)) * w2;
      if (chart == 0) {
        cplx v = base;
        const cplx zb = std::conj(z);
        for (int j = 0; j < d; ++j) {
          out[j] = v;
          v *= zb;
        }
      } else {
        cplx v = -base;
        const cplx wb = std::conj(z);
        for (int j = d - 1; j >= 0; --j) {
          out[j] = v;
          v *= wb;
        }
      }
    } else {
      const int D = k * cf.degree;
      if (chart == 0) {
        cplx v = w2;
        for (int j = 0; j <= D; ++j) {
          out[j] = v;
          v *= z;
        }
      } else {
        cplx v = w2;
        for (int j = D; j >= 0; --j) {
          out[j] = v;
          v *= z;
        }
      }
    }
  }

  // Weighted values of the whole basis at a point (length dim).
  void values_at(const Point& p, cplx* out, cplx* scratch) const {
    if (geom.n() == 1) {
      factor_values(0, p.chart[0], p.z[0], out);
    } else {
      cplx* a = scratch;            // fdim[0]
      cplx* b = scratch + fdim[0];  // fdim[1]
      factor_values(0, p.chart[0], p.z[0], a);
      factor_values(1, p.chart[1], p.z[1], b);
      int idx = 0;
      for (int i = 0; i < fdim[0]; ++i)
        for (int j = 0; j < fdim[1]; ++j) out[idx++] = a[i] * b[j];
    }
  }

  /// Raw weighted basis values for a run of grid nodes, as columns.
  void eval_raw(std::span<const GridNode> nodes, Eigen::MatrixXcd& V) const {
    V.resize(dim, static_cast<Eigen::Index>(nodes.size()));
    std::vector<cplx> scratch(fdim[0] + fdim[1]);
    for (std::size_t i = 0; i < nodes.size(); ++i)
      values_at(nodes[i].p, V.col(static_cast<Eigen::Index>(i)).data(), scratch.data());
  }

  /// Orthonormal-basis values (requires orthonormalize()).
  void eval_onb(std::span<const GridNode> nodes, Eigen::MatrixXcd& V) const {
    if (!has_onb) throw std::logic_error("HarmonicSpace: orthonormalize() has not run");
    eval_raw(nodes, V);
    V = (onb.transpose() * V).eval();
  }

  Eigen::VectorXcd onb_values_at(const Point& p) const {
    GridNode nd;
    nd.p = p;
    Eigen::MatrixXcd V;
    eval_onb(std::span<const GridNode>(&nd, 1), V);
    return V.col(0);
  }
};

inline HarmonicSpace build_space(const ModelGeometry& g, int k, int q) {
  if (k < 1) throw std::invalid_argument("build_space: k must be positive");
  HarmonicSpace s;
  s.geom = g;
  s.k = k;
  s.q = q;
  if (g.n() == 1) {
    const CurveFactor& cf = g.factors[0];
    if (q == 0) {
      if (cf.kind == WeightKind::Neg)
        throw std::invalid_argument("build_space: q = 0 requires a semi-positive weight (FS/PERTURBED)");
      s.fdim = {k * cf.degree + 1, 1};
      s.comp = 0;
    } else if (q == 1) {
      if (cf.kind != WeightKind::Neg)
        throw std::invalid_argument("build_space: q = 1 on a curve requires NEG_CP1");
      s.fdim = {std::max(k * cf.degree - 1, 0), 1};
      s.comp = 1u;  // dzbar direction of the single factor
    } else {
      throw std::invalid_argument("build_space: unsupported form degree");
    }
    s.dim = s.fdim[0];
  } else {
    if (q != 1) throw std::invalid_argument("build_space: the product geometry carries q = 1 only");
    s.fdim = {k * g.factors[0].degree + 1, std::max(k * g.factors[1].degree - 1, 0)};
    s.comp = 2u;  // dzbar direction of factor 2
    s.dim = s.fdim[0] * s.fdim[1];
  }
  return s;
}

namespace detail {
inline constexpr std::size_t kEvalBlock = 512;

template <class Body>
void for_node_blocks(const QuadratureGrid& grid, std::size_t b, std::size_t e, Body&& body) {
  for (std::size_t i = b; i < e; i += kEvalBlock) {
    const std::size_t j = std::min(e, i + kEvalBlock);
    body(std::span<const GridNode>(grid.nodes.data() + i, j - i), i);
  }
}
}  // namespace detail

/// Gram matrix by quadrature, G_ij = sum_x w <psi_j, psi_i> e^{-k phi}; the
/// pointwise pairing uses orthonormal-coframe coefficients.
inline const Eigen::MatrixXcd& gram_matrix(HarmonicSpace& s, const QuadratureGrid& grid) {
  const double cq = comp_metric_scale(s.q);
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(s.dim, s.dim);
  parallel_ranges(
      grid.nodes.size(), A, [&] { return Eigen::MatrixXcd::Zero(s.dim, s.dim).eval(); },
      [&](Eigen::MatrixXcd& acc, std::size_t b, std::size_t e) {
        Eigen::MatrixXcd V;
        detail::for_node_blocks(grid, b, e, [&](std::span<const GridNode> nodes, std::size_t) {
          s.eval_raw(nodes, V);
          for (std::size_t i = 0; i < nodes.size(); ++i)
            V.col(static_cast<Eigen::Index>(i)) *= std::sqrt(nodes[i].w * cq);
          acc.selfadjointView<Eigen::Lower>().rankUpdate(V);
        });
      },
      [](Eigen::MatrixXcd& a, const Eigen::MatrixXcd& p) { a += p; });
  A = A.selfadjointView<Eigen::Lower>();
  if (!A.allFinite()) throw std::runtime_error("gram_matrix: non-finite entries");
  // Spec index convention G_ij = (psi_j, psi_i), i.e. the conjugate of the
  // plain value Gram; symmetrized exactly.
  s.gram = A.conjugate();
  s.gram = (0.5 * (s.gram + s.gram.adjoint())).eval();
  s.has_gram = true;
  s.has_onb = false;
  return s.gram;
}

inline const Eigen::MatrixXcd& orthonormalize(HarmonicSpace& s, bool with_cond = true) {
  if (!s.has_gram) throw std::logic_error("orthonormalize: gram_matrix() has not run");
  if (s.dim == 0) {
    s.onb.resize(0, 0);
    s.gram_cond = 1.0;
    s.has_onb = true;
    return s.onb;
  }
  OnbFactor f = onb_from_gram(s.gram, with_cond);
  s.onb = f.C;
  s.gram_cond = f.cond;
  s.has_onb = true;
  return s.onb;
}

inline HarmonicSpace make_space(const ModelGeometry& g, int k, int q, const QuadratureGrid& grid,
                                bool with_cond = false) {
  HarmonicSpace s = build_space(g, k, q);
  gram_matrix(s, grid);
  orthonormalize(s, with_cond);
  return s;
}

/// Bergman function B(x) = sum_i |psihat_i(x)|^2 e^{-k phi(x)} per grid node.
inline Eigen::VectorXd bergman_function(const HarmonicSpace& s, const QuadratureGrid& grid) {
  if (!s.has_onb) throw std::logic_error("bergman_function: orthonormalize() has not run");
  const double cq = comp_metric_scale(s.q);
  Eigen::VectorXd B = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.nodes.size()));
  if (s.dim == 0) return B;
  parallel_for_ranges(grid.nodes.size(), [&](std::size_t b, std::size_t e) {
    Eigen::MatrixXcd V;
    detail::for_node_blocks(grid, b, e, [&](std::span<const GridNode> nodes, std::size_t off) {
      s.eval_onb(nodes, V);
      for (std::size_t i = 0; i < nodes.size(); ++i)
        B[static_cast<Eigen::Index>(off + i)] = cq * V.col(static_cast<Eigen::Index>(i)).squaredNorm();
    });
  });
  return B;
}

/// Bergman (q,q)-form samples: Hermitian coefficient matrix over the (0,q)
/// component blocks at each node. The trace of each sample is B(x).
struct BergmanFormSamples {
  std::vector<std::uint32_t> comps;
  std::vector<Eigen::MatrixXcd> vals;  // one per node
};

inline BergmanFormSamples bergman_form(const HarmonicSpace& s, const QuadratureGrid& grid) {
  if (!s.has_onb) throw std::logic_error("bergman_form: orthonormalize() has not run");
  BergmanFormSamples out;
  out.comps = component_masks(s.geom.n(), s.q);
  const int nc = static_cast<int>(out.comps.size());
  int slot = 0;
  for (int c = 0; c < nc; ++c)
    if (out.comps[c] == s.comp) slot = c;
  const double cq = comp_metric_scale(s.q);
  out.vals.assign(grid.nodes.size(), Eigen::MatrixXcd::Zero(nc, nc));
  if (s.dim == 0) return out;
  parallel_for_ranges(grid.nodes.size(), [&](std::size_t b, std::size_t e) {
    Eigen::MatrixXcd V;
    detail::for_node_blocks(grid, b, e, [&](std::span<const GridNode> nodes, std::size_t off) {
      s.eval_onb(nodes, V);
      for (std::size_t i = 0; i < nodes.size(); ++i)
        out.vals[off + i](slot, slot) = cq * V.col(static_cast<Eigen::Index>(i)).squaredNorm();
    });
  });
  return out;
}

/// One Bergman-form sample as a GradedForm in the chart coframe.
inline GradedForm bergman_form_graded(const BergmanFormSamples& bf, int n, std::size_t node) {
  GradedForm f(n);
  for (std::size_t a = 0; a < bf.comps.size(); ++a)
    for (std::size_t b = 0; b < bf.comps.size(); ++b) {
      const cplx v = bf.vals[node](static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      if (v != cplx(0, 0)) f.add(bf.comps[a], bf.comps[b], v);
    }
  return f;
}

/// |K(x,y)|^2 e^{-k phi(x) - k phi(y)}: full coefficient square-sum of the
/// kernel between two points. Integrating over y at fixed x returns B(x).
inline double bergman_kernel_norm2(const HarmonicSpace& s, const Point& x, const Point& y) {
  if (s.dim == 0) return 0.0;
  const double cq = comp_metric_scale(s.q);
  const Eigen::VectorXcd vx = s.onb_values_at(x);
  const Eigen::VectorXcd vy = s.onb_values_at(y);
  const cplx kxy = vy.dot(vx);  // sum_a vhat_a(x) conj(vhat_a(y))
  return cq * cq * std::norm(kxy);
}

struct Extremal {
  Eigen::VectorXcd coeffs;  // unit vector in the orthonormal basis
  double b_theta = 0.0;     // B_theta(x) = |alpha_theta(x)|^2 at the extremal
};

/// Normalized extremal K_{x,theta}/||K_{x,theta}||. theta is a coefficient
/// vector over component_masks(n,q) and is normalized internally.
inline Extremal extremal_section(const HarmonicSpace& s, const Point& x, Eigen::VectorXcd theta) {
  const double cq = comp_metric_scale(s.q);
  const auto comps = component_masks(s.geom.n(), s.q);
  if (theta.size() != static_cast<Eigen::Index>(comps.size()))
    throw std::invalid_argument("extremal_section: direction has wrong component count");
  const double tn = cq * theta.squaredNorm();
  if (tn <= 0.0) throw std::domain_error("extremal_section: zero direction");
  theta /= std::sqrt(tn);
  int slot = 0;
  for (std::size_t c = 0; c < comps.size(); ++c)
    if (comps[c] == s.comp) slot = static_cast<int>(c);
  if (s.dim == 0) throw std::domain_error("extremal_section: empty space");
  const Eigen::VectorXcd vx = s.onb_values_at(x);
  // u_a = conj(<psihat_a(x), theta>), so that K_{x,theta} = sum_a u_a psihat_a.
  const Eigen::VectorXcd u = cq * theta[slot] * vx.conjugate();
  const double b_theta = u.squaredNorm();
  if (b_theta <= 1e-300) throw std::domain_error("extremal_section: B_theta(x) vanishes in this direction");
  Extremal ex;
  ex.coeffs = u / std::sqrt(b_theta);
  ex.b_theta = b_theta;
  return ex;
}

/// Max-norm quadrature residual of the reproducing identity
/// alpha(y) - (alpha, K_y) over the grid, for a member with the given
/// orthonormal-basis coefficients. End-to-end quadrature health check.
inline double reproducing_residual(const HarmonicSpace& s, const QuadratureGrid& grid,
                                   const Eigen::VectorXcd& alpha) {
  if (s.dim == 0) return 0.0;
  const double cq = comp_metric_scale(s.q);
  Eigen::VectorXcd m = Eigen::VectorXcd::Zero(s.dim);
  parallel_ranges(
      grid.nodes.size(), m, [&] { return Eigen::VectorXcd::Zero(s.dim).eval(); },
      [&](Eigen::VectorXcd& acc, std::size_t b, std::size_t e) {
        Eigen::MatrixXcd V;
        detail::for_node_blocks(grid, b, e, [&](std::span<const GridNode> nodes, std::size_t) {
          s.eval_onb(nodes, V);
          for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto col = V.col(static_cast<Eigen::Index>(i));
            const cplx aval = col.transpose() * alpha;  // alpha(x) in the weighted frame
            acc += (nodes[i].w * cq * aval) * col.conjugate();
          }
        });
      },
      [](Eigen::VectorXcd& a, const Eigen::VectorXcd& p) { a += p; });
  const Eigen::VectorXcd d = m - alpha;
  double res = 0.0;
  if (d.norm() == 0.0) return 0.0;
  std::mutex mu;
  parallel_for_ranges(grid.nodes.size(), [&](std::size_t b, std::size_t e) {
    Eigen::MatrixXcd V;
    double local = 0.0;
    detail::for_node_blocks(grid, b, e, [&](std::span<const GridNode> nodes, std::size_t) {
      s.eval_onb(nodes, V);
      for (std::size_t i = 0; i < nodes.size(); ++i)
        local = std::max(local, std::abs(cplx(V.col(static_cast<Eigen::Index>(i)).transpose() * d)));
    });
    std::scoped_lock lk(mu);
    res = std::max(res, local);
  });
  return res;
}

/// Floating-point residual of the harmonic equation d/dz (u e^{-psi}) = 0 for
/// the NEG-type ansatz, evaluated from two independently computed terms and
/// normalized by their magnitude.
inline double harmonicity_residual(const HarmonicSpace& s, const Point& p, int j) {
  int f = -1;
  for (int i = 0; i < s.geom.n(); ++i)
    if (s.geom.factors[i].kind == WeightKind::Neg) f = i;
  if (f < 0) throw std::invalid_argument("harmonicity_residual: no NEG factor");
  const int M = s.k * s.geom.factors[f].degree;
  cplx z = p.z[f];
  if (p.chart[f] == 1) z = 1.0 / z;  // evaluate in chart 0
  const double t = std::norm(z);
  const cplx zb = std::conj(z);
  // u e^{-psi} with u = zbar^j (1+t)^{-M}, e^{-psi} = (1+t)^{M}:
  //   T1 = (d/dz u) e^{-psi} = -M zbar^{j+1} (1+t)^{-M-1} * (1+t)^{M}
  //   T2 = u * (-(d/dz psi)) e^{-psi} = M zbar^{j+1} (1+t)^{-M} (1+t)^{M-1}
  const cplx zbj = std::pow(zb, j + 1);
  const cplx t1 = -static_cast<double>(M) * zbj * std::pow(1.0 + t, -double(M + 1)) * std::pow(1.0 + t, double(M));
  const cplx t2 = static_cast<double>(M) * zbj * std::pow(1.0 + t, -double(M)) * std::pow(1.0 + t, double(M - 1));
  const double mag = std::max({1.0, std::abs(t1), std::abs(t2)});
  return std::abs(t1 + t2) / mag;
}

}  // namespace bergman
