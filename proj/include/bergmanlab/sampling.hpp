#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bergmanlab/common.hpp"
#include "bergmanlab/geometry.hpp"
#include "bergmanlab/linalg.hpp"
#include "bergmanlab/spaces.hpp"

namespace bergman {

// ---------------------------------------------------------------------------
// Sampling families on the curve geometries, frame bounds of the evaluation
// operator, and the necessary density condition. Distances and cap radii are
// unit-sphere angles; the separation scale is sep * k^{-1/2} (the Fock
// lattice scale).
// ---------------------------------------------------------------------------

struct Cap {
  Point center;        // defaults to the chart-0 origin
  double radius = 0.5 * kPi;  // angular radius; pi/2 is a hemisphere
};

enum class FamilyKind { FibonacciUniform, CapDeficient, QuadratureNodes };

struct PointFamily {
  FamilyKind kind = FamilyKind::FibonacciUniform;
  double c = 1.5;   // target count is ceil(c * k^n)
  Cap cap;          // CapDeficient only
  double sep = 0.5; // separation scale parameter (0 disables the claim)
  std::string name() const {
    switch (kind) {
      case FamilyKind::FibonacciUniform: return "FIBONACCI_UNIFORM";
      case FamilyKind::CapDeficient: return "CAP_DEFICIENT";
      case FamilyKind::QuadratureNodes: return "QUADRATURE_NODES";
    }
    return "?";
  }
};

namespace detail {
inline Point sphere_to_point(double h, double phi) {
  Point p;
  p.nf = 1;
  const double t = (1.0 - h) / (1.0 + h);  // |z|^2 in chart 0
  if (h >= 0.0) {
    p.chart[0] = 0;
    p.z[0] = std::sqrt(std::max(t, 0.0)) * cplx(std::cos(phi), std::sin(phi));
  } else {
    p.chart[0] = 1;
    const double s = (1.0 + h) / (1.0 - h);  // |w|^2
    p.z[0] = std::sqrt(std::max(s, 0.0)) * cplx(std::cos(phi), -std::sin(phi));
  }
  return p;
}

inline std::vector<Point> fibonacci_points(int count) {
  // golden-angle spiral on the unit sphere
  constexpr double kGolden = 0.6180339887498949;
  std::vector<Point> pts;
  pts.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double h = 1.0 - 2.0 * (i + 0.5) / count;
    const double phi = 2.0 * kPi * std::fmod(i * kGolden, 1.0);
    pts.push_back(sphere_to_point(h, phi));
  }
  return pts;
}
}  // namespace detail

struct GeneratedSet {
  std::vector<Point> points;
  bool undersampled = false;  // #D_k < dim flag (set when dim is known)
};

/// Point set D_k of a family at tensor power k (curve geometries).
inline GeneratedSet generate(const PointFamily& fam, const ModelGeometry& g, int k,
                             const QuadratureGrid* grid = nullptr, int space_dim = -1) {
  if (g.n() != 1) throw std::invalid_argument("generate: sampling families live on curve geometries");
  GeneratedSet out;
  const int target = static_cast<int>(std::ceil(fam.c * k));
  if (fam.kind == FamilyKind::QuadratureNodes) {
    if (!grid) throw std::invalid_argument("generate: QUADRATURE_NODES needs a grid");
    for (const auto& nd : grid->nodes) out.points.push_back(nd.p);
  } else if (fam.kind == FamilyKind::FibonacciUniform) {
    if (target < 1) throw std::invalid_argument("generate: count < 1");
    out.points = detail::fibonacci_points(target);
  } else {
    if (target < 1) throw std::invalid_argument("generate: count < 1");
    // Spiral long enough that `target` points survive outside the cap.
    const double cap_frac = 0.5 * (1.0 - std::cos(fam.cap.radius));
    int total = static_cast<int>(std::ceil(target / std::max(1e-6, 1.0 - cap_frac))) + 8;
    for (int round = 0; round < 32; ++round) {
      out.points.clear();
      for (const Point& p : detail::fibonacci_points(total)) {
        if (g.geodesic_angle(p, fam.cap.center) <= fam.cap.radius) continue;
        out.points.push_back(p);
        if (static_cast<int>(out.points.size()) == target) break;
      }
      if (static_cast<int>(out.points.size()) == target) break;
      total += total / 4 + 8;
    }
  }
  if (space_dim >= 0 && static_cast<int>(out.points.size()) < space_dim) out.undersampled = true;
  return out;
}

inline double min_separation(const ModelGeometry& g, const std::vector<Point>& pts) {
  double m = kPi;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      m = std::min(m, g.geodesic_angle(pts[i], pts[j]));
  return m;
}

struct FrameBounds {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double A = 0.0;  // max(lambda_max, 1/lambda_min); infinity when rank-deficient
  Eigen::MatrixXcd S;
};

/// Extreme eigenvalues of S = k^{-n} sum_{x in D} psihat_i(x) conj(psihat_j(x)) e^{-k phi}.
/// With `weights` supplied (quadrature families) the weights replace k^{-n}.
inline FrameBounds frame_bounds(const HarmonicSpace& s, const std::vector<Point>& pts,
                                const std::vector<double>* weights = nullptr) {
  const double cq = comp_metric_scale(s.q);
  Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(s.dim, s.dim);
  std::vector<cplx> scratch(s.fdim[0] + s.fdim[1]);
  Eigen::VectorXcd raw(s.dim);
  const double kn = std::pow(static_cast<double>(s.k), -s.geom.n());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    s.values_at(pts[i], raw.data(), scratch.data());
    Eigen::VectorXcd v = s.onb.transpose() * raw;
    const double w = weights ? (*weights)[i] * cq : kn * cq;
    S.selfadjointView<Eigen::Lower>().rankUpdate(v, w);
  }
  S = S.selfadjointView<Eigen::Lower>();
  FrameBounds fb;
  fb.S = S;
  if (s.dim == 0) return fb;
  const EigenSystem es = jacobi_hermitian(S, false);
  fb.lambda_min = es.values[0];
  fb.lambda_max = es.values[es.values.size() - 1];
  fb.A = (fb.lambda_min <= 1e-12) ? std::numeric_limits<double>::infinity()
                                  : std::max(fb.lambda_max, 1.0 / fb.lambda_min);
  return fb;
}

struct RegionDensityRow {
  std::string family;
  int k = 0;
  double density = 0.0;  // #(D_k ∩ Omega) / k^n
  double mass = 0.0;     // curvature mass of Omega ∩ X(0)
  double margin = 0.0;   // density - mass
  bool clipped = false;  // region met degenerate nodes (clipped to X(0))
};

/// Per-region comparison of sampling density against the curvature mass, the
/// necessary condition of the sampling theorem (enforced on X(0) only).
inline RegionDensityRow density_report_row(const ModelGeometry& g, const QuadratureGrid& grid,
                                           const std::vector<Point>& pts, int k, const Cap& cap) {
  RegionDensityRow row;
  row.k = k;
  int cnt = 0;
  for (const auto& p : pts)
    if (g.geodesic_angle(p, cap.center) <= cap.radius) ++cnt;
  row.density = static_cast<double>(cnt) / std::pow(static_cast<double>(k), g.n());
  const double pin = std::pow(kPi, g.n());
  for (const auto& nd : grid.nodes) {
    if (g.geodesic_angle(nd.p, cap.center) > cap.radius) continue;
    const CurvatureData c = g.curvature_at(nd.p);
    if (c.degenerate() || c.q_index != 0) {
      row.clipped = true;
      continue;
    }
    row.mass += nd.w * c.det_abs / pin;
  }
  row.margin = row.density - row.mass;
  return row;
}

struct NecessaryConditionRow {
  std::string family;
  int k = 0;
  int count = 0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double A = 0.0;
  double worst_margin = 0.0;
};

struct NecessaryConditionReport {
  std::vector<NecessaryConditionRow> rows;
  // verdicts per family
  std::map<std::string, bool> deficient_decay;   // families with a negative margin: lambda_min trends to 0
  std::map<std::string, double> lambda_ratio;    // lambda_min(k_last) / lambda_min(k_first)
  std::map<std::string, double> max_A;
};

/// Contrapositive experiment: density-deficient families must show degrading
/// frame bounds over the sweep; dense families keep A bounded (recorded).
inline NecessaryConditionReport necessary_condition_experiment(
    const ModelGeometry& g, const std::vector<PointFamily>& fams, const std::vector<int>& ks,
    const GridResolution& res, const std::vector<Cap>& regions) {
  if (g.n() != 1 || (g.factors[0].kind == WeightKind::Neg))
    throw std::invalid_argument("necessary_condition_experiment: FS or PERTURBED geometry required");
  NecessaryConditionReport rep;
  for (const auto& fam : fams) {
    double first_lmin = 0.0, last_lmin = 0.0, maxA = 0.0;
    for (std::size_t ik = 0; ik < ks.size(); ++ik) {
      const int k = ks[ik];
      GridResolution r = res;
      r.max_k = std::max(res.max_k, k);
      const QuadratureGrid grid = build_grid(g, r);
      HarmonicSpace sp = make_space(g, k, 0, grid);
      GeneratedSet ds = generate(fam, g, k, &grid, sp.dim);
      NecessaryConditionRow row;
      row.family = fam.name();
      row.k = k;
      row.count = static_cast<int>(ds.points.size());
      if (fam.kind == FamilyKind::QuadratureNodes) {
        std::vector<double> w(grid.nodes.size());
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = grid.nodes[i].w;
        const FrameBounds fb = frame_bounds(sp, ds.points, &w);
        row.lambda_min = fb.lambda_min;
        row.lambda_max = fb.lambda_max;
        row.A = fb.A;
      } else {
        const FrameBounds fb = frame_bounds(sp, ds.points);
        row.lambda_min = fb.lambda_min;
        row.lambda_max = fb.lambda_max;
        row.A = fb.A;
      }
      double worst = std::numeric_limits<double>::infinity();
      for (const auto& cap : regions)
        worst = std::min(worst, density_report_row(g, grid, ds.points, k, cap).margin);
      row.worst_margin = regions.empty() ? 0.0 : worst;
      rep.rows.push_back(row);
      if (ik == 0) first_lmin = row.lambda_min;
      last_lmin = row.lambda_min;
      if (std::isfinite(row.A)) maxA = std::max(maxA, row.A);
      else maxA = std::numeric_limits<double>::infinity();
    }
    rep.lambda_ratio[fam.name()] = (first_lmin > 0) ? last_lmin / first_lmin
                                                    : std::numeric_limits<double>::quiet_NaN();
    rep.max_A[fam.name()] = maxA;
    rep.deficient_decay[fam.name()] =
        (first_lmin > 0) ? (last_lmin <= 0.1 * first_lmin) : true;
  }
  return rep;
}

}  // namespace bergman
