#include "kfbi/interface_solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "kfbi/error.hpp"

namespace kfbi {

InterfaceSolver::InterfaceSolver(const BoundaryCurve& curve, const GridContext& grid, const BoundaryNodeSet& nodes,
                                 double kappa, double clearance_cells)
    : curve_(curve), nodes_(nodes), kappa_(kappa), class_(classify_nodes_robust(grid, curve, clearance_cells)) {
  if (kappa < 0.0) throw ConfigError("interface solver: kappa must be >= 0");
  fast_ = std::make_unique<FastSolver>(class_.grid, kappa);
  crossing_frames_.reserve(class_.crossings.size());
  for (const auto& c : class_.crossings) crossing_frames_.push_back(curve_.frame_at_parameter(c.t));
  stencils_.reserve(nodes_.M);
  for (int m = 0; m < nodes_.M; ++m) {
    stencils_.push_back(build_stencil(m, true));
    fallback_count_ += stencils_.back().fallback ? 1 : 0;
  }
  if (fallback_count_ > 0) {
    spdlog::warn("interface solver: {} of {} trace stencils used the 9-point fallback", fallback_count_, nodes_.M);
  }
}

void InterfaceSolver::check_spec(const InterfaceSpec& spec) const {
  if (spec.kappa != kappa_) throw ConfigError("interface solve: spec kappa differs from the solver's");
  if (spec.phi.size() != nodes_.M || spec.psi.size() != nodes_.M) {
    throw ConfigError("interface solve: Phi/Psi must have " + std::to_string(nodes_.M) + " nodal values");
  }
  if (spec.F.kind == SourceTerm::Kind::Sampled && (spec.F.sampled.I != grid().I() || spec.F.sampled.J != grid().J())) {
    throw ConfigError("interface solve: sampled source does not match the grid");
  }
}

namespace {

double source_jump(const SourceTerm& F, const Vec2& p) {
  return F.kind == SourceTerm::Kind::Analytic ? F.f(p) : 0.0;
}

}  // namespace

JumpValues InterfaceSolver::node_jumps(const InterfaceSpec& spec, int m) const {
  const BoundaryCurve::Frame f{nodes_.points[m], nodes_.tangents[m], nodes_.normals[m], nodes_.curvature[m]};
  const double s = nodes_.arclength[m];
  return jumps_at(f, spec.phi.eval(s), spec.psi.eval(s), source_jump(spec.F, f.pos), kappa_);
}

JumpValues InterfaceSolver::crossing_jumps(const InterfaceSpec& spec, int k) const {
  const auto& c = class_.crossings[k];
  return jumps_at(crossing_frames_[k], spec.phi.eval(c.s), spec.psi.eval(c.s), source_jump(spec.F, c.point),
                  kappa_);
}

JumpSet InterfaceSolver::node_jump_set(const InterfaceSpec& spec) const {
  JumpSet js;
  js.length = nodes_.length;
  js.at.resize(nodes_.M);
  for (int m = 0; m < nodes_.M; ++m) js.at[m] = node_jumps(spec, m);
  return js;
}

GridField InterfaceSolver::corrected_rhs(const InterfaceSpec& spec) const {
  check_spec(spec);
  const auto& g = grid();
  GridField rhs(g);
  switch (spec.F.kind) {
    case SourceTerm::Kind::Zero:
      break;
    case SourceTerm::Kind::Analytic:
      for (int j = 1; j < g.J(); ++j) {
        for (int i = 1; i < g.I(); ++i) {
          if (class_.is_interior(i, j)) rhs(i, j) = spec.F.f(g.node(i, j));
        }
      }
      break;
    case SourceTerm::Kind::Sampled:
      rhs = spec.F.sampled;
      break;
  }

  // Jumps at a crossing come from the density splines at its arclength and
  // the curve frame there; for polynomial data this keeps the correction exact.
  //
  // For a node p whose neighbour q lies across the boundary, the five-point
  // stencil sees the other side's value at q. Adding the jump's Taylor
  // polynomial about the crossing c, D = [v](q) ~ T_c(q - c), restores the
  // same-side extension:  interior p: v-(q) = v+(q) - D;  exterior p: v+(q) = v-(q) + D.
  const double inv_h2 = 1.0 / (g.h() * g.h());
  for (std::size_t k = 0; k < class_.crossings.size(); ++k) {
    const auto& c = class_.crossings[k];
    const JumpValues jv = crossing_jumps(spec, static_cast<int>(k));
    const int ia = c.i, ja = c.j;
    const int ib = c.axis == 0 ? c.i + 1 : c.i;
    const int jb = c.axis == 0 ? c.j : c.j + 1;
    auto correct = [&](int ip, int jp, int iq, int jq) {
      if (g.on_ring(ip, jp)) return;
      const double D = jv.taylor(g.node(iq, jq) - c.point);
      rhs(ip, jp) += (class_.is_interior(ip, jp) ? -D : D) * inv_h2;
    };
    correct(ia, ja, ib, jb);
    correct(ib, jb, ia, ja);
  }
  for (int i = 0; i <= g.I(); ++i) rhs(i, 0) = rhs(i, g.J()) = 0.0;
  for (int j = 0; j <= g.J(); ++j) rhs(0, j) = rhs(g.I(), j) = 0.0;
  return rhs;
}

// Six-point stencil for the boundary node z (marked *), shown for an inward
// direction pointing right and up:
//
//        o   o   .   .
//        |   |
//        o---o       .     o: host cell corners (i0..i0+1, j0..j0+1)
//        | * |       .     x: extension along the row of the corner nearest z
//        o---o - - - x        (column i0+2) and along its column (row j0+2)
//
// The extensions go toward the requested side; the four corners plus the
// two extensions are unisolvent for quadratics. Values from the other side
// are shifted by the jump's Taylor polynomial before fitting.
InterfaceSolver::Stencil InterfaceSolver::build_stencil(int m, bool interior_side) const {
  const auto& g = grid();
  const Vec2 z = nodes_.points[m];
  const Vec2 dir = interior_side ? -nodes_.normals[m] : nodes_.normals[m];
  const double h = g.h();
  const double ux = (z.x - g.x_lo()) / h;
  const double uy = (z.y - g.y_lo()) / h;
  int i0 = static_cast<int>(std::floor(ux));
  int j0 = static_cast<int>(std::floor(uy));
  if (ux == i0 && dir.x < 0.0) --i0;
  if (uy == j0 && dir.y < 0.0) --j0;
  if (i0 < 0 || j0 < 0 || i0 >= g.I() || j0 >= g.J()) throw ConfigError("trace stencil: boundary node outside grid");

  const int jr = (uy - j0 <= 0.5) ? j0 : j0 + 1;
  const int ic = (ux - i0 <= 0.5) ? i0 : i0 + 1;
  int ie = dir.x >= 0.0 ? i0 + 2 : i0 - 1;
  int je = dir.y >= 0.0 ? j0 + 2 : j0 - 1;
  if (ie < 0 || ie > g.I()) ie = dir.x >= 0.0 ? i0 - 1 : i0 + 2;
  if (je < 0 || je > g.J()) je = dir.y >= 0.0 ? j0 - 1 : j0 + 2;

  Stencil st;
  st.ii = {i0, i0 + 1, i0, i0 + 1, ie, ic};
  st.jj = {j0, j0, j0 + 1, j0 + 1, jr, je};

  auto fit = [&](Stencil& s) {
    const int n = static_cast<int>(s.ii.size());
    Eigen::MatrixXd A(n, 6);
    s.offset.resize(n);
    for (int k = 0; k < n; ++k) {
      s.offset[k] = g.node(s.ii[k], s.jj[k]) - z;
      const double a = s.offset[k].x / h, b = s.offset[k].y / h;
      A.row(k) << 1.0, a, b, 0.5 * a * a, a * b, 0.5 * b * b;
    }
    return A;
  };

  Eigen::MatrixXd A = fit(st);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  Eigen::MatrixXd pinv;
  if (lu.rcond() > 1e-8) {
    pinv = lu.inverse();
  } else {
    // Degenerate geometry: 3x3 block around the nearest node, least squares.
    Stencil wide;
    const int ci = std::clamp(static_cast<int>(std::lround(ux)), 1, g.I() - 1);
    const int cj = std::clamp(static_cast<int>(std::lround(uy)), 1, g.J() - 1);
    for (int dj = -1; dj <= 1; ++dj) {
      for (int di = -1; di <= 1; ++di) {
        wide.ii.push_back(ci + di);
        wide.jj.push_back(cj + dj);
      }
    }
    A = fit(wide);
    pinv = A.completeOrthogonalDecomposition().pseudoInverse();
    st = std::move(wide);
    st.fallback = true;
    spdlog::debug("trace stencil at node {}: 6-point system singular, using 9-point least squares", m);
  }
  st.weights = pinv.topRows(3);
  st.weights.row(1) /= h;
  st.weights.row(2) /= h;
  return st;
}

BoundaryTrace InterfaceSolver::interpolate_trace(const GridField& field, const InterfaceSpec& spec, bool want_normal,
                                                 bool interior_side) const {
  check_spec(spec);
  BoundaryTrace tr;
  tr.value.resize(nodes_.M);
  if (want_normal) tr.normal_derivative.resize(nodes_.M);
  for (int m = 0; m < nodes_.M; ++m) {
    const Stencil st = interior_side ? stencils_[m] : build_stencil(m, false);
    const JumpValues jv = node_jumps(spec, m);
    double V = 0.0, Vx = 0.0, Vy = 0.0;
    for (std::size_t k = 0; k < st.ii.size(); ++k) {
      double val = field(st.ii[k], st.jj[k]);
      const bool in = class_.is_interior(st.ii[k], st.jj[k]);
      if (in != interior_side) val += (interior_side ? 1.0 : -1.0) * jv.taylor(st.offset[k]);
      V += st.weights(0, k) * val;
      Vx += st.weights(1, k) * val;
      Vy += st.weights(2, k) * val;
    }
    tr.value[m] = V;
    if (want_normal) tr.normal_derivative[m] = nodes_.normals[m].x * Vx + nodes_.normals[m].y * Vy;
  }
  return tr;
}

InterfaceSolution InterfaceSolver::solve(const InterfaceSpec& spec, bool want_normal) const {
  InterfaceSolution out;
  out.field = fast_->solve(corrected_rhs(spec));
  out.trace = interpolate_trace(out.field, spec, want_normal);
  return out;
}

InterfaceSolution solve_interface(const BoundaryCurve& curve, const GridContext& grid, const BoundaryNodeSet& nodes,
                                  const InterfaceSpec& spec, bool want_normal) {
  return InterfaceSolver(curve, grid, nodes, spec.kappa).solve(spec, want_normal);
}

}  // namespace kfbi
