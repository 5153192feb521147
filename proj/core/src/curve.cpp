#include "kfbi/curve.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "kfbi/error.hpp"
#include "kfbi/quadrature.hpp"

namespace kfbi {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kGaussPoints = 16;
constexpr int kAnalyticPanels = 256;
constexpr int kSplinePanelsPerKnot = 4;
constexpr int kAnalyticSamples = 4096;
constexpr int kSplineSamplesPerKnot = 64;
constexpr int kSimplicitySamples = 2048;

double wrap(double t, double period) {
  double r = std::fmod(t, period);
  if (r < 0.0) r += period;
  if (r >= period) r = 0.0;
  return r;
}

std::string vec_list(const std::vector<Vec2>& pts) {
  std::ostringstream ss;
  ss.precision(17);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) ss << "; ";
    ss << pts[i].x << ' ' << pts[i].y;
  }
  return ss.str();
}

}  // namespace

const std::vector<Vec2>& dumbbell_control_points() {
  static const std::vector<Vec2> pts = {
      {0.000e+00, 8.333e-02},   {-1.944e-01, 1.698e-01},  {-3.889e-01, 3.302e-01},  {-5.833e-01, 4.167e-01},
      {-7.917e-01, 3.608e-01},  {-9.442e-01, 2.083e-01},  {-1.000e+00, 0.000e+00},  {-9.442e-01, -2.083e-01},
      {-7.917e-01, -3.608e-01}, {-5.833e-01, -4.167e-01}, {-3.889e-01, -3.302e-01}, {-1.944e-01, -1.698e-01},
      {0.000e+00, -8.333e-02},  {1.944e-01, -1.698e-01},  {3.889e-01, -3.302e-01},  {5.833e-01, -4.167e-01},
      {7.917e-01, -3.608e-01},  {9.442e-01, -2.083e-01},  {1.000e+00, 0.000e+00},   {9.442e-01, 2.083e-01},
      {7.917e-01, 3.608e-01},   {5.833e-01, 4.167e-01},   {3.889e-01, 3.302e-01},   {1.944e-01, 1.698e-01},
  };
  return pts;
}

const std::vector<Vec2>& heart_control_points() {
  static const std::vector<Vec2> pts = {
      {1.000e+00, 2.763e-01},   {9.639e-01, 5.482e-01},   {8.613e-01, 7.787e-01},   {7.076e-01, 9.328e-01},
      {5.263e-01, 9.868e-01},   {3.070e-01, 9.118e-01},   {8.772e-02, 7.724e-01},   {-1.316e-01, 6.974e-01},
      {-3.553e-01, 7.500e-01},  {-5.789e-01, 8.026e-01},  {-7.895e-01, 7.462e-01},  {-9.436e-01, 5.921e-01},
      {-1.000e+00, 3.816e-01},  {-9.808e-01, 1.440e-01},  {-9.238e-01, -8.645e-02}, {-8.308e-01, -3.026e-01},
      {-7.045e-01, -4.980e-01}, {-5.488e-01, -6.667e-01}, {-3.684e-01, -8.035e-01}, {-1.689e-01, -9.043e-01},
      {4.381e-02, -9.661e-01},  {2.632e-01, -9.868e-01},  {4.271e-01, -9.552e-01},  {5.829e-01, -8.618e-01},
      {7.226e-01, -7.113e-01},  {8.392e-01, -5.113e-01},  {9.270e-01, -2.717e-01},  {9.815e-01, -4.763e-03},
  };
  return pts;
}

CurveDescriptor CurveDescriptor::ellipse(double cx, double cy, double ra, double rb, double alpha) {
  CurveDescriptor d;
  d.kind = CurveKind::Ellipse;
  d.cx = cx;
  d.cy = cy;
  d.ra = ra;
  d.rb = rb;
  d.alpha = alpha;
  return d;
}

CurveDescriptor CurveDescriptor::star(int m, double c) {
  CurveDescriptor d;
  d.kind = CurveKind::Star;
  d.star_m = m;
  d.star_c = c;
  return d;
}

CurveDescriptor CurveDescriptor::spline(std::vector<Vec2> points) {
  CurveDescriptor d;
  d.kind = CurveKind::Spline;
  d.control_points = std::move(points);
  return d;
}

const std::vector<std::string>& CurveDescriptor::keys() {
  static const std::vector<std::string> k = {"kind",          "cx",           "cy",      "ra",     "rb",
                                             "alpha",         "sm",           "sc",      "rotate", "scale",
                                             "control_points", "control_point", "perturb"};
  return k;
}

CurveDescriptor CurveDescriptor::from_doc(const KeyValueDoc& doc) {
  CurveDescriptor d;
  const std::string kind = doc.get("kind").value_or("ellipse");
  if (kind == "ellipse") {
    d.kind = CurveKind::Ellipse;
    d.cx = doc.get_double("cx", 0.0);
    d.cy = doc.get_double("cy", 0.0);
    d.ra = doc.get_double("ra", 1.0);
    d.rb = doc.get_double("rb", 1.0);
    d.alpha = doc.get_double("alpha", 0.0);
  } else if (kind == "star") {
    d.kind = CurveKind::Star;
    d.star_m = static_cast<int>(doc.require_int("sm"));
    d.star_c = doc.require_double("sc");
  } else if (kind == "spline") {
    d.kind = CurveKind::Spline;
    if (auto builtin = doc.get("control_points")) {
      if (*builtin == "dumbbell") {
        d.control_points = dumbbell_control_points();
      } else if (*builtin == "heart") {
        d.control_points = heart_control_points();
      } else {
        const auto nums = parse_numbers(*builtin);
        if (nums.size() % 2 != 0) {
          throw ConfigError(doc.where("control_points") + "expected an even count of coordinates");
        }
        for (std::size_t i = 0; i < nums.size(); i += 2) d.control_points.push_back({nums[i], nums[i + 1]});
      }
    }
    for (const auto& row : doc.get_all("control_point")) {
      const auto nums = parse_numbers(row);
      if (nums.size() != 2) throw ConfigError(doc.where("control_point") + "expected 'x y', got '" + row + "'");
      d.control_points.push_back({nums[0], nums[1]});
    }
    for (const auto& row : doc.get_all("perturb")) {
      const auto nums = parse_numbers(row);
      if (nums.size() != 3) throw ConfigError(doc.where("perturb") + "expected 'index dx dy', got '" + row + "'");
      d.perturbations.push_back({static_cast<int>(nums[0]), {nums[1], nums[2]}});
    }
  } else {
    throw ConfigError(doc.where("kind") + "unknown curve kind '" + kind + "'");
  }
  d.rotate = doc.get_double("rotate", 0.0);
  d.scale = doc.get_double("scale", 1.0);
  return d;
}

void CurveDescriptor::write_to(KeyValueDoc& doc) const {
  auto num = [](double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
  };
  switch (kind) {
    case CurveKind::Ellipse:
      doc.set("kind", "ellipse");
      doc.set("cx", num(cx));
      doc.set("cy", num(cy));
      doc.set("ra", num(ra));
      doc.set("rb", num(rb));
      doc.set("alpha", num(alpha));
      break;
    case CurveKind::Star:
      doc.set("kind", "star");
      doc.set("sm", std::to_string(star_m));
      doc.set("sc", num(star_c));
      break;
    case CurveKind::Spline:
      doc.set("kind", "spline");
      doc.set("control_points", vec_list(control_points));
      for (const auto& p : perturbations) {
        doc.add("perturb", std::to_string(p.index) + " " + num(p.offset.x) + " " + num(p.offset.y));
      }
      break;
  }
  doc.set("rotate", num(rotate));
  doc.set("scale", num(scale));
}

std::pair<int, int> find_self_intersection(const std::vector<Vec2>& poly) {
  const int n = static_cast<int>(poly.size());
  auto orient = [](const Vec2& a, const Vec2& b, const Vec2& c) { return cross(b - a, c - a); };
  for (int i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    const double ax0 = std::min(a.x, b.x), ax1 = std::max(a.x, b.x);
    const double ay0 = std::min(a.y, b.y), ay1 = std::max(a.y, b.y);
    for (int j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // adjacent through the wrap
      const Vec2& c = poly[j];
      const Vec2& d = poly[(j + 1) % n];
      if (std::max(c.x, d.x) < ax0 || std::min(c.x, d.x) > ax1 || std::max(c.y, d.y) < ay0 ||
          std::min(c.y, d.y) > ay1) {
        continue;
      }
      const double o1 = orient(a, b, c), o2 = orient(a, b, d);
      const double o3 = orient(c, d, a), o4 = orient(c, d, b);
      if (((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) {
        return {i, j};
      }
    }
  }
  return {-1, -1};
}

BoundaryCurve BoundaryCurve::build(const CurveDescriptor& descriptor) {
  BoundaryCurve c;
  c.descriptor_ = descriptor;
  const auto& d = descriptor;
  if (!(d.scale > 0.0)) throw ConfigError("curve: scale must be positive");

  std::vector<double> breakpoints;
  switch (d.kind) {
    case CurveKind::Ellipse:
      if (!(d.ra > 0.0 && d.rb > 0.0)) throw ConfigError("curve: ellipse radii must be positive");
      c.period_ = kTwoPi;
      break;
    case CurveKind::Star:
      if (d.star_m < 3 || d.star_m > 6) throw ConfigError("curve: star S_m must be in {3..6}");
      if (d.star_c < 0.05 || d.star_c > 0.20) throw ConfigError("curve: star S_c must be in [0.05, 0.20]");
      c.period_ = kTwoPi;
      break;
    case CurveKind::Spline: {
      auto pts = d.control_points;
      if (pts.size() < 6) {
        throw ConfigError("curve: spline needs at least 6 control points, got " + std::to_string(pts.size()));
      }
      for (const auto& p : d.perturbations) {
        if (p.index < 0 || p.index >= static_cast<int>(pts.size())) {
          throw ConfigError("curve: perturbation index " + std::to_string(p.index) + " out of range");
        }
        pts[p.index] += p.offset;
      }
      const std::size_t n = pts.size();
      std::vector<double> chord(n);
      double total = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        chord[k] = norm(pts[(k + 1) % n] - pts[k]);
        if (!(chord[k] > 0.0)) throw ConfigError("curve: duplicate control point at index " + std::to_string(k));
        total += chord[k];
      }
      std::vector<double> knots(n), xs(n), ys(n);
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        knots[k] = kTwoPi * acc / total;
        acc += chord[k];
        xs[k] = pts[k].x;
        ys[k] = pts[k].y;
      }
      c.spline_x_ = std::make_shared<PeriodicCubicSpline>(knots, xs, kTwoPi);
      c.spline_y_ = std::make_shared<PeriodicCubicSpline>(knots, ys, kTwoPi);
      c.period_ = kTwoPi;
      breakpoints = knots;
      break;
    }
  }

  // Orientation from the signed area of the raw parameterization.
  {
    const auto& g = gauss_legendre(kGaussPoints);
    double area = 0.0;
    const int panels = 512;
    for (int k = 0; k < panels; ++k) {
      const double a = c.period_ * k / panels;
      const double b = c.period_ * (k + 1) / panels;
      for (int q = 0; q < kGaussPoints; ++q) {
        const double t = 0.5 * (a + b) + 0.5 * (b - a) * g.nodes[q];
        const auto r = c.raw(t);
        area += 0.5 * (b - a) * g.weights[q] * 0.5 * cross(r.pos, r.d1);
      }
    }
    if (!(std::abs(area) > 0.0)) throw ConfigError("curve: degenerate (zero area)");
    c.reversed_ = area < 0.0;
  }

  // Panel breakpoints in the oriented parameter.
  if (breakpoints.empty()) {
    for (int k = 0; k < kAnalyticPanels; ++k) c.panel_t_.push_back(c.period_ * k / kAnalyticPanels);
  } else {
    std::vector<double> b;
    for (double t : breakpoints) b.push_back(c.reversed_ ? wrap(c.period_ - t, c.period_) : t);
    std::sort(b.begin(), b.end());
    for (std::size_t k = 0; k < b.size(); ++k) {
      const double lo = b[k];
      const double hi = (k + 1 < b.size()) ? b[k + 1] : b[0] + c.period_;
      for (int q = 0; q < kSplinePanelsPerKnot; ++q) {
        c.panel_t_.push_back(lo + (hi - lo) * q / kSplinePanelsPerKnot);
      }
    }
    // Shift so the table starts at t = 0 (b[0] == 0 because knot 0 is at 0).
  }
  c.panel_s_.assign(c.panel_t_.size(), 0.0);
  double s = 0.0;
  for (std::size_t k = 0; k < c.panel_t_.size(); ++k) {
    c.panel_s_[k] = s;
    const double hi = (k + 1 < c.panel_t_.size()) ? c.panel_t_[k + 1] : c.panel_t_[0] + c.period_;
    s += c.integrate_speed(c.panel_t_[k], hi);
  }
  c.length_ = s;

  // Dense sample polyline for bracketing crossings.
  if (d.kind == CurveKind::Spline) {
    for (std::size_t k = 0; k < c.panel_t_.size(); k += kSplinePanelsPerKnot) {
      const double lo = c.panel_t_[k];
      const std::size_t next = k + kSplinePanelsPerKnot;
      const double hi = next < c.panel_t_.size() ? c.panel_t_[next] : c.panel_t_[0] + c.period_;
      for (int q = 0; q < kSplineSamplesPerKnot; ++q) {
        c.sample_t_.push_back(lo + (hi - lo) * q / kSplineSamplesPerKnot);
      }
    }
  } else {
    for (int k = 0; k < kAnalyticSamples; ++k) c.sample_t_.push_back(c.period_ * k / kAnalyticSamples);
  }
  c.bounds_ = {1e300, -1e300, 1e300, -1e300};
  for (double t : c.sample_t_) {
    const Vec2 p = c.at_parameter(t).pos;
    c.sample_pos_.push_back(p);
    c.bounds_[0] = std::min(c.bounds_[0], p.x);
    c.bounds_[1] = std::max(c.bounds_[1], p.x);
    c.bounds_[2] = std::min(c.bounds_[2], p.y);
    c.bounds_[3] = std::max(c.bounds_[3], p.y);
  }

  std::vector<Vec2> poly;
  poly.reserve(kSimplicitySamples);
  for (int k = 0; k < kSimplicitySamples; ++k) poly.push_back(c.at_parameter(c.period_ * k / kSimplicitySamples).pos);
  if (auto [i, j] = find_self_intersection(poly); i >= 0) {
    std::ostringstream ss;
    ss << "curve: self-intersecting boundary (segments " << i << " and " << j << " of a " << kSimplicitySamples
       << "-point polyline, near (" << poly[i].x << ", " << poly[i].y << "))";
    throw ConfigError(ss.str());
  }
  return c;
}

BoundaryCurve::Derivs BoundaryCurve::raw(double t) const {
  const auto& d = descriptor_;
  Derivs r;
  switch (d.kind) {
    case CurveKind::Ellipse: {
      const double ca = std::cos(d.alpha), sa = std::sin(d.alpha);
      const double ct = std::cos(t), st = std::sin(t);
      const Vec2 off{d.ra * ca * ct - d.rb * sa * st, d.ra * sa * ct + d.rb * ca * st};
      r.pos = Vec2{d.cx, d.cy} + off;
      r.d1 = {-d.ra * ca * st - d.rb * sa * ct, -d.ra * sa * st + d.rb * ca * ct};
      r.d2 = -off;
      break;
    }
    case CurveKind::Star: {
      const double m = d.star_m;
      const double rad = 1.0 - d.star_c + d.star_c * std::cos(m * t);
      const double r1 = -d.star_c * m * std::sin(m * t);
      const double r2 = -d.star_c * m * m * std::cos(m * t);
      const Vec2 e{std::cos(t), std::sin(t)};
      const Vec2 ep{-e.y, e.x};
      r.pos = rad * e;
      r.d1 = r1 * e + rad * ep;
      r.d2 = r2 * e + 2.0 * r1 * ep - rad * e;
      break;
    }
    case CurveKind::Spline: {
      const auto ex = spline_x_->eval(t);
      const auto ey = spline_y_->eval(t);
      r.pos = {ex.value, ey.value};
      r.d1 = {ex.d1, ey.d1};
      r.d2 = {ex.d2, ey.d2};
      break;
    }
  }
  if (d.rotate != 0.0 || d.scale != 1.0) {
    r.pos = d.scale * rotate(r.pos, d.rotate);
    r.d1 = d.scale * rotate(r.d1, d.rotate);
    r.d2 = d.scale * rotate(r.d2, d.rotate);
  }
  return r;
}

BoundaryCurve::Derivs BoundaryCurve::at_parameter(double t) const {
  t = wrap(t, period_);
  if (!reversed_) return raw(t);
  auto r = raw(wrap(period_ - t, period_));
  r.d1 = -r.d1;
  return r;
}

BoundaryCurve::Frame BoundaryCurve::frame_at_parameter(double t) const {
  const auto r = at_parameter(t);
  const double sp = norm(r.d1);
  Frame f;
  f.pos = r.pos;
  f.tangent = r.d1 / sp;
  f.normal = {f.tangent.y, -f.tangent.x};
  f.curvature = cross(r.d1, r.d2) / (sp * sp * sp);
  return f;
}

double BoundaryCurve::integrate_speed(double a, double b) const {
  const auto& g = gauss_legendre(kGaussPoints);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (int q = 0; q < kGaussPoints; ++q) sum += g.weights[q] * speed(mid + half * g.nodes[q]);
  return sum * half;
}

double BoundaryCurve::arclength_at(double t) const {
  t = wrap(t, period_);
  auto it = std::upper_bound(panel_t_.begin(), panel_t_.end(), t);
  const std::size_t k = static_cast<std::size_t>(std::distance(panel_t_.begin(), it)) - 1;
  return panel_s_[k] + integrate_speed(panel_t_[k], t);
}

double BoundaryCurve::parameter_at(double s) const {
  s = wrap(s, length_);
  auto it = std::upper_bound(panel_s_.begin(), panel_s_.end(), s);
  const std::size_t k = static_cast<std::size_t>(std::distance(panel_s_.begin(), it)) - 1;
  const double t0 = panel_t_[k];
  const double t1 = (k + 1 < panel_t_.size()) ? panel_t_[k + 1] : panel_t_[0] + period_;
  const double s0 = panel_s_[k];
  const double s1 = (k + 1 < panel_s_.size()) ? panel_s_[k + 1] : length_;
  const double target = s - s0;
  double lo = t0, hi = t1;
  double t = t0 + (t1 - t0) * target / (s1 - s0);
  for (int iter = 0; iter < 50; ++iter) {
    const double f = integrate_speed(t0, t) - target;
    if (f > 0.0) hi = t; else lo = t;
    const double step = f / speed(t);
    double next = t - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 1e-15 * period_) {
      t = next;
      break;
    }
    t = next;
  }
  return wrap(t, period_);
}

double BoundaryCurve::refine_root(int axis, double c, double ta, double tb) const {
  auto g = [&](double t) {
    const auto r = at_parameter(t);
    return std::pair{(axis == 0 ? r.pos.x : r.pos.y) - c, axis == 0 ? r.d1.x : r.d1.y};
  };
  double ga = g(ta).first;
  double lo = ta, hi = tb;
  double t = 0.5 * (ta + tb);
  for (int iter = 0; iter < 100; ++iter) {
    const auto [v, dv] = g(t);
    if (v == 0.0) return t;
    if ((v > 0.0) == (ga > 0.0)) {
      lo = t;
      ga = v;
    } else {
      hi = t;
    }
    double next = (dv != 0.0) ? t - v / dv : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 4e-16 * period_ || hi - lo <= 4e-16 * period_) return next;
    t = next;
  }
  return t;
}

std::vector<double> BoundaryCurve::level_crossings(int axis, double c) const {
  std::vector<double> roots;
  const std::size_t n = sample_t_.size();
  auto coord = [&](const Vec2& p) { return (axis == 0 ? p.x : p.y) - c; };
  for (std::size_t k = 0; k < n; ++k) {
    const double ga = coord(sample_pos_[k]);
    const double gb = coord(sample_pos_[(k + 1) % n]);
    if (ga == 0.0) {
      roots.push_back(sample_t_[k]);
    } else if ((ga > 0.0) != (gb > 0.0) && gb != 0.0) {
      const double tb = (k + 1 < n) ? sample_t_[k + 1] : period_;
      roots.push_back(wrap(refine_root(axis, c, sample_t_[k], tb), period_));
    }
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

bool BoundaryCurve::inside(const Vec2& p) const {
  int count = 0;
  for (double t : level_crossings(1, p.y)) {
    if (at_parameter(t).pos.x > p.x) ++count;
  }
  return (count % 2) == 1;
}

}  // namespace kfbi
