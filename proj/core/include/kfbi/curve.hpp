#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "kfbi/keyvalue.hpp"
#include "kfbi/spline.hpp"
#include "kfbi/vec2.hpp"

namespace kfbi {

enum class CurveKind { Ellipse, Star, Spline };

struct ControlPointPerturbation {
  int index = 0;
  Vec2 offset;
};

/// Parameters of a closed boundary. Text form (key = value):
///
///     kind = ellipse | star | spline
///     cx, cy, ra, rb, alpha          # ellipse
///     sm, sc                         # star: r(t) = 1 - sc + sc cos(sm t)
///     control_points = dumbbell      # spline: builtin list, or
///     control_point = x y            #   one line per point
///     perturb = index dx dy          # spline control-point offsets
///     rotate = angle                 # applied after construction
///     scale = factor
struct CurveDescriptor {
  CurveKind kind = CurveKind::Ellipse;

  double cx = 0.0;
  double cy = 0.0;
  double ra = 1.0;
  double rb = 1.0;
  double alpha = 0.0;

  int star_m = 5;
  double star_c = 0.1;

  std::vector<Vec2> control_points;
  std::vector<ControlPointPerturbation> perturbations;

  double rotate = 0.0;
  double scale = 1.0;

  static CurveDescriptor ellipse(double cx, double cy, double ra, double rb, double alpha);
  static CurveDescriptor star(int m, double c);
  static CurveDescriptor spline(std::vector<Vec2> points);
  static CurveDescriptor from_doc(const KeyValueDoc& doc);
  void write_to(KeyValueDoc& doc) const;

  static const std::vector<std::string>& keys();
};

/// Control points of the builtin dumbbell and heart shapes.
const std::vector<Vec2>& dumbbell_control_points();
const std::vector<Vec2>& heart_control_points();

/// Closed, simple, counterclockwise C² curve with an arclength map.
///
/// The raw parameter t runs over [0, parameter_period()); arclength s over
/// [0, length()). All queries are const and thread-safe.
class BoundaryCurve {
 public:
  struct Derivs {
    Vec2 pos;
    Vec2 d1;  // d/dt
    Vec2 d2;  // d²/dt²
  };

  struct Frame {
    Vec2 pos;
    Vec2 tangent;
    Vec2 normal;       // outward, (tau_y, -tau_x)
    double curvature;  // signed, positive for convex CCW arcs
  };

  /// Throws ConfigError when the parameters are out of range or the curve
  /// self-intersects.
  static BoundaryCurve build(const CurveDescriptor& descriptor);

  const CurveDescriptor& descriptor() const { return descriptor_; }

  double parameter_period() const { return period_; }
  Derivs at_parameter(double t) const;
  double length() const { return length_; }
  double arclength_at(double t) const;
  double parameter_at(double s) const;
  Frame frame_at_parameter(double t) const;
  Frame frame(double s) const { return frame_at_parameter(parameter_at(s)); }

  /// Parameters t with y(t) = c (axis 1) or x(t) = c (axis 0), ascending.
  std::vector<double> level_crossings(int axis, double c) const;

  /// Ray-casting point-in-domain test with exact crossing location.
  bool inside(const Vec2& p) const;

  /// Bounding box of a dense sample: {x_min, x_max, y_min, y_max}.
  std::array<double, 4> bounds() const { return bounds_; }

  /// Dense polyline used for bracketing (closed; last point != first).
  const std::vector<Vec2>& samples() const { return sample_pos_; }

 private:
  BoundaryCurve() = default;
  Derivs raw(double t) const;
  double speed(double t) const { return norm(at_parameter(t).d1); }
  double integrate_speed(double a, double b) const;
  double refine_root(int axis, double c, double ta, double tb) const;

  CurveDescriptor descriptor_;
  double period_ = 0.0;
  bool reversed_ = false;

  // Spline kind: periodic splines for x(t), y(t).
  std::shared_ptr<const PeriodicCubicSpline> spline_x_;
  std::shared_ptr<const PeriodicCubicSpline> spline_y_;

  // Arclength table over panels.
  std::vector<double> panel_t_;
  std::vector<double> panel_s_;
  double length_ = 0.0;

  std::vector<double> sample_t_;
  std::vector<Vec2> sample_pos_;
  std::array<double, 4> bounds_{};
};

/// Pairwise segment intersection test on a closed polyline; returns the
/// index pair of the first crossing segments, or {-1, -1}.
std::pair<int, int> find_self_intersection(const std::vector<Vec2>& polyline);

}  // namespace kfbi
