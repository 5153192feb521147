#include "kfbi/catalog.hpp"

#include <cmath>
#include <complex>
#include <map>
#include <sstream>

#include "kfbi/error.hpp"
#include "kfbi/keyvalue.hpp"

namespace kfbi {

Jet& Jet::operator+=(const Jet& o) {
  u += o.u;
  ux += o.ux;
  uy += o.uy;
  uxx += o.uxx;
  uxy += o.uxy;
  uyy += o.uyy;
  return *this;
}

Jet Jet::operator*(double c) const { return {u * c, ux * c, uy * c, uxx * c, uxy * c, uyy * c}; }

namespace {

using cd = std::complex<double>;

// u = Re F(z) for analytic F with F' and F'' supplied.
Jet from_analytic(cd f, cd f1, cd f2) {
  return {f.real(), f1.real(), -f1.imag(), f2.real(), -f2.imag(), -f2.real()};
}

struct KindInfo {
  std::size_t nparams;
  bool harmonic;
};

const std::map<std::string, KindInfo>& kinds() {
  static const std::map<std::string, KindInfo> k = {
      {"exp_cos", {1, true}}, {"exp_sin", {1, true}}, {"sin_sinh", {1, true}}, {"cosh_cos", {1, true}},
      {"wave", {3, true}},    {"hpoly", {5, true}},   {"pole", {5, true}},    {"exp_lin", {2, false}}, {"sin_cos", {2, false}},
      {"poly", {2, false}},   {"const", {0, true}},
  };
  return k;
}

double ipow(double x, int p) {
  double r = 1.0;
  for (int k = 0; k < p; ++k) r *= x;
  return r;
}

}  // namespace

bool SolutionTerm::harmonic() const {
  if (kind == "poly") {
    const int p = static_cast<int>(params[0]), q = static_cast<int>(params[1]);
    return (p < 2 && q < 2);
  }
  return kinds().at(kind).harmonic;
}

Jet SolutionTerm::jet(const Vec2& pt) const {
  const double x = pt.x, y = pt.y;
  const cd z(x, y);
  const cd I(0.0, 1.0);
  Jet j;
  if (kind == "exp_cos") {
    const double a = params[0];
    const cd f = std::exp(a * z);
    j = from_analytic(f, a * f, a * a * f);
  } else if (kind == "exp_sin") {
    // e^{ay} sin(ax) = Re(i e^{-iaz})
    const double a = params[0];
    const cd f = I * std::exp(-I * a * z);
    j = from_analytic(f, -I * a * f, -a * a * f);
  } else if (kind == "sin_sinh") {
    // sin(ax) sinh(ay) = Re(i cos(az))
    const double a = params[0];
    j = from_analytic(I * std::cos(a * z), -I * a * std::sin(a * z), -I * a * a * std::cos(a * z));
  } else if (kind == "cosh_cos") {
    const double a = params[0];
    j = from_analytic(std::cosh(a * z), a * std::sinh(a * z), a * a * std::cosh(a * z));
  } else if (kind == "wave") {
    const double a = params[0], th = params[1], ph = params[2];
    const cd w = a * std::exp(-I * th);
    const cd f = std::exp(w * z + I * ph);
    j = from_analytic(f, w * f, w * w * f);
  } else if (kind == "hpoly") {
    const int k = static_cast<int>(params[0]);
    const double th = params[1], sc = params[4];
    const cd rot = std::exp(-I * th);
    const cd w = (z - cd(params[2], params[3])) / sc;
    const cd f = rot * std::pow(w, k);
    const cd f1 = k >= 1 ? rot * double(k) * std::pow(w, k - 1) / sc : cd(0.0);
    const cd f2 = k >= 2 ? rot * double(k * (k - 1)) * std::pow(w, k - 2) / (sc * sc) : cd(0.0);
    j = from_analytic(f, f1, f2);
  } else if (kind == "pole") {
    const int k = static_cast<int>(params[0]);
    const double th = params[1], sc = params[4];
    const cd d = z - cd(params[2], params[3]);
    const cd f = std::exp(-I * th) * std::pow(sc / d, k);
    j = from_analytic(f, -double(k) * f / d, double(k * (k + 1)) * f / (d * d));
  } else if (kind == "exp_lin") {
    const double a = params[0], b = params[1];
    const double e = std::exp(a * x + b * y);
    j = {e, a * e, b * e, a * a * e, a * b * e, b * b * e};
  } else if (kind == "sin_cos") {
    const double a = params[0], b = params[1];
    const double sx = std::sin(a * x), cx = std::cos(a * x), sy = std::sin(b * y), cy = std::cos(b * y);
    j = {sx * cy, a * cx * cy, -b * sx * sy, -a * a * sx * cy, -a * b * cx * sy, -b * b * sx * cy};
  } else if (kind == "poly") {
    const int p = static_cast<int>(params[0]), q = static_cast<int>(params[1]);
    auto d = [](double v, int n, int k) {  // k-th derivative of v^n
      double c = 1.0;
      for (int r = 0; r < k; ++r) c *= (n - r);
      return n - k < 0 ? 0.0 : c * ipow(v, n - k);
    };
    j = {d(x, p, 0) * d(y, q, 0), d(x, p, 1) * d(y, q, 0), d(x, p, 0) * d(y, q, 1),
         d(x, p, 2) * d(y, q, 0), d(x, p, 1) * d(y, q, 1), d(x, p, 0) * d(y, q, 2)};
  } else if (kind == "const") {
    j.u = 1.0;
  } else {
    throw ConfigError("solution term: unknown kind '" + kind + "'");
  }
  return j * coef;
}

const std::vector<std::string>& ManufacturedSolution::presets() {
  static const std::vector<std::string> names = {"laplace1", "laplace2", "laplace3", "poisson3",
                                                 "mh1",      "mh2",      "quadratic", "zero"};
  return names;
}

ManufacturedSolution ManufacturedSolution::parse(const std::string& text) {
  static const std::map<std::string, std::string> preset_text = {
      {"laplace1", "exp_cos 1 1 | exp_sin 1 1"},
      {"laplace2", "sin_sinh 1 3 | cosh_cos 0.5 1"},
      {"laplace3", "sin_sinh 1 2.5"},
      {"poisson3", "exp_cos 1 1 | exp_sin 1 1 | exp_lin 1 0.6 0.8"},
      {"mh1", "exp_cos 1 1 | exp_sin 1 1 | exp_lin 1 0.6 0.8"},
      {"mh2", "sin_cos 1 2.1 1.9"},
      {"quadratic", "poly 1 2 0 | poly 1 0 2"},
      {"zero", ""},
  };
  const std::string t = trim(text);
  if (auto it = preset_text.find(t); it != preset_text.end()) return parse(it->second);

  std::vector<SolutionTerm> terms;
  std::size_t start = 0;
  while (start <= t.size()) {
    const std::size_t bar = t.find('|', start);
    const std::string piece = trim(t.substr(start, bar == std::string::npos ? std::string::npos : bar - start));
    start = bar == std::string::npos ? t.size() + 1 : bar + 1;
    if (piece.empty()) continue;
    const auto words = split_ws(piece);
    SolutionTerm term;
    term.kind = words[0];
    const auto it = kinds().find(term.kind);
    if (it == kinds().end()) throw ConfigError("solution: unknown term kind '" + term.kind + "'");
    if (words.size() != it->second.nparams + 2) {
      throw ConfigError("solution: term '" + term.kind + "' expects a coefficient and " +
                        std::to_string(it->second.nparams) + " parameters, got '" + piece + "'");
    }
    std::vector<double> nums;
    for (std::size_t k = 1; k < words.size(); ++k) nums.push_back(parse_numbers(words[k]).at(0));
    term.coef = nums[0];
    term.params.assign(nums.begin() + 1, nums.end());
    if (term.kind == "hpoly" && (term.params[0] < 0 || term.params[4] == 0.0)) {
      throw ConfigError("solution: hpoly needs k >= 0 and a nonzero scale");
    }
    if (term.kind == "pole" && (term.params[0] < 1 || term.params[4] == 0.0)) {
      throw ConfigError("solution: pole needs k >= 1 and a nonzero scale");
    }
    if (term.kind == "poly" && (term.params[0] < 0 || term.params[1] < 0)) {
      throw ConfigError("solution: poly exponents must be >= 0");
    }
    terms.push_back(std::move(term));
  }
  return ManufacturedSolution(std::move(terms));
}

Jet ManufacturedSolution::jet(const Vec2& p) const {
  Jet j;
  for (const auto& t : terms_) j += t.jet(p);
  return j;
}

double ManufacturedSolution::source(const Vec2& p, double kappa) const {
  const Jet j = jet(p);
  return j.laplacian() - kappa * j.u;
}

double ManufacturedSolution::normal_derivative(const Vec2& p, const Vec2& n) const {
  const Jet j = jet(p);
  return n.x * j.ux + n.y * j.uy;
}

bool ManufacturedSolution::harmonic() const {
  for (const auto& t : terms_) {
    if (!t.harmonic()) return false;
  }
  return true;
}

std::string ManufacturedSolution::to_string() const {
  std::ostringstream ss;
  ss.precision(17);
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    if (k) ss << " | ";
    ss << terms_[k].kind << ' ' << terms_[k].coef;
    for (double v : terms_[k].params) ss << ' ' << v;
  }
  return ss.str();
}

ManufacturedSolution ManufacturedSolution::operator+(const ManufacturedSolution& o) const {
  auto t = terms_;
  t.insert(t.end(), o.terms_.begin(), o.terms_.end());
  return ManufacturedSolution(std::move(t));
}

ManufacturedSolution ManufacturedSolution::scaled(double c) const {
  auto t = terms_;
  for (auto& term : t) term.coef *= c;
  return ManufacturedSolution(std::move(t));
}

}  // namespace kfbi
