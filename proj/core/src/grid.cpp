#include "kfbi/grid.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "kfbi/container.hpp"
#include "kfbi/error.hpp"

namespace kfbi {

GridContext::GridContext(double x_lo, double x_hi, double y_lo, double y_hi, int I, int J)
    : x_lo_(x_lo), x_hi_(x_hi), y_lo_(y_lo), y_hi_(y_hi), I_(I), J_(J) {
  if (I < 8 || J < 8) throw ConfigError("grid: need I, J >= 8");
  if (!(x_hi > x_lo && y_hi > y_lo)) throw ConfigError("grid: empty box");
  const double hx = (x_hi - x_lo) / I;
  const double hy = (y_hi - y_lo) / J;
  if (std::abs(hx - hy) > 1e-14 * std::max(hx, hy)) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "grid: cells must be square (h_x = " << hx << ", h_y = " << hy << ")";
    throw ConfigError(ss.str());
  }
  h_ = hx;
}

GridContext GridContext::shifted(double dx, double dy) const {
  GridContext g = *this;
  g.x_lo_ += dx;
  g.x_hi_ += dx;
  g.y_lo_ += dy;
  g.y_hi_ += dy;
  return g;
}

GridField apply_operator(const GridContext& grid, double kappa, const GridField& u) {
  if (kappa < 0.0) throw ConfigError("apply_operator: kappa must be >= 0");
  if (u.I != grid.I() || u.J != grid.J()) throw ConfigError("apply_operator: field does not match grid");
  GridField out(grid);
  const double inv_h2 = 1.0 / (grid.h() * grid.h());
  for (int j = 1; j < grid.J(); ++j) {
    for (int i = 1; i < grid.I(); ++i) {
      out(i, j) = (u(i - 1, j) + u(i + 1, j) + u(i, j - 1) + u(i, j + 1) - 4.0 * u(i, j)) * inv_h2 - kappa * u(i, j);
    }
  }
  return out;
}

namespace {

std::string num(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace

void write_field(const std::filesystem::path& path, const GridContext& grid, const GridField& field) {
  if (field.I != grid.I() || field.J != grid.J()) throw ConfigError("write_field: field does not match grid");
  Container c;
  c.magic = "KFBIF1";
  c.header.set("I", std::to_string(grid.I()));
  c.header.set("J", std::to_string(grid.J()));
  c.header.set("x_lo", num(grid.x_lo()));
  c.header.set("x_hi", num(grid.x_hi()));
  c.header.set("y_lo", num(grid.y_lo()));
  c.header.set("y_hi", num(grid.y_hi()));
  c.header.set("byte_order", "little");
  c.header.set("element", "float64");
  append_f64(c.payload, field.data);
  write_container(path, c);
}

GridField read_field(const std::filesystem::path& path, GridContext* grid) {
  const Container c = read_container(path, "KFBIF1");
  const auto& h = c.header;
  h.reject_unknown({"I", "J", "x_lo", "x_hi", "y_lo", "y_hi", "byte_order", "element"});
  if (h.get("byte_order").value_or("little") != "little" || h.get("element").value_or("float64") != "float64") {
    throw ConfigError(path.string() + ": only little-endian float64 fields are supported");
  }
  const GridContext g(h.require_double("x_lo"), h.require_double("x_hi"), h.require_double("y_lo"),
                      h.require_double("y_hi"), static_cast<int>(h.require_int("I")),
                      static_cast<int>(h.require_int("J")));
  GridField f(g);
  if (c.payload.size() != f.data.size() * sizeof(double)) {
    throw ConfigError(path.string() + ": payload holds " + std::to_string(c.payload.size()) + " bytes, expected " +
                      std::to_string(f.data.size() * sizeof(double)));
  }
  PayloadReader r(c.payload, path.string());
  r.f64(f.data);
  if (grid) *grid = g;
  return f;
}

void write_field_csv(const std::filesystem::path& path, const GridContext& grid, const GridField& field) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "i,j,x,y,value\n";
  for (int j = 0; j <= grid.J(); ++j) {
    for (int i = 0; i <= grid.I(); ++i) {
      out << i << ',' << j << ',' << grid.x(i) << ',' << grid.y(j) << ',' << field(i, j) << '\n';
    }
  }
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace kfbi
