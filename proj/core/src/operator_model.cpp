#include "kfbi/operator_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "kfbi/container.hpp"
#include "kfbi/error.hpp"

namespace kfbi {

namespace {

constexpr const char* kWeightsMagic = "KFBIW1";
constexpr const char* kGoldenMagic = "KFBIG1";

std::string num(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += num(v[i]);
  }
  return s;
}

// ---- layer evaluation -------------------------------------------------------

struct Shape {
  int c = 0, h = 0, w = 0;
  bool spatial = false;
  int flat = 0;
  int size() const { return spatial ? c * h * w : flat; }
  std::string str() const {
    return spatial ? "(" + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")"
                   : "(" + std::to_string(flat) + ")";
  }
};

Shape flat_shape(int n) { return Shape{0, 0, 0, false, n}; }

const char* type_name(Layer::Type t) {
  switch (t) {
    case Layer::Type::Dense: return "dense";
    case Layer::Type::Conv2d: return "conv2d";
    case Layer::Type::ConvTranspose2d: return "conv_transpose2d";
    case Layer::Type::Activation: return "activation";
    case Layer::Type::Reshape: return "reshape";
    case Layer::Type::Flatten: return "flatten";
  }
  return "?";
}

bool known_activation(const std::string& a) {
  for (const char* n : {"identity", "relu", "tanh", "sigmoid", "softplus", "silu", "gelu"}) {
    if (a == n) return true;
  }
  return false;
}

double activate(const std::string& a, double x) {
  if (a == "identity") return x;
  if (a == "relu") return x > 0.0 ? x : 0.0;
  if (a == "tanh") return std::tanh(x);
  if (a == "sigmoid") return 1.0 / (1.0 + std::exp(-x));
  if (a == "softplus") return x > 20.0 ? x : std::log1p(std::exp(x));
  if (a == "silu") return x / (1.0 + std::exp(-x));
  if (a == "gelu") return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
  throw ConfigError("unknown activation '" + a + "'");
}

long weight_count(const Layer& l) {
  switch (l.type) {
    case Layer::Type::Dense: return static_cast<long>(l.out) * l.in;
    case Layer::Type::Conv2d:
    case Layer::Type::ConvTranspose2d: return static_cast<long>(l.out) * l.in * l.kh * l.kw;
    default: return 0;
  }
}

// Output shape of `l` applied to `s`; throws ConfigError on mismatch.
Shape propagate(const Layer& l, const Shape& s, const std::string& where) {
  auto fail = [&](const std::string& msg) {
    throw ConfigError(where + ": " + type_name(l.type) + " layer: " + msg + " (input shape " + s.str() + ")");
  };
  switch (l.type) {
    case Layer::Type::Dense:
      if (s.spatial) fail("needs a flat input; add a flatten layer");
      if (s.flat != l.in) fail("expects " + std::to_string(l.in) + " inputs");
      return flat_shape(l.out);
    case Layer::Type::Activation:
      return s;
    case Layer::Type::Flatten:
      return flat_shape(s.size());
    case Layer::Type::Reshape: {
      if (l.shape.size() != 3) fail("reshape needs 3 dimensions");
      const int n = l.shape[0] * l.shape[1] * l.shape[2];
      if (n != s.size()) fail("reshape to " + std::to_string(n) + " elements");
      return Shape{l.shape[0], l.shape[1], l.shape[2], true, 0};
    }
    case Layer::Type::Conv2d: {
      if (!s.spatial) fail("needs a (C,H,W) input; add a reshape layer");
      if (s.c != l.in) fail("expects " + std::to_string(l.in) + " channels");
      const int ho = (s.h + 2 * l.padding - l.kh) / l.stride + 1;
      const int wo = (s.w + 2 * l.padding - l.kw) / l.stride + 1;
      if (ho <= 0 || wo <= 0) fail("kernel larger than padded input");
      return Shape{l.out, ho, wo, true, 0};
    }
    case Layer::Type::ConvTranspose2d: {
      if (!s.spatial) fail("needs a (C,H,W) input; add a reshape layer");
      if (s.c != l.in) fail("expects " + std::to_string(l.in) + " channels");
      const int ho = (s.h - 1) * l.stride - 2 * l.padding + l.kh + l.output_padding;
      const int wo = (s.w - 1) * l.stride - 2 * l.padding + l.kw + l.output_padding;
      if (ho <= 0 || wo <= 0) fail("empty output");
      return Shape{l.out, ho, wo, true, 0};
    }
  }
  return s;
}

Shape chain_shapes(const std::vector<Layer>& layers, Shape s, const std::string& section) {
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const Layer& l = layers[k];
    const std::string where = section + "[" + std::to_string(k) + "]";
    if (l.stride < 1) throw ConfigError(where + ": stride must be >= 1");
    if (l.padding < 0 || l.output_padding < 0) throw ConfigError(where + ": negative padding");
    if (l.type == Layer::Type::Activation && !known_activation(l.activation)) {
      throw ConfigError(where + ": unknown activation '" + l.activation + "'");
    }
    const long wc = weight_count(l);
    if (wc > 0 && static_cast<long>(l.weight.size()) != wc) {
      throw ConfigError(where + ": weight has " + std::to_string(l.weight.size()) + " elements, expected " +
                        std::to_string(wc));
    }
    if (l.has_bias && l.bias.size() != l.out) throw ConfigError(where + ": bias size mismatch");
    s = propagate(l, s, where);
  }
  return s;
}

Vector conv2d(const Layer& l, const Vector& x, const Shape& s, const Shape& o) {
  Vector y(o.size());
  const double* w = l.weight.data();
  for (int oc = 0; oc < o.c; ++oc) {
    for (int oy = 0; oy < o.h; ++oy) {
      for (int ox = 0; ox < o.w; ++ox) {
        double acc = l.has_bias ? l.bias[oc] : 0.0;
        for (int ic = 0; ic < s.c; ++ic) {
          for (int ky = 0; ky < l.kh; ++ky) {
            const int iy = oy * l.stride - l.padding + ky;
            if (iy < 0 || iy >= s.h) continue;
            for (int kx = 0; kx < l.kw; ++kx) {
              const int ix = ox * l.stride - l.padding + kx;
              if (ix < 0 || ix >= s.w) continue;
              acc += w[((oc * s.c + ic) * l.kh + ky) * l.kw + kx] * x[(ic * s.h + iy) * s.w + ix];
            }
          }
        }
        y[(oc * o.h + oy) * o.w + ox] = acc;
      }
    }
  }
  return y;
}

Vector conv_transpose2d(const Layer& l, const Vector& x, const Shape& s, const Shape& o) {
  Vector y(o.size());
  for (int oc = 0; oc < o.c; ++oc) {
    y.segment(static_cast<Eigen::Index>(oc) * o.h * o.w, o.h * o.w).setConstant(l.has_bias ? l.bias[oc] : 0.0);
  }
  const double* w = l.weight.data();
  for (int ic = 0; ic < s.c; ++ic) {
    for (int iy = 0; iy < s.h; ++iy) {
      for (int ix = 0; ix < s.w; ++ix) {
        const double v = x[(ic * s.h + iy) * s.w + ix];
        for (int oc = 0; oc < o.c; ++oc) {
          for (int ky = 0; ky < l.kh; ++ky) {
            const int oy = iy * l.stride - l.padding + ky;
            if (oy < 0 || oy >= o.h) continue;
            for (int kx = 0; kx < l.kw; ++kx) {
              const int ox = ix * l.stride - l.padding + kx;
              if (ox < 0 || ox >= o.w) continue;
              y[(oc * o.h + oy) * o.w + ox] += w[((ic * o.c + oc) * l.kh + ky) * l.kw + kx] * v;
            }
          }
        }
      }
    }
  }
  return y;
}

Vector run(const std::vector<Layer>& layers, Vector x) {
  Shape s = flat_shape(static_cast<int>(x.size()));
  for (const Layer& l : layers) {
    const Shape o = propagate(l, s, "layer");
    switch (l.type) {
      case Layer::Type::Dense: {
        Vector y = l.weight * x;
        if (l.has_bias) y += l.bias;
        x = std::move(y);
        break;
      }
      case Layer::Type::Activation:
        for (auto& v : x) v = activate(l.activation, v);
        break;
      case Layer::Type::Flatten:
      case Layer::Type::Reshape:
        break;
      case Layer::Type::Conv2d:
        x = conv2d(l, x, s, o);
        break;
      case Layer::Type::ConvTranspose2d:
        x = conv_transpose2d(l, x, s, o);
        break;
    }
    s = o;
  }
  return x;
}

std::size_t layer_params(const std::vector<Layer>& layers) {
  std::size_t n = 0;
  for (const Layer& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

// ---- weights file -----------------------------------------------------------

void append_rowmajor(std::vector<std::uint8_t>& out, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) append_f64(out, m(r, c));
  }
}

Matrix read_rowmajor(PayloadReader& in, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = in.f64();
  }
  return m;
}

const std::vector<std::string> kSections = {"preprocess", "branch_a", "branch_b", "head"};

std::vector<Layer>& section_of(ParamOperatorModel& m, const std::string& name) {
  if (name == "preprocess") return m.preprocess;
  if (name == "branch_a") return m.branch_a;
  if (name == "branch_b") return m.branch_b;
  if (name == "head") return m.head;
  throw ConfigError("unknown model section '" + name + "'");
}

const std::vector<Layer>& section_of(const ParamOperatorModel& m, const std::string& name) {
  return section_of(const_cast<ParamOperatorModel&>(m), name);
}

std::string layer_line(const std::string& section, const Layer& l) {
  std::string s = section + " " + type_name(l.type);
  auto add = [&](long v) { s += " " + std::to_string(v); };
  switch (l.type) {
    case Layer::Type::Dense:
      add(l.in), add(l.out);
      break;
    case Layer::Type::Conv2d:
      add(l.in), add(l.out), add(l.kh), add(l.kw), add(l.stride), add(l.padding);
      break;
    case Layer::Type::ConvTranspose2d:
      add(l.in), add(l.out), add(l.kh), add(l.kw), add(l.stride), add(l.padding), add(l.output_padding);
      break;
    case Layer::Type::Activation:
      return s + " " + l.activation;
    case Layer::Type::Reshape:
      for (int d : l.shape) add(d);
      return s;
    case Layer::Type::Flatten:
      return s;
  }
  return s + (l.has_bias ? " bias" : " nobias");
}

int to_int(const std::string& tok, const std::string& where) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(tok, &pos);
    if (pos != tok.size() || v < 0 || v > (1L << 30)) throw std::invalid_argument(tok);
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ConfigError(where + "expected a non-negative integer, got '" + tok + "'");
  }
}

Layer parse_layer(const std::vector<std::string>& tok, const std::string& where) {
  Layer l;
  const std::string& type = tok[1];
  auto need = [&](std::size_t n) {
    if (tok.size() != n) {
      throw ConfigError(where + type + " layer expects " + std::to_string(n - 2) + " fields, got " +
                        std::to_string(tok.size() - 2));
    }
  };
  auto bias_flag = [&](const std::string& t) {
    if (t == "bias") return true;
    if (t == "nobias") return false;
    throw ConfigError(where + "expected 'bias' or 'nobias', got '" + t + "'");
  };
  if (type == "dense") {
    need(5);
    l.type = Layer::Type::Dense;
    l.in = to_int(tok[2], where), l.out = to_int(tok[3], where);
    l.has_bias = bias_flag(tok[4]);
  } else if (type == "conv2d") {
    need(9);
    l.type = Layer::Type::Conv2d;
    l.in = to_int(tok[2], where), l.out = to_int(tok[3], where);
    l.kh = to_int(tok[4], where), l.kw = to_int(tok[5], where);
    l.stride = to_int(tok[6], where), l.padding = to_int(tok[7], where);
    l.has_bias = bias_flag(tok[8]);
  } else if (type == "conv_transpose2d") {
    need(10);
    l.type = Layer::Type::ConvTranspose2d;
    l.in = to_int(tok[2], where), l.out = to_int(tok[3], where);
    l.kh = to_int(tok[4], where), l.kw = to_int(tok[5], where);
    l.stride = to_int(tok[6], where), l.padding = to_int(tok[7], where);
    l.output_padding = to_int(tok[8], where);
    l.has_bias = bias_flag(tok[9]);
  } else if (type == "activation") {
    need(3);
    l.type = Layer::Type::Activation;
    l.activation = tok[2];
    if (!known_activation(l.activation)) throw ConfigError(where + "unknown activation '" + l.activation + "'");
  } else if (type == "reshape") {
    need(5);
    l.type = Layer::Type::Reshape;
    l.shape = {to_int(tok[2], where), to_int(tok[3], where), to_int(tok[4], where)};
  } else if (type == "flatten") {
    need(2);
    l.type = Layer::Type::Flatten;
  } else {
    throw ConfigError(where + "unknown layer type '" + type + "'");
  }
  return l;
}

}  // namespace

// ---- linear model -----------------------------------------------------------

LinearOperatorModel LinearOperatorModel::identity(int M) {
  LinearOperatorModel m;
  m.M = M;
  m.W = Matrix::Identity(M, M);
  return m;
}

Vector LinearOperatorModel::apply(const Vector& g) const {
  if (layout == Layout::Direct) return W * g;
  return C * (B * (A * g));
}

Matrix LinearOperatorModel::apply_rows(const Matrix& G) const {
  if (layout == Layout::Direct) return G * W.transpose();
  return ((G * A.transpose()) * B.transpose()) * C.transpose();
}

std::size_t LinearOperatorModel::parameter_count() const {
  if (layout == Layout::Direct) return static_cast<std::size_t>(W.size());
  return static_cast<std::size_t>(A.size() + B.size() + C.size());
}

// ---- parameterized model ----------------------------------------------------

void ParamOperatorModel::validate() const {
  if (M <= 0) throw ConfigError("param model: M must be positive");
  if (P <= 0) throw ConfigError("param model: P must be positive");
  for (const auto* sec : {&branch_b, &head}) {
    const std::string name = sec == &head ? "head" : "branch_b";
    if (sec->empty()) throw ConfigError("param model: section " + name + " is empty");
    for (const Layer& l : *sec) {
      if (l.type != Layer::Type::Dense || l.has_bias) {
        throw ConfigError("param model: section " + name + " may only hold bias-free dense layers");
      }
    }
  }
  const Shape pre = chain_shapes(preprocess, flat_shape(P), "preprocess");
  const Shape a = chain_shapes(branch_a, flat_shape(pre.size()), "branch_a");
  const Shape b = chain_shapes(branch_b, flat_shape(M), "branch_b");
  if (a.size() != b.size()) {
    throw ConfigError("param model: branch_a yields " + std::to_string(a.size()) + " features but branch_b yields " +
                      std::to_string(b.size()));
  }
  const Shape h = chain_shapes(head, flat_shape(b.size()), "head");
  if (h.size() != M) throw ConfigError("param model: head yields " + std::to_string(h.size()) + " values, expected M");
}

Vector ParamOperatorModel::apply(const Vector& p, const Vector& g) const {
  const Vector i1 = run(branch_a, run(preprocess, p));
  const Vector i2 = run(branch_b, g);
  return run(head, i1.cwiseProduct(i2));
}

std::size_t ParamOperatorModel::parameter_count() const {
  return layer_params(preprocess) + layer_params(branch_a) + layer_params(branch_b) + layer_params(head);
}

std::string OperatorModel::kind() const {
  if (!linear_ && !param_) return "none";
  if (param_) return "param";
  return linear_->layout == LinearOperatorModel::Layout::Direct ? "linear-direct" : "linear-bottleneck";
}

std::vector<double> OperatorModel::infer(const std::vector<double>& p, const std::vector<double>& g) const {
  if (!linear_ && !param_) throw ConfigError("infer: no model loaded");
  if (static_cast<int>(g.size()) != M()) {
    throw ConfigError("infer: input has " + std::to_string(g.size()) + " values, model expects M = " +
                      std::to_string(M()));
  }
  if (static_cast<int>(p.size()) != P()) {
    throw ConfigError("infer: got " + std::to_string(p.size()) + " parameters, model expects P = " +
                      std::to_string(P()));
  }
  const Vector gv = Eigen::Map<const Vector>(g.data(), static_cast<Eigen::Index>(g.size()));
  Vector out;
  if (linear_) {
    out = linear_->apply(gv);
  } else {
    out = param_->apply(Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size())), gv);
  }
  return {out.begin(), out.end()};
}

// ---- KFBIW1 -----------------------------------------------------------------

void save_weights(const OperatorModel& model, const std::filesystem::path& path) {
  Container c;
  c.magic = kWeightsMagic;
  c.header.set("kind", model.kind());
  c.header.set("M", std::to_string(model.M()));
  c.header.set("byte_order", "little");
  c.header.set("element", "float64");
  if (model.is_linear()) {
    const auto& m = model.linear();
    if (m.layout == LinearOperatorModel::Layout::Bottleneck) c.header.set("d", std::to_string(m.d));
    c.header.set("parameters", std::to_string(m.parameter_count()));
    if (m.layout == LinearOperatorModel::Layout::Direct) {
      append_rowmajor(c.payload, m.W);
    } else {
      append_rowmajor(c.payload, m.A);
      append_rowmajor(c.payload, m.B);
      append_rowmajor(c.payload, m.C);
    }
  } else {
    const auto& m = model.param();
    m.validate();
    c.header.set("P", std::to_string(m.P));
    c.header.set("parameters", std::to_string(m.parameter_count()));
    for (const auto& sec : kSections) {
      for (const Layer& l : section_of(m, sec)) {
        c.header.add("layer", layer_line(sec, l));
        if (l.type == Layer::Type::Dense) {
          append_rowmajor(c.payload, l.weight);
        } else {
          append_f64(c.payload, std::span<const double>(l.weight.data(), static_cast<std::size_t>(l.weight.size())));
        }
        append_f64(c.payload, std::span<const double>(l.bias.data(), static_cast<std::size_t>(l.bias.size())));
      }
    }
  }
  for (const auto& e : model.metadata.entries()) c.header.add("meta." + e.key, e.value);
  write_container(path, c);
}

KeyValueDoc read_weights_header(const std::filesystem::path& path) {
  return read_container(path, kWeightsMagic).header;
}

OperatorModel load_weights(const std::filesystem::path& path) {
  const Container c = read_container(path, kWeightsMagic);
  const KeyValueDoc& h = c.header;
  const std::string src = path.string();
  KeyValueDoc meta;
  for (const auto& e : h.entries()) {
    if (e.key.rfind("meta.", 0) == 0) {
      meta.add(e.key.substr(5), e.value);
      continue;
    }
    static const std::vector<std::string> allowed = {"kind", "M", "P", "d", "byte_order", "element", "parameters",
                                                     "layer"};
    if (std::find(allowed.begin(), allowed.end(), e.key) == allowed.end()) {
      throw ConfigError(src + ":" + std::to_string(e.line) + ": unknown key '" + e.key + "'");
    }
  }
  if (h.get("byte_order").value_or("little") != "little") throw ConfigError(src + ": only little-endian supported");
  if (h.get("element").value_or("float64") != "float64") throw ConfigError(src + ": only float64 supported");
  const std::string kind = h.require("kind");
  const long M = h.require_int("M");
  if (M <= 0) throw ConfigError(h.where("M") + "must be positive");
  PayloadReader in(c.payload, src);
  OperatorModel model;
  if (kind == "linear-direct" || kind == "linear-bottleneck") {
    LinearOperatorModel m;
    m.M = static_cast<int>(M);
    if (kind == "linear-direct") {
      m.W = read_rowmajor(in, M, M);
    } else {
      m.layout = LinearOperatorModel::Layout::Bottleneck;
      m.d = static_cast<int>(h.require_int("d"));
      if (m.d <= 0 || M % m.d != 0) throw ConfigError(h.where("d") + "must divide M");
      const long k = M / m.d;
      m.A = read_rowmajor(in, k, M);
      m.B = read_rowmajor(in, k, k);
      m.C = read_rowmajor(in, M, k);
    }
    model = OperatorModel(std::move(m));
  } else if (kind == "param") {
    ParamOperatorModel m;
    m.M = static_cast<int>(M);
    m.P = static_cast<int>(h.require_int("P"));
    int line_no = 0;
    for (const auto& e : h.entries()) {
      if (e.key != "layer") continue;
      ++line_no;
      const std::string where = src + ":" + std::to_string(e.line) + ": layer: ";
      const auto tok = split_ws(e.value);
      if (tok.size() < 2) throw ConfigError(where + "expected '<section> <type> ...'");
      auto& sec = section_of(m, tok[0]);
      Layer l = parse_layer(tok, where);
      const long wc = weight_count(l);
      if (l.type == Layer::Type::Dense) {
        l.weight = read_rowmajor(in, l.out, l.in);
      } else if (wc > 0) {
        l.weight.resize(wc, 1);
        in.f64(std::span<double>(l.weight.data(), static_cast<std::size_t>(wc)));
      }
      if (l.has_bias) {
        l.bias.resize(l.out);
        in.f64(std::span<double>(l.bias.data(), static_cast<std::size_t>(l.out)));
      }
      sec.push_back(std::move(l));
    }
    if (line_no == 0) throw ConfigError(src + ": param model has no layers");
    m.validate();
    model = OperatorModel(std::move(m));
  } else {
    throw ConfigError(h.where("kind") + "unknown model kind '" + kind + "'");
  }
  if (in.remaining() != 0) {
    throw ConfigError(src + ": " + std::to_string(in.remaining()) + " trailing payload bytes");
  }
  if (h.has("parameters") && static_cast<std::size_t>(h.require_int("parameters")) !=
                                 (model.is_linear() ? model.linear().parameter_count()
                                                    : model.param().parameter_count())) {
    throw ConfigError(h.where("parameters") + "does not match the declared layers");
  }
  model.metadata = std::move(meta);
  return model;
}

// ---- fitting ----------------------------------------------------------------

Matrix solve_two_sided_ridge(const Matrix& L, const Matrix& R, const Matrix& T, double ridge) {
  Eigen::SelfAdjointEigenSolver<Matrix> el(L.transpose() * L);
  Eigen::SelfAdjointEigenSolver<Matrix> er(R * R.transpose());
  const Matrix& V = el.eigenvectors();
  const Matrix& U = er.eigenvectors();
  Matrix Y = V.transpose() * (L.transpose() * T * R.transpose()) * U;
  const Vector lam = el.eigenvalues().cwiseMax(0.0);
  const Vector sig = er.eigenvalues().cwiseMax(0.0);
  const double top = lam.maxCoeff() * sig.maxCoeff();
  const double cut = 1e-14 * top;
  for (Eigen::Index i = 0; i < Y.rows(); ++i) {
    for (Eigen::Index j = 0; j < Y.cols(); ++j) {
      const double den = lam[i] * sig[j] + ridge;
      Y(i, j) = (den > cut && den > 0.0) ? Y(i, j) / den : 0.0;
    }
  }
  return V * Y * U.transpose();
}

namespace {

double ridge_loss(const LinearOperatorModel& m, const Matrix& G, const Matrix& T, double ridge) {
  double loss = (m.apply_rows(G) - T).squaredNorm();
  if (ridge > 0.0) {
    loss += ridge * (m.layout == LinearOperatorModel::Layout::Direct
                         ? m.W.squaredNorm()
                         : m.A.squaredNorm() + m.B.squaredNorm() + m.C.squaredNorm());
  }
  return loss;
}

Matrix fit_direct(const Matrix& G, const Matrix& T, double ridge) {
  // Returns X with G X ~ T, i.e. W = X^T.
  if (ridge > 0.0) {
    const Eigen::Index n = G.rows(), M = G.cols();
    Matrix Ga(n + M, M);
    Ga << G, std::sqrt(ridge) * Matrix::Identity(M, M);
    Matrix Ta(n + M, T.cols());
    Ta << T, Matrix::Zero(M, T.cols());
    return Ga.colPivHouseholderQr().solve(Ta);
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(G);
  cod.setThreshold(1e-12);
  return cod.solve(T);
}

}  // namespace

LinearOperatorModel fit_linear(const Matrix& inputs, const Matrix& targets, const FitOptions& opt,
                               FitReport* report) {
  const Eigen::Index n = inputs.rows();
  const Eigen::Index M = inputs.cols();
  if (n == 0 || M == 0) throw ConfigError("fit: empty training set");
  if (targets.rows() != n || targets.cols() != M) throw ConfigError("fit: inputs and targets differ in shape");
  if (opt.ridge < 0.0) throw ConfigError("fit: ridge must be >= 0");
  if (!inputs.allFinite() || !targets.allFinite()) throw NumericalError("fit: non-finite training data");

  FitReport rep;
  {
    Eigen::BDCSVD<Matrix> svd(inputs);
    const auto& s = svd.singularValues();
    rep.rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (s[i] > 1e-8 * s[0]) ++rep.rank;
    }
  }

  LinearOperatorModel m;
  m.M = static_cast<int>(M);
  const Matrix X = fit_direct(inputs, targets, opt.ridge);
  if (opt.layout == LinearOperatorModel::Layout::Direct) {
    m.W = X.transpose();
    rep.loss = ridge_loss(m, inputs, targets, opt.ridge);
  } else {
    if (opt.d <= 0 || M % opt.d != 0) throw ConfigError("fit: d must divide M");
    const Eigen::Index k = M / opt.d;
    m.layout = LinearOperatorModel::Layout::Bottleneck;
    m.d = opt.d;
    // Start from the truncated SVD of the direct solution, then alternate
    // exact ridge solves for C, B, A. Each step minimizes the loss over one
    // factor, so the loss cannot increase.
    Eigen::JacobiSVD<Matrix> svd(X.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector s = svd.singularValues().head(k);
    const Vector rs = s.cwiseSqrt();
    m.C = svd.matrixU().leftCols(k) * rs.asDiagonal();
    m.B = Matrix::Identity(k, k);
    m.A = rs.asDiagonal() * svd.matrixV().leftCols(k).transpose();
    double prev = ridge_loss(m, inputs, targets, opt.ridge);
    rep.sweep_loss.push_back(prev);
    const Matrix IM = Matrix::Identity(M, M);
    // Losses below this are rounding noise in the residual.
    const double floor = 1e-12 * targets.squaredNorm();
    for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
      const Matrix H = inputs * m.A.transpose() * m.B.transpose();
      m.C = solve_two_sided_ridge(H, IM, targets, opt.ridge).transpose();
      const Matrix Pm = inputs * m.A.transpose();
      m.B = solve_two_sided_ridge(Pm, m.C.transpose(), targets, opt.ridge).transpose();
      m.A = solve_two_sided_ridge(inputs, m.B.transpose() * m.C.transpose(), targets, opt.ridge).transpose();
      const double cur = ridge_loss(m, inputs, targets, opt.ridge);
      rep.sweep_loss.push_back(cur);
      if (cur > prev * (1.0 + 1e-8) + floor) {
        throw InternalFault("fit: alternating least squares increased the loss (" + num(prev) + " -> " + num(cur) +
                            ")");
      }
      const bool done = prev - cur <= opt.sweep_tol * std::max(prev, 1e-300) || cur <= floor;
      prev = cur;
      if (done) break;
    }
    rep.loss = prev;
  }
  if (report) *report = std::move(rep);
  return m;
}

// ---- golden vectors ---------------------------------------------------------

void write_golden(const std::filesystem::path& path, const GoldenSet& golden) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  KeyValueDoc doc;
  doc.set("M", std::to_string(golden.M));
  doc.set("P", std::to_string(golden.P));
  doc.set("count", std::to_string(golden.pairs.size()));
  for (const auto& p : golden.pairs) {
    if (golden.P > 0) doc.add("params", join(p.params));
    doc.add("input", join(p.input));
    doc.add("output", join(p.output));
  }
  out << kGoldenMagic << '\n' << doc.to_string();
}

GoldenSet read_golden(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("cannot open '" + path.string() + "'");
  std::string first;
  std::getline(in, first);
  if (trim(first) != kGoldenMagic) throw ConfigError(path.string() + ": bad magic (expected KFBIG1)");
  std::stringstream rest;
  rest << in.rdbuf();
  const KeyValueDoc doc = KeyValueDoc::parse(rest.str(), path.string());
  doc.reject_unknown({"M", "P", "count", "params", "input", "output"});
  GoldenSet g;
  g.M = static_cast<int>(doc.require_int("M"));
  g.P = static_cast<int>(doc.get_int("P", 0));
  const long count = doc.require_int("count");
  std::vector<std::vector<double>> params, inputs, outputs;
  for (const auto& e : doc.entries()) {
    auto* dst = e.key == "params" ? &params : e.key == "input" ? &inputs : e.key == "output" ? &outputs : nullptr;
    if (!dst) continue;
    try {
      dst->push_back(parse_numbers(e.value));
    } catch (const ConfigError& err) {
      throw ConfigError(path.string() + ":" + std::to_string(e.line) + ": " + err.what());
    }
  }
  if (static_cast<long>(inputs.size()) != count || static_cast<long>(outputs.size()) != count ||
      (g.P > 0 && static_cast<long>(params.size()) != count)) {
    throw ConfigError(path.string() + ": expected " + std::to_string(count) + " golden pairs");
  }
  for (long i = 0; i < count; ++i) {
    GoldenSet::Pair p;
    if (g.P > 0) p.params = params[static_cast<std::size_t>(i)];
    p.input = inputs[static_cast<std::size_t>(i)];
    p.output = outputs[static_cast<std::size_t>(i)];
    if (static_cast<int>(p.input.size()) != g.M || static_cast<int>(p.output.size()) != g.M ||
        static_cast<int>(p.params.size()) != g.P) {
      throw ConfigError(path.string() + ": golden pair " + std::to_string(i) + " has the wrong length");
    }
    g.pairs.push_back(std::move(p));
  }
  return g;
}

double verify_golden(const OperatorModel& model, const GoldenSet& golden) {
  if (golden.M != model.M() || golden.P != model.P()) {
    throw ConfigError("golden set shape (M=" + std::to_string(golden.M) + ", P=" + std::to_string(golden.P) +
                      ") does not match the model (M=" + std::to_string(model.M()) +
                      ", P=" + std::to_string(model.P()) + ")");
  }
  double worst = 0.0;
  for (const auto& p : golden.pairs) {
    const auto out = model.infer(p.params, p.input);
    for (std::size_t i = 0; i < out.size(); ++i) worst = std::max(worst, std::abs(out[i] - p.output[i]));
  }
  return worst;
}

}  // namespace kfbi
