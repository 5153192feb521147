#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kfbi/keyvalue.hpp"

namespace kfbi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Linear map g~ -> phi. Direct: phi = W g. Bottleneck (divisor d, k = M / d):
/// phi = C B A g with A: k x M, B: k x k, C: M x k. No biases.
struct LinearOperatorModel {
  enum class Layout { Direct, Bottleneck };
  Layout layout = Layout::Direct;
  int M = 0;
  int d = 1;
  Matrix W;        // direct
  Matrix A, B, C;  // bottleneck

  static LinearOperatorModel identity(int M);
  Vector apply(const Vector& g) const;
  Matrix apply_rows(const Matrix& G) const;  // each row an input
  std::size_t parameter_count() const;
};

/// One layer of the parameter path or the output head. Weight layouts follow
/// the usual deep-learning conventions:
///   dense            weight (out, in), bias (out)
///   conv2d           weight (out_c, in_c, kh, kw), bias (out_c)
///   conv_transpose2d weight (in_c, out_c, kh, kw), bias (out_c)
/// Activations: identity, relu, tanh, sigmoid, softplus, silu, gelu.
struct Layer {
  enum class Type { Dense, Conv2d, ConvTranspose2d, Activation, Reshape, Flatten };
  Type type = Type::Dense;
  int in = 0, out = 0;                  // dense; conv channels
  int kh = 0, kw = 0, stride = 1, padding = 0, output_padding = 0;
  bool has_bias = false;
  std::string activation;
  std::vector<int> shape;               // reshape target (C, H, W)
  Matrix weight;                        // dense: out x in; conv: flattened in declared order
  Vector bias;
};

/// Parameterized model:
///   pre = preprocess(p);  I1 = branch_a(pre);  I2 = branch_b(g~);  phi = head(I1 .* I2)
/// branch_b and head hold bias-free dense layers only, so phi is linear in g~
/// for fixed p.
struct ParamOperatorModel {
  int M = 0;
  int P = 0;
  std::vector<Layer> preprocess;
  std::vector<Layer> branch_a;
  std::vector<Layer> branch_b;
  std::vector<Layer> head;

  Vector apply(const Vector& p, const Vector& g) const;
  std::size_t parameter_count() const;
  /// Throws ConfigError if shapes do not chain or linearity would be broken.
  void validate() const;
};

/// Either model kind behind one interface.
class OperatorModel {
 public:
  OperatorModel() = default;
  explicit OperatorModel(LinearOperatorModel m) : linear_(std::move(m)) {}
  explicit OperatorModel(ParamOperatorModel m) : param_(std::move(m)) {}

  bool is_linear() const { return linear_.has_value(); }
  int M() const { return linear_ ? linear_->M : param_->M; }
  int P() const { return linear_ ? 0 : param_->P; }
  const LinearOperatorModel& linear() const { return *linear_; }
  const ParamOperatorModel& param() const { return *param_; }
  std::string kind() const;

  /// Shape-checked inference; `p` must be empty for linear models.
  std::vector<double> infer(const std::vector<double>& p, const std::vector<double>& g) const;

  /// Extra header entries (e.g. trainer configuration) kept verbatim.
  KeyValueDoc metadata;

 private:
  std::optional<LinearOperatorModel> linear_;
  std::optional<ParamOperatorModel> param_;
};

/// KFBIW1 weights file (see docs/formats.md).
void save_weights(const OperatorModel& model, const std::filesystem::path& path);
OperatorModel load_weights(const std::filesystem::path& path);
KeyValueDoc read_weights_header(const std::filesystem::path& path);

struct FitOptions {
  LinearOperatorModel::Layout layout = LinearOperatorModel::Layout::Direct;
  int d = 4;
  double ridge = 0.0;
  int max_sweeps = 200;
  double sweep_tol = 1e-12;
};

struct FitReport {
  double loss = 0.0;               // sum of squared residuals + ridge term
  std::vector<double> sweep_loss;  // bottleneck only
  int rank = 0;                    // numerical rank of the input matrix
};

/// Least-squares fit of the quadratic training loss
///   sum_i |N(g_i) - phi_i|^2 + ridge |Theta|^2.
/// Inputs and targets hold one pair per row.
LinearOperatorModel fit_linear(const Matrix& inputs, const Matrix& targets, const FitOptions& opt,
                               FitReport* report = nullptr);

/// min_X |L X R - T|_F^2 + ridge |X|_F^2 (exact, by two eigendecompositions).
Matrix solve_two_sided_ridge(const Matrix& L, const Matrix& R, const Matrix& T, double ridge);

/// Golden input/output pairs (KFBIG1 text format).
struct GoldenSet {
  struct Pair {
    std::vector<double> params;
    std::vector<double> input;
    std::vector<double> output;
  };
  int M = 0;
  int P = 0;
  std::vector<Pair> pairs;
};

GoldenSet read_golden(const std::filesystem::path& path);
void write_golden(const std::filesystem::path& path, const GoldenSet& golden);
/// Largest absolute deviation between model outputs and the golden outputs.
double verify_golden(const OperatorModel& model, const GoldenSet& golden);

}  // namespace kfbi
