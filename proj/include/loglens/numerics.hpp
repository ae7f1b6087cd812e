#pragma once

#include <functional>
#include <span>
#include <string>

#include <Eigen/Dense>

namespace loglens {

/// Dense row-major matrix of float64. All model state lives in these.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// "(rows x cols)", used in error messages.
std::string shape_string(const Matrix& m);

/// A learnable array and its accumulated gradient.
struct Param {
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(Eigen::Index rows, Eigen::Index cols)
      : value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}
  explicit Param(Matrix v) : value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// a * b. Throws Errc::shape naming both shapes when a.cols != b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Row-wise softmax with max subtraction. Entries equal to -inf get
/// probability 0; a row that is entirely -inf yields all zeros.
Matrix softmax_rows(const Matrix& m);

/// Given y = softmax_rows(x) and dL/dy, returns dL/dx.
Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy);

Matrix relu(const Matrix& m);

/// Masks dy by x > 0.
Matrix relu_backward(const Matrix& x, const Matrix& dy);

inline constexpr double kLayerNormEps = 1e-5;

/// Intermediates kept by layer_norm_forward for the backward pass.
struct LayerNormCache {
  Matrix normalized;  // (x - mean) / sqrt(var + eps), before the affine step
  Eigen::VectorXd inv_std;
};

/// Per-row normalization to zero mean and unit (biased) variance, then
/// scaled by gamma and shifted by beta. gamma and beta are 1 x cols.
Matrix layer_norm(const Matrix& m, const Matrix& gamma, const Matrix& beta,
                  double eps = kLayerNormEps);

Matrix layer_norm_forward(const Matrix& m, const Matrix& gamma, const Matrix& beta, double eps,
                          LayerNormCache& cache);

/// Accumulates into gamma/beta grads and returns dL/dx.
Matrix layer_norm_backward(const LayerNormCache& cache, const Matrix& dy, Param& gamma,
                           Param& beta);

/// Objective evaluated at the current parameter values. When `with_grad` is
/// set it must also accumulate dL/dparam into every Param::grad.
using Objective = std::function<double(bool with_grad)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  Eigen::Index worst_row = 0;
  Eigen::Index worst_col = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t elements_checked = 0;
};

/// Compares analytic gradients against central finite differences
/// (f(x+eps) - f(x-eps)) / (2 eps) element by element. Relative error is
/// |a - n| / max(|a|, |n|, 1e-8). Throws Errc::numeric on a non-finite
/// objective value and Errc::precondition when eps is outside (0, 1e-2].
GradCheckReport grad_check_detailed(const Objective& f, std::span<Param* const> params,
                                    double eps = 1e-5);

double grad_check(const Objective& f, std::span<Param* const> params, double eps = 1e-5);

bool all_finite(const Matrix& m);

}  // namespace loglens
