#include "loglens/numerics.hpp"

#include <cmath>
#include <limits>

#include "loglens/error.hpp"

namespace loglens {

std::string shape_string(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + " x " + std::to_string(m.cols()) + ")";
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw Error(Errc::shape,
                "matmul: cannot multiply " + shape_string(a) + " by " + shape_string(b));
  }
  Matrix out(a.rows(), b.cols());
  out.noalias() = a * b;
  return out;
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    if (mx == -std::numeric_limits<double>::infinity()) {
      out.row(r).setZero();
      continue;
    }
    double sum = 0.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double e = std::exp(m(r, c) - mx);
      out(r, c) = e;
      sum += e;
    }
    out.row(r) /= sum;
  }
  return out;
}

Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy) {
  Matrix dx = y.cwiseProduct(dy);
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const double dot = dx.row(r).sum();
    dx.row(r) -= dot * y.row(r);
  }
  return dx;
}

Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& x, const Matrix& dy) {
  return (x.array() > 0.0).select(dy, 0.0);
}

namespace {

void check_affine_shape(const Matrix& m, const Matrix& gamma, const Matrix& beta) {
  if (gamma.rows() != 1 || gamma.cols() != m.cols() || beta.rows() != 1 ||
      beta.cols() != m.cols()) {
    throw Error(Errc::shape, "layer_norm: input " + shape_string(m) + " with gamma " +
                                 shape_string(gamma) + " and beta " + shape_string(beta));
  }
}

}  // namespace

Matrix layer_norm_forward(const Matrix& m, const Matrix& gamma, const Matrix& beta, double eps,
                          LayerNormCache& cache) {
  check_affine_shape(m, gamma, beta);
  const double n = static_cast<double>(m.cols());
  cache.normalized.resize(m.rows(), m.cols());
  cache.inv_std.resize(m.rows());
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mean = m.row(r).sum() / n;
    const auto centered = m.row(r).array() - mean;
    const double var = centered.square().sum() / n;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    cache.inv_std(r) = inv_std;
    cache.normalized.row(r) = centered * inv_std;
    out.row(r) = cache.normalized.row(r).cwiseProduct(gamma) + beta;
  }
  return out;
}

Matrix layer_norm(const Matrix& m, const Matrix& gamma, const Matrix& beta, double eps) {
  LayerNormCache cache;
  return layer_norm_forward(m, gamma, beta, eps, cache);
}

Matrix layer_norm_backward(const LayerNormCache& cache, const Matrix& dy, Param& gamma,
                           Param& beta) {
  const Matrix& xhat = cache.normalized;
  gamma.grad += dy.cwiseProduct(xhat).colwise().sum();
  beta.grad += dy.colwise().sum();

  const double n = static_cast<double>(xhat.cols());
  Matrix dxhat = dy.array().rowwise() * gamma.value.row(0).array();
  Matrix dx(xhat.rows(), xhat.cols());
  for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
    const double sum_d = dxhat.row(r).sum();
    const double sum_dx = dxhat.row(r).dot(xhat.row(r));
    dx.row(r) = (cache.inv_std(r) / n) *
                (n * dxhat.row(r).array() - sum_d - xhat.row(r).array() * sum_dx);
  }
  return dx;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

GradCheckReport grad_check_detailed(const Objective& f, std::span<Param* const> params,
                                    double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) {
    throw Error(Errc::precondition, "grad_check: eps must lie in (0, 1e-2]");
  }
  for (Param* p : params) p->zero_grad();
  const double base = f(true);
  if (!std::isfinite(base)) throw Error(Errc::numeric, "grad_check: objective is not finite");

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param& p = *params[pi];
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
        const double original = p.value(r, c);
        p.value(r, c) = original + eps;
        const double up = f(false);
        p.value(r, c) = original - eps;
        const double down = f(false);
        p.value(r, c) = original;
        if (!std::isfinite(up) || !std::isfinite(down)) {
          throw Error(Errc::numeric, "grad_check: objective is not finite at a perturbed point");
        }
        const double numeric = (up - down) / (2.0 * eps);
        const double analytic = p.grad(r, c);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        const double rel = std::abs(analytic - numeric) / denom;
        ++report.elements_checked;
        if (rel > report.max_rel_error) {
          report.max_rel_error = rel;
          report.worst_param = pi;
          report.worst_row = r;
          report.worst_col = c;
          report.worst_analytic = analytic;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  return report;
}

double grad_check(const Objective& f, std::span<Param* const> params, double eps) {
  return grad_check_detailed(f, params, eps).max_rel_error;
}

}  // namespace loglens
