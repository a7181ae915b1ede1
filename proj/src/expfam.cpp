#include "nsvi/expfam.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace nsvi {

namespace {

constexpr double kAsymptoticThreshold = 10.0;
constexpr double kMinDenominator = 1e-14;

void require_positive(double x, const char* name) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    std::ostringstream msg;
    msg << name << " requires a positive finite argument, got " << x;
    throw DomainError(msg.str());
  }
}

}  // namespace

double digamma(double x) {
  require_positive(x, "digamma");
  double shift = 0.0;
  while (x < kAsymptoticThreshold) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli-number tail: -1/12 x^-2 + 1/120 x^-4 - 1/252 x^-6 + ...
  const double tail =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 -
                              inv2 * (1.0 / 240 - inv2 * (1.0 / 132)))));
  return shift + std::log(x) - 0.5 * inv - tail;
}

double trigamma(double x) {
  require_positive(x, "trigamma");
  double shift = 0.0;
  while (x < kAsymptoticThreshold) {
    shift += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv + 0.5 * inv2 +
      inv * inv2 *
          (1.0 / 6 -
           inv2 * (1.0 / 30 -
                   inv2 * (1.0 / 42 - inv2 * (1.0 / 30 - inv2 * (5.0 / 66)))));
  return shift + series;
}

ParamRow::ParamRow(RowVector values) : values_(std::move(values)) {
  check_feasible(values_);
}

void check_feasible(const RowRef& row) {
  if (row.size() < 2) {
    throw DomainError("Dirichlet parameter row needs length >= 2, got " +
                      std::to_string(row.size()));
  }
  for (Eigen::Index w = 0; w < row.size(); ++w) {
    if (!(row[w] > 0.0) || !std::isfinite(row[w])) {
      std::ostringstream msg;
      msg << "Dirichlet parameter row entry " << w << " is not positive ("
          << row[w] << ")";
      throw DomainError(msg.str());
    }
  }
}

RowVector dirichlet_expectation(const RowRef& row) {
  check_feasible(row);
  const double psi_total = digamma(row.sum());
  RowVector out(row.size());
  for (Eigen::Index w = 0; w < row.size(); ++w) {
    out[w] = digamma(row[w]) - psi_total;
  }
  return out;
}

RowVector dirichlet_expectation(const ParamRow& row) {
  return dirichlet_expectation(row.values());
}

double log_normalizer(const RowRef& row) {
  check_feasible(row);
  double acc = 0.0;
  for (Eigen::Index w = 0; w < row.size(); ++w) acc += std::lgamma(row[w]);
  return acc - std::lgamma(row.sum());
}

double log_normalizer(const ParamRow& row) { return log_normalizer(row.values()); }

RowVector hessian_inverse_apply(const RowRef& row, const RowRef& v) {
  check_feasible(row);
  if (v.size() != row.size()) {
    throw DataError("hessian_inverse_apply: vector length " +
                    std::to_string(v.size()) + " does not match row length " +
                    std::to_string(row.size()));
  }
  const Eigen::Index n = row.size();
  const double coupling = trigamma(row.sum());
  RowVector diag(n);
  for (Eigen::Index w = 0; w < n; ++w) diag[w] = trigamma(row[w]);

  RowVector u = v.array() / diag.array();
  const double inv_diag_sum = diag.cwiseInverse().sum();
  const double denom = 1.0 - coupling * inv_diag_sum;
  if (std::abs(denom) < kMinDenominator) {
    std::ostringstream msg;
    msg << "log-normalizer Hessian is near singular (denominator " << denom
        << ")";
    throw ConditioningError(msg.str());
  }
  const double s = coupling * u.sum() / denom;
  return u.array() + s / diag.array();
}

RowVector hessian_inverse_apply(const ParamRow& row, const RowRef& v) {
  return hessian_inverse_apply(RowRef(row.values()), v);
}

RowVector hessian_inverse_apply(const RowVector& row, const RowVector& v) {
  return hessian_inverse_apply(RowRef(row), RowRef(v));
}

TopicMatrix hessian_inverse_apply(const TopicMatrix& lambda,
                                  const TopicMatrix& v) {
  if (lambda.rows() != v.rows() || lambda.cols() != v.cols()) {
    throw DataError("hessian_inverse_apply: shape mismatch");
  }
  TopicMatrix out(lambda.rows(), lambda.cols());
  for (Eigen::Index k = 0; k < lambda.rows(); ++k) {
    out.row(k) = hessian_inverse_apply(RowRef(lambda.row(k)), RowRef(v.row(k)));
  }
  return out;
}

RowVector diagonal_hessian_inverse_apply(const RowRef& row, const RowRef& v) {
  check_feasible(row);
  if (v.size() != row.size()) {
    throw DataError("diagonal_hessian_inverse_apply: vector length " +
                    std::to_string(v.size()) + " does not match row length " +
                    std::to_string(row.size()));
  }
  RowVector out(row.size());
  for (Eigen::Index w = 0; w < row.size(); ++w) out[w] = v[w] / trigamma(row[w]);
  return out;
}

std::string to_string(Curvature curvature) {
  return curvature == Curvature::kExact ? "exact" : "diagonal";
}

Curvature parse_curvature(const std::string& name) {
  if (name == "exact") return Curvature::kExact;
  if (name == "diagonal") return Curvature::kDiagonal;
  throw UsageError("unknown curvature '" + name + "' (expected exact or diagonal)");
}

Eigen::MatrixXd dense_hessian(const RowRef& row) {
  check_feasible(row);
  const Eigen::Index n = row.size();
  Eigen::MatrixXd h =
      Eigen::MatrixXd::Constant(n, n, -trigamma(row.sum()));
  for (Eigen::Index w = 0; w < n; ++w) h(w, w) += trigamma(row[w]);
  return h;
}

TopicMatrix natural_gradient_g(const TopicMatrix& lambda,
                               const TopicMatrix& lambda_hat) {
  if (lambda.rows() != lambda_hat.rows() ||
      lambda.cols() != lambda_hat.cols()) {
    throw DataError("natural_gradient_g: shape mismatch");
  }
  return lambda - lambda_hat;
}

}  // namespace nsvi
