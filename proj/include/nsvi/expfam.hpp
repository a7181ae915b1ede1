#pragma once

// Dirichlet exponential-family kernels shared by every model.
//
// A topic matrix stores one Dirichlet natural-parameter row per topic,
// row-major, topics x vocabulary. The log-normalizer of a row is
//   a(l) = sum_w lgamma(l_w) - lgamma(sum_w l_w)
// with gradient E[log theta] and Hessian diag(psi'(l)) - psi'(sum l) 11^T.

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nsvi/error.hpp"

namespace nsvi {

using TopicMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;
using RowRef = Eigen::Ref<const RowVector>;

double digamma(double x);
double trigamma(double x);

// One feasible Dirichlet natural-parameter vector: length >= 2, all entries
// strictly positive. Construction validates; the free functions below also
// accept unvalidated row views and check them on entry.
class ParamRow {
 public:
  explicit ParamRow(RowVector values);

  const RowVector& values() const { return values_; }
  Eigen::Index size() const { return values_.size(); }

 private:
  RowVector values_;
};

// Throws DomainError unless `row` satisfies the ParamRow invariants.
void check_feasible(const RowRef& row);

// psi(row_w) - psi(sum row).
RowVector dirichlet_expectation(const RowRef& row);
RowVector dirichlet_expectation(const ParamRow& row);

double log_normalizer(const RowRef& row);
double log_normalizer(const ParamRow& row);

// Solves H x = v for the log-normalizer Hessian H in O(V) with the
// Sherman-Morrison identity for a diagonal minus rank-one matrix.
RowVector hessian_inverse_apply(const RowRef& row, const RowRef& v);
RowVector hessian_inverse_apply(const ParamRow& row, const RowRef& v);
RowVector hessian_inverse_apply(const RowVector& row, const RowVector& v);

// Row-wise application over a whole topic matrix.
TopicMatrix hessian_inverse_apply(const TopicMatrix& lambda,
                                  const TopicMatrix& v);

// Applies only the diagonal part of the Hessian inverse, v / psi'(row),
// dropping the rank-one coupling through psi'(sum row).
RowVector diagonal_hessian_inverse_apply(const RowRef& row, const RowRef& v);

// How a consumer of the log-normalizer curvature inverts the Hessian.
enum class Curvature { kExact, kDiagonal };

std::string to_string(Curvature curvature);
Curvature parse_curvature(const std::string& name);

// Dense Hessian, used by tests and diagnostics only.
Eigen::MatrixXd dense_hessian(const RowRef& row);

// Natural gradient of the per-learner SVI objective: lambda - lambda_hat.
TopicMatrix natural_gradient_g(const TopicMatrix& lambda,
                               const TopicMatrix& lambda_hat);

}  // namespace nsvi
