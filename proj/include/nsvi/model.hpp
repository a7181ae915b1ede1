#pragma once

#include <vector>

#include "nsvi/corpus.hpp"
#include "nsvi/expfam.hpp"

namespace nsvi {

// Per-document local variational parameters.
struct LocalVariational {
  RowVector gamma;  // topic proportions posterior, entries > 0
  // One row per unique term of the document, each a distribution over topics.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> phi;
};

// Interface the consensus engine drives. A model supplies the local
// expectation step, the intermediate global parameter computed from it, and
// the log-normalizer geometry of its global Dirichlet parameters.
class ModelContract {
 public:
  virtual ~ModelContract() = default;

  virtual std::vector<LocalVariational> local_expectations(
      const Batch& batch, const TopicMatrix& lambda) const = 0;

  virtual TopicMatrix intermediate_global(
      const Batch& batch, const std::vector<LocalVariational>& locals,
      std::size_t batch_size) const = 0;

  virtual double log_normalizer(const RowRef& row) const {
    return nsvi::log_normalizer(row);
  }

  virtual RowVector hessian_inverse_apply(const RowRef& row,
                                          const RowRef& v) const {
    return nsvi::hessian_inverse_apply(row, v);
  }

  // Row-wise inverse-Hessian over a full parameter matrix.
  TopicMatrix hessian_inverse_apply(const TopicMatrix& lambda,
                                    const TopicMatrix& v) const;

  // lambda_hat for `batch` evaluated at `lambda`.
  TopicMatrix lambda_hat(const Batch& batch, const TopicMatrix& lambda,
                         std::size_t batch_size) const {
    return intermediate_global(batch, local_expectations(batch, lambda),
                               batch_size);
  }
};

}  // namespace nsvi
