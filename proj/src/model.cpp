#include "nsvi/model.hpp"

namespace nsvi {

TopicMatrix ModelContract::hessian_inverse_apply(const TopicMatrix& lambda,
                                                 const TopicMatrix& v) const {
  if (lambda.rows() != v.rows() || lambda.cols() != v.cols()) {
    throw DataError("hessian_inverse_apply: shape mismatch");
  }
  TopicMatrix out(lambda.rows(), lambda.cols());
  for (Eigen::Index k = 0; k < lambda.rows(); ++k) {
    out.row(k) = hessian_inverse_apply(RowRef(lambda.row(k)), RowRef(v.row(k)));
  }
  return out;
}

}  // namespace nsvi
