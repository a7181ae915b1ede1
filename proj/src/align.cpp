#include "nsvi/align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nsvi {

double pearson(const RowRef& u, const RowRef& v) {
  if (u.size() != v.size()) throw DataError("pearson: length mismatch");
  if (u.size() < 2) throw DataError("pearson: need at least two entries");
  const RowVector du = u.array() - u.mean();
  const RowVector dv = v.array() - v.mean();
  const double su = du.squaredNorm();
  const double sv = dv.squaredNorm();
  if (su == 0.0 || sv == 0.0) {
    throw NumericError("pearson: correlation undefined for a constant vector");
  }
  const double r = du.dot(dv) / std::sqrt(su * sv);
  return std::clamp(r, -1.0, 1.0);
}

Eigen::MatrixXd correlation_matrix(const TopicMatrix& reference,
                                   const TopicMatrix& candidate) {
  if (reference.rows() != candidate.rows() || reference.cols() != candidate.cols()) {
    throw DataError("topic matrices must have the same shape to be aligned");
  }
  Eigen::MatrixXd corr(reference.rows(), candidate.rows());
  for (Eigen::Index i = 0; i < reference.rows(); ++i) {
    for (Eigen::Index j = 0; j < candidate.rows(); ++j) {
      corr(i, j) = pearson(reference.row(i), candidate.row(j));
    }
  }
  return corr;
}

double TopicMatching::mean_score() const {
  if (scores.empty()) return 0.0;
  return std::accumulate(scores.begin(), scores.end(), 0.0) /
         static_cast<double>(scores.size());
}

TopicMatching match_topics(const TopicMatrix& reference,
                           const TopicMatrix& candidate) {
  const Eigen::MatrixXd corr = correlation_matrix(reference, candidate);
  const auto n = static_cast<std::size_t>(corr.rows());
  TopicMatching out;
  out.permutation.assign(n, 0);
  out.scores.assign(n, 0.0);
  std::vector<bool> ref_used(n, false), cand_used(n, false);
  for (std::size_t round = 0; round < n; ++round) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (ref_used[i]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (cand_used[j]) continue;
        const double c = corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (c > best) {  // strict: earlier (i, j) wins ties
          best = c;
          bi = i;
          bj = j;
        }
      }
    }
    ref_used[bi] = cand_used[bj] = true;
    out.permutation[bi] = bj;
    out.scores[bi] = best;
  }
  return out;
}

}  // namespace nsvi
