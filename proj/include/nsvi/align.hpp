#pragma once

// Topic alignment between two learners via Pearson correlation of rows.

#include <vector>

#include "nsvi/expfam.hpp"

namespace nsvi {

// Sample correlation of two equal-length vectors (length >= 2). Throws
// NumericError if either vector is constant.
double pearson(const RowRef& u, const RowRef& v);

// correlations(i, j) = pearson(reference row i, candidate row j).
Eigen::MatrixXd correlation_matrix(const TopicMatrix& reference,
                                   const TopicMatrix& candidate);

struct TopicMatching {
  // permutation[i] = candidate topic matched to reference topic i.
  std::vector<std::size_t> permutation;
  // scores[i] = correlation of reference topic i with its match.
  std::vector<double> scores;

  double mean_score() const;
};

// Greedy assignment: repeatedly take the largest remaining correlation
// between an unmatched reference row and an unmatched candidate row; ties go
// to the lowest (reference, candidate) pair.
TopicMatching match_topics(const TopicMatrix& reference,
                           const TopicMatrix& candidate);

}  // namespace nsvi
