#include "nsvi/lda.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace nsvi {

void LdaHyper::validate() const {
  if (num_topics == 0) throw UsageError("LDA needs at least one topic");
  if (!(alpha > 0.0)) throw UsageError("LDA alpha must be positive");
  if (!(eta > 0.0)) throw UsageError("LDA eta must be positive");
  if (corpus_size_hint == 0) throw UsageError("LDA corpus size hint must be positive");
}

TopicMatrix exp_dirichlet_expectation(const TopicMatrix& lambda) {
  TopicMatrix out(lambda.rows(), lambda.cols());
  for (Eigen::Index k = 0; k < lambda.rows(); ++k) {
    out.row(k) = dirichlet_expectation(lambda.row(k)).array().exp();
  }
  return out;
}

LocalVariational estep_document(std::span<const std::uint32_t> ids,
                                std::span<const double> counts,
                                const TopicMatrix& exp_elog_beta,
                                const LdaHyper& hyper,
                                const EStepOptions& options) {
  const auto topics = static_cast<Eigen::Index>(hyper.num_topics);
  const auto terms = static_cast<Eigen::Index>(ids.size());
  LocalVariational local;
  local.phi.resize(terms, topics);
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  local.gamma = RowVector::Constant(topics, hyper.alpha + total / static_cast<double>(topics));
  if (terms == 0) {
    local.gamma.setConstant(hyper.alpha);
    return local;
  }

  RowVector exp_elog_theta(topics);
  RowVector elog_theta(topics);
  RowVector next_gamma(topics);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    elog_theta = dirichlet_expectation(local.gamma);
    exp_elog_theta = elog_theta.array().exp();
    next_gamma.setConstant(hyper.alpha);
    for (Eigen::Index i = 0; i < terms; ++i) {
      auto row = local.phi.row(i);
      const auto w = static_cast<Eigen::Index>(ids[static_cast<std::size_t>(i)]);
      row = exp_elog_theta.array() * exp_elog_beta.col(w).transpose().array();
      double norm = row.sum();
      if (!(norm > 1e-280)) {
        // Products underflowed; redo this term in log space.
        for (Eigen::Index k = 0; k < topics; ++k) {
          row[k] = elog_theta[k] + std::log(std::max(exp_elog_beta(k, w), 1e-300));
        }
        row.array() -= row.maxCoeff();
        row = row.array().exp();
        norm = row.sum();
      }
      row /= norm;
      next_gamma += counts[static_cast<std::size_t>(i)] * row;
    }
    const double change = (next_gamma - local.gamma).cwiseAbs().mean();
    local.gamma = next_gamma;
    if (change < options.tolerance) break;
  }
  return local;
}

namespace {

void check_terms(const BowDoc& doc, std::size_t vocab_size) {
  if (!doc.empty() && doc.terms().back().id >= vocab_size) {
    throw DataError("document term id " + std::to_string(doc.terms().back().id) +
                    " exceeds vocabulary size " + std::to_string(vocab_size));
  }
}

}  // namespace

std::vector<LocalVariational> local_estep(const Batch& batch,
                                          const TopicMatrix& lambda,
                                          const LdaHyper& hyper,
                                          const EStepOptions& options) {
  if (static_cast<std::size_t>(lambda.rows()) != hyper.num_topics) {
    throw DataError("local_estep: lambda has " + std::to_string(lambda.rows()) +
                    " rows, hyper says " + std::to_string(hyper.num_topics) +
                    " topics");
  }
  for (const BowDoc* doc : batch) check_terms(*doc, static_cast<std::size_t>(lambda.cols()));
  const TopicMatrix exp_elog_beta = exp_dirichlet_expectation(lambda);
  std::vector<LocalVariational> out;
  out.reserve(batch.size());
  std::vector<std::uint32_t> ids;
  std::vector<double> counts;
  for (const BowDoc* doc : batch) {
    ids.clear();
    counts.clear();
    for (const auto& t : doc->terms()) {
      ids.push_back(t.id);
      counts.push_back(t.count);
    }
    out.push_back(estep_document(ids, counts, exp_elog_beta, hyper, options));
  }
  return out;
}

TopicMatrix lambda_hat(const Batch& batch,
                       const std::vector<LocalVariational>& locals,
                       const LdaHyper& hyper, std::size_t vocab_size,
                       std::size_t batch_size) {
  if (batch.size() != locals.size()) {
    throw DataError("lambda_hat: " + std::to_string(batch.size()) +
                    " documents but " + std::to_string(locals.size()) +
                    " local parameter sets");
  }
  if (batch_size == 0) throw UsageError("lambda_hat: batch size must be positive");
  const auto topics = static_cast<Eigen::Index>(hyper.num_topics);
  TopicMatrix stats = TopicMatrix::Zero(topics, static_cast<Eigen::Index>(vocab_size));
  for (std::size_t d = 0; d < batch.size(); ++d) {
    const auto& terms = batch[d]->terms();
    const auto& phi = locals[d].phi;
    if (static_cast<std::size_t>(phi.rows()) != terms.size()) {
      throw DataError("lambda_hat: local parameters do not match document " +
                      std::to_string(d));
    }
    for (std::size_t i = 0; i < terms.size(); ++i) {
      if (terms[i].id >= vocab_size) throw DataError("lambda_hat: term id out of range");
      stats.col(terms[i].id) +=
          static_cast<double>(terms[i].count) * phi.row(static_cast<Eigen::Index>(i)).transpose();
    }
  }
  const double scale = static_cast<double>(hyper.corpus_size_hint) /
                       static_cast<double>(batch_size);
  return (scale * stats).array() + hyper.eta;
}

DocSplit split_document(const BowDoc& doc, std::uint64_t split_seed) {
  std::uint64_t content = 0xcbf29ce484222325ULL;
  std::vector<std::uint32_t> slots;
  for (std::size_t i = 0; i < doc.terms().size(); ++i) {
    const auto& t = doc.terms()[i];
    content = mix_seed(content, (static_cast<std::uint64_t>(t.id) << 32) | t.count);
    slots.insert(slots.end(), t.count, static_cast<std::uint32_t>(i));
  }
  std::mt19937_64 rng(mix_seed(split_seed, content));
  std::shuffle(slots.begin(), slots.end(), rng);

  DocSplit split;
  split.observe.assign(doc.terms().size(), 0);
  split.test.assign(doc.terms().size(), 0);
  const std::size_t n_test = slots.size() / 2;
  for (std::size_t j = 0; j < slots.size(); ++j) {
    (j < n_test ? split.test : split.observe)[slots[j]] += 1;
  }
  return split;
}

PerplexityResult held_out_perplexity(const TopicMatrix& lambda,
                                     const std::vector<BowDoc>& heldout,
                                     const LdaHyper& hyper,
                                     std::uint64_t split_seed) {
  std::vector<DocSplit> splits;
  splits.reserve(heldout.size());
  for (const auto& doc : heldout) splits.push_back(split_document(doc, split_seed));
  return held_out_perplexity(lambda, heldout, splits, hyper);
}

PerplexityResult held_out_perplexity(const TopicMatrix& lambda,
                                     const std::vector<BowDoc>& heldout,
                                     const std::vector<DocSplit>& splits,
                                     const LdaHyper& hyper) {
  if (heldout.empty()) throw DataError("held-out set is empty");
  if (splits.size() != heldout.size()) {
    throw DataError("held_out_perplexity: one split per document required");
  }
  if (static_cast<std::size_t>(lambda.rows()) != hyper.num_topics) {
    throw DataError("held_out_perplexity: lambda/topic count mismatch");
  }
  for (Eigen::Index k = 0; k < lambda.rows(); ++k) check_feasible(lambda.row(k));

  const TopicMatrix exp_elog_beta = exp_dirichlet_expectation(lambda);
  const TopicMatrix beta_mean =
      lambda.array().colwise() / lambda.rowwise().sum().array();

  PerplexityResult result;
  double log_prob = 0.0;
  std::vector<std::uint32_t> ids;
  std::vector<double> counts;
  for (std::size_t d = 0; d < heldout.size(); ++d) {
    const BowDoc& doc = heldout[d];
    check_terms(doc, static_cast<std::size_t>(lambda.cols()));
    if (doc.total_tokens() < 2) {
      ++result.documents_skipped;
      continue;
    }
    const auto& split = splits[d];
    ids.clear();
    counts.clear();
    for (std::size_t i = 0; i < doc.terms().size(); ++i) {
      if (split.observe[i] > 0) {
        ids.push_back(doc.terms()[i].id);
        counts.push_back(split.observe[i]);
      }
    }
    const auto local = estep_document(ids, counts, exp_elog_beta, hyper);
    const RowVector theta = local.gamma / local.gamma.sum();
    for (std::size_t i = 0; i < doc.terms().size(); ++i) {
      if (split.test[i] == 0) continue;
      const double p = theta.dot(beta_mean.col(doc.terms()[i].id));
      log_prob += split.test[i] * std::log(p);
      result.test_tokens += split.test[i];
    }
    ++result.documents_used;
  }
  if (result.test_tokens == 0) {
    throw DataError("held-out set has no document with at least two tokens");
  }
  result.perplexity = std::exp(-log_prob / static_cast<double>(result.test_tokens));
  return result;
}

std::vector<std::size_t> top_word_ids(const TopicMatrix& lambda,
                                      std::size_t topic, std::size_t n) {
  if (topic >= static_cast<std::size_t>(lambda.rows())) {
    throw UsageError("topic index " + std::to_string(topic) + " out of range");
  }
  const auto v = static_cast<std::size_t>(lambda.cols());
  if (n > v) throw UsageError("requested more top words than vocabulary size");
  std::vector<std::size_t> ids(v);
  std::iota(ids.begin(), ids.end(), 0);
  const auto row = lambda.row(static_cast<Eigen::Index>(topic));
  std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    return row[static_cast<Eigen::Index>(a)] > row[static_cast<Eigen::Index>(b)];
  });
  ids.resize(n);
  return ids;
}

std::vector<std::string> top_words(const TopicMatrix& lambda, std::size_t topic,
                                   std::size_t n, const Vocabulary& vocab) {
  if (vocab.size() != static_cast<std::size_t>(lambda.cols())) {
    throw DataError("vocabulary size does not match lambda width");
  }
  std::vector<std::string> out;
  for (auto id : top_word_ids(lambda, topic, n)) out.push_back(vocab[id]);
  return out;
}

LdaModel::LdaModel(LdaHyper hyper, std::size_t vocab_size, EStepOptions options,
                   Curvature curvature)
    : hyper_(hyper),
      vocab_size_(vocab_size),
      options_(options),
      curvature_(curvature) {
  hyper_.validate();
  if (vocab_size_ < 2) throw UsageError("LDA needs a vocabulary of at least two terms");
}

std::vector<LocalVariational> LdaModel::local_expectations(
    const Batch& batch, const TopicMatrix& lambda) const {
  return local_estep(batch, lambda, hyper_, options_);
}

TopicMatrix LdaModel::intermediate_global(
    const Batch& batch, const std::vector<LocalVariational>& locals,
    std::size_t batch_size) const {
  return nsvi::lambda_hat(batch, locals, hyper_, vocab_size_, batch_size);
}

RowVector LdaModel::hessian_inverse_apply(const RowRef& row,
                                          const RowRef& v) const {
  if (curvature_ == Curvature::kDiagonal) {
    return diagonal_hessian_inverse_apply(row, v);
  }
  return nsvi::hessian_inverse_apply(row, v);
}

}  // namespace nsvi
