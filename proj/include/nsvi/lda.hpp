#pragma once

// Latent Dirichlet allocation under mean-field variational inference.

#include <cstdint>
#include <string>
#include <vector>

#include "nsvi/corpus.hpp"
#include "nsvi/model.hpp"

namespace nsvi {

struct LdaHyper {
  std::size_t num_topics = 5;
  double alpha = 0.2;  // symmetric document-topic prior
  double eta = 0.01;   // symmetric topic-word prior
  std::size_t corpus_size_hint = 1;  // D, documents the stream represents

  void validate() const;
};

struct EStepOptions {
  double tolerance = 1e-3;  // mean absolute change in gamma
  int max_iterations = 100;
};

// Document-level coordinate ascent on (gamma, phi). `counts` are per unique
// term weights, allowing fractional evidence.
LocalVariational estep_document(std::span<const std::uint32_t> ids,
                                std::span<const double> counts,
                                const TopicMatrix& exp_elog_beta,
                                const LdaHyper& hyper,
                                const EStepOptions& options = {});

// exp(E[log beta]) for every topic row of lambda.
TopicMatrix exp_dirichlet_expectation(const TopicMatrix& lambda);

std::vector<LocalVariational> local_estep(const Batch& batch,
                                          const TopicMatrix& lambda,
                                          const LdaHyper& hyper,
                                          const EStepOptions& options = {});

TopicMatrix lambda_hat(const Batch& batch,
                       const std::vector<LocalVariational>& locals,
                       const LdaHyper& hyper, std::size_t vocab_size,
                       std::size_t batch_size);

// Observe/test partition of one document's tokens, expressed as per unique
// term counts aligned with the document's term list.
struct DocSplit {
  std::vector<std::uint32_t> observe;
  std::vector<std::uint32_t> test;
};

// Seeded 50/50 token split. The seed for each document is derived from the
// document content, so the split does not depend on document order.
DocSplit split_document(const BowDoc& doc, std::uint64_t split_seed);

struct PerplexityResult {
  double perplexity = 0.0;
  std::uint64_t test_tokens = 0;
  std::size_t documents_used = 0;
  std::size_t documents_skipped = 0;  // fewer than two tokens
};

PerplexityResult held_out_perplexity(const TopicMatrix& lambda,
                                     const std::vector<BowDoc>& heldout,
                                     const LdaHyper& hyper,
                                     std::uint64_t split_seed);

// Same estimator over caller-supplied splits (one per document).
PerplexityResult held_out_perplexity(const TopicMatrix& lambda,
                                     const std::vector<BowDoc>& heldout,
                                     const std::vector<DocSplit>& splits,
                                     const LdaHyper& hyper);

// Top-n words of one topic row, descending weight, ties by ascending id.
std::vector<std::string> top_words(const TopicMatrix& lambda, std::size_t topic,
                                   std::size_t n, const Vocabulary& vocab);
std::vector<std::size_t> top_word_ids(const TopicMatrix& lambda,
                                      std::size_t topic, std::size_t n);

class LdaModel final : public ModelContract {
 public:
  LdaModel(LdaHyper hyper, std::size_t vocab_size, EStepOptions options = {},
           Curvature curvature = Curvature::kExact);

  const LdaHyper& hyper() const { return hyper_; }
  std::size_t vocab_size() const { return vocab_size_; }
  Curvature curvature() const { return curvature_; }

  std::vector<LocalVariational> local_expectations(
      const Batch& batch, const TopicMatrix& lambda) const override;
  TopicMatrix intermediate_global(const Batch& batch,
                                  const std::vector<LocalVariational>& locals,
                                  std::size_t batch_size) const override;

  using ModelContract::hessian_inverse_apply;
  // Exact Sherman-Morrison solve or its diagonal part, per `curvature()`.
  RowVector hessian_inverse_apply(const RowRef& row,
                                  const RowRef& v) const override;

 private:
  LdaHyper hyper_;
  std::size_t vocab_size_;
  EStepOptions options_;
  Curvature curvature_;
};

}  // namespace nsvi
