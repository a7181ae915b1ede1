#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include <nsvi/corpus.hpp>
#include <nsvi/lda.hpp>

#include "support.hpp"

using namespace nsvi;

namespace {

LdaHyper hyper3() { return LdaHyper{3, 0.5, 0.01, 100}; }

TopicMatrix random_lambda(std::mt19937_64& rng, Eigen::Index k, Eigen::Index v) {
  TopicMatrix lam(k, v);
  for (Eigen::Index i = 0; i < k; ++i) lam.row(i) = testsupport::random_row(rng, v, 0.1, 20.0);
  return lam;
}

BowDoc doc(std::vector<TermCount> t) { return BowDoc(std::move(t)); }

}  // namespace

TEST_CASE("empty document returns the prior") {
  BowDoc empty;
  std::mt19937_64 rng(1);
  const TopicMatrix lam = random_lambda(rng, 3, 6);
  const auto locals = local_estep({&empty}, lam, hyper3());
  REQUIRE(locals.size() == 1);
  CHECK(locals[0].phi.rows() == 0);
  CHECK((locals[0].gamma.array() == 0.5).all());
}

TEST_CASE("a topic owning the document words takes the largest gamma") {
  TopicMatrix lam = TopicMatrix::Constant(3, 6, 1.0);
  lam(1, 2) = 500.0;
  lam(1, 4) = 500.0;
  BowDoc d = doc({{2, 3}, {4, 2}});
  const auto locals = local_estep({&d}, lam, hyper3());
  const auto& g = locals[0].gamma;
  Eigen::Index arg;
  g.maxCoeff(&arg);
  CHECK(arg == 1);
  CHECK(g[1] > g[0]);
  CHECK(g[1] > g[2]);
}

TEST_CASE("phi rows are distributions and gamma stays positive") {
  std::mt19937_64 rng(2);
  const TopicMatrix lam = random_lambda(rng, 4, 30);
  const auto corpus = testsupport::categorical_corpus(30, 20, 25, 3);
  Batch batch;
  for (const auto& d : corpus.docs) batch.push_back(&d);
  const auto locals = local_estep(batch, lam, LdaHyper{4, 0.1, 0.01, 100});
  for (const auto& l : locals) {
    CHECK((l.gamma.array() > 0.0).all());
    for (Eigen::Index i = 0; i < l.phi.rows(); ++i) {
      CHECK(std::abs(l.phi.row(i).sum() - 1.0) <= 1e-8);
      CHECK((l.phi.row(i).array() >= 0.0).all());
    }
  }
}

TEST_CASE("E-step survives extreme topic weights") {
  TopicMatrix lam = TopicMatrix::Constant(2, 4, 1e-6);
  lam(0, 0) = 1e6;
  lam(1, 1) = 1e6;
  BowDoc d = doc({{2, 1}, {3, 1}});
  const auto locals = local_estep({&d}, lam, LdaHyper{2, 0.1, 0.01, 10});
  for (Eigen::Index i = 0; i < locals[0].phi.rows(); ++i) {
    CHECK(locals[0].phi.row(i).allFinite());
    CHECK(std::abs(locals[0].phi.row(i).sum() - 1.0) <= 1e-8);
  }
}

TEST_CASE("local_estep rejects out-of-vocabulary terms") {
  TopicMatrix lam = TopicMatrix::Ones(3, 4);
  BowDoc d = doc({{1, 1}, {7, 1}});
  CHECK_THROWS_AS(local_estep({&d}, lam, hyper3()), DataError);
}

TEST_CASE("lambda_hat scaling arithmetic") {
  auto hy = LdaHyper{3, 0.5, 0.25, 40};
  BowDoc d = doc({{2, 3}});
  LocalVariational l;
  l.gamma = RowVector::Ones(3);
  l.phi.resize(1, 3);
  l.phi << 0.0, 1.0, 0.0;
  const TopicMatrix out = lambda_hat({&d}, {l}, hy, 5, 8);
  for (Eigen::Index k = 0; k < 3; ++k) {
    for (Eigen::Index w = 0; w < 5; ++w) {
      const double expect = (k == 1 && w == 2) ? 0.25 + 40.0 * 3 / 8 : 0.25;
      CHECK(out(k, w) == doctest::Approx(expect).epsilon(1e-15));
    }
  }

  const TopicMatrix prior = lambda_hat({}, {}, hy, 5, 8);
  CHECK((prior.array() == 0.25).all());
  CHECK_THROWS_AS(lambda_hat({&d}, {}, hy, 5, 8), DataError);
}

TEST_CASE("lambda_hat is linear in counts") {
  std::mt19937_64 rng(4);
  const TopicMatrix lam = random_lambda(rng, 3, 12);
  const auto corpus = testsupport::categorical_corpus(12, 6, 10, 5);
  Batch batch;
  std::vector<BowDoc> doubled;
  for (const auto& d : corpus.docs) {
    batch.push_back(&d);
    std::vector<TermCount> t = d.terms();
    for (auto& x : t) x.count *= 2;
    doubled.emplace_back(std::move(t));
  }
  Batch batch2;
  for (const auto& d : doubled) batch2.push_back(&d);
  const auto hy = hyper3();
  const auto locals = local_estep(batch, lam, hy);
  const TopicMatrix a = lambda_hat(batch, locals, hy, 12, 6);
  const TopicMatrix b = lambda_hat(batch2, locals, hy, 12, 6);
  CHECK(((b.array() - hy.eta) - 2.0 * (a.array() - hy.eta)).abs().maxCoeff() <= 1e-12);
  CHECK(a.minCoeff() >= hy.eta);
}

TEST_CASE("document split halves") {
  BowDoc d = doc({{0, 3}, {4, 2}, {9, 2}});
  const auto s = split_document(d, 99);
  const auto obs = std::accumulate(s.observe.begin(), s.observe.end(), 0u);
  const auto tst = std::accumulate(s.test.begin(), s.test.end(), 0u);
  CHECK(obs == 4);
  CHECK(tst == 3);
  for (std::size_t i = 0; i < d.terms().size(); ++i) {
    CHECK(s.observe[i] + s.test[i] == d.terms()[i].count);
  }
  const auto again = split_document(d, 99);
  CHECK(again.observe == s.observe);
  CHECK(again.test == s.test);
}

TEST_CASE("uniform topics give perplexity V") {
  const auto corpus = testsupport::categorical_corpus(17, 30, 20, 6);
  const TopicMatrix lam = TopicMatrix::Constant(3, 17, 2.5);
  const auto r = held_out_perplexity(lam, corpus.docs, hyper3(), 8);
  CHECK(std::abs(r.perplexity - 17.0) / 17.0 <= 1e-6);
  CHECK(r.documents_used == 30);
  CHECK(r.test_tokens == 30 * 10);
}

TEST_CASE("perplexity skips tiny documents and refuses empty sets") {
  std::vector<BowDoc> docs{doc({{1, 1}}), doc({{0, 1}, {2, 2}})};
  const TopicMatrix lam = TopicMatrix::Ones(3, 4);
  const auto r = held_out_perplexity(lam, docs, hyper3(), 1);
  CHECK(r.documents_skipped == 1);
  CHECK(r.documents_used == 1);
  CHECK(r.perplexity >= 1.0);
  CHECK_THROWS_AS(held_out_perplexity(lam, {}, hyper3(), 1), DataError);
  CHECK_THROWS_AS(held_out_perplexity(lam, {doc({{1, 1}})}, hyper3(), 1), DataError);
}

TEST_CASE("true topics beat uniform topics on held-out data") {
  SyntheticParams p;
  p.num_docs = 300;
  const auto s = generate_synthetic(p);
  const auto split = split_holdout(s.corpus, 0.2, 3);
  LdaHyper hy{5, 0.2, 0.01, 240};
  const TopicMatrix truth = (s.true_topics * 1000.0).array() + 0.01;
  const TopicMatrix uniform = TopicMatrix::Constant(5, 50, 1.0);
  const double pt = held_out_perplexity(truth, split.heldout.docs, hy, 4).perplexity;
  const double pu = held_out_perplexity(uniform, split.heldout.docs, hy, 4).perplexity;
  CHECK(pt < pu);
  CHECK(pu == doctest::Approx(50.0).epsilon(1e-6));
}

TEST_CASE("perplexity is invariant to document order") {
  std::mt19937_64 rng(9);
  const TopicMatrix lam = random_lambda(rng, 3, 15);
  auto corpus = testsupport::categorical_corpus(15, 25, 12, 10);
  const double a = held_out_perplexity(lam, corpus.docs, hyper3(), 5).perplexity;
  std::shuffle(corpus.docs.begin(), corpus.docs.end(), rng);
  const double b = held_out_perplexity(lam, corpus.docs, hyper3(), 5).perplexity;
  CHECK(std::abs(a - b) <= 1e-12 * a);
}

TEST_CASE("perplexity is invariant to consistent vocabulary relabeling") {
  std::mt19937_64 rng(12);
  const Eigen::Index v = 15;
  const TopicMatrix lam = random_lambda(rng, 3, v);
  const auto corpus = testsupport::categorical_corpus(15, 25, 12, 13);
  std::vector<std::uint32_t> perm(v);
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng);

  TopicMatrix lam2(3, v);
  for (Eigen::Index w = 0; w < v; ++w) lam2.col(perm[w]) = lam.col(w);

  // Relabel documents and carry each term's observe/test counts along.
  std::vector<DocSplit> splits, splits2;
  std::vector<BowDoc> docs2;
  for (const auto& d : corpus.docs) {
    const auto s = split_document(d, 21);
    splits.push_back(s);
    std::vector<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t, std::uint32_t>> rows;
    for (std::size_t i = 0; i < d.terms().size(); ++i) {
      rows.emplace_back(perm[d.terms()[i].id], d.terms()[i].count, s.observe[i], s.test[i]);
    }
    std::sort(rows.begin(), rows.end());
    std::vector<TermCount> terms;
    DocSplit s2;
    for (auto [id, c, o, t] : rows) {
      terms.push_back({id, c});
      s2.observe.push_back(o);
      s2.test.push_back(t);
    }
    docs2.emplace_back(std::move(terms));
    splits2.push_back(std::move(s2));
  }
  const double a = held_out_perplexity(lam, corpus.docs, splits, hyper3()).perplexity;
  const double b = held_out_perplexity(lam2, docs2, splits2, hyper3()).perplexity;
  CHECK(std::abs(a - b) <= 1e-10 * a);
}

TEST_CASE("E-step and perplexity are deterministic") {
  std::mt19937_64 rng(14);
  const TopicMatrix lam = random_lambda(rng, 3, 20);
  const auto corpus = testsupport::categorical_corpus(20, 10, 15, 15);
  Batch batch;
  for (const auto& d : corpus.docs) batch.push_back(&d);
  const auto a = local_estep(batch, lam, hyper3());
  const auto b = local_estep(batch, lam, hyper3());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].gamma == b[i].gamma);
    CHECK(a[i].phi == b[i].phi);
  }
  CHECK(held_out_perplexity(lam, corpus.docs, hyper3(), 2).perplexity ==
        held_out_perplexity(lam, corpus.docs, hyper3(), 2).perplexity);
}

TEST_CASE("top words") {
  TopicMatrix lam(2, 3);
  lam << 0.1, 5.0, 2.0,
         1.0, 1.0, 0.5;
  Vocabulary vocab({"a", "b", "c"});
  CHECK(top_words(lam, 0, 2, vocab) == std::vector<std::string>{"b", "c"});
  CHECK(top_words(lam, 1, 2, vocab) == std::vector<std::string>{"a", "b"});
  auto all = top_word_ids(lam, 0, 3);
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<std::size_t>{0, 1, 2});
  CHECK_THROWS_AS(top_words(lam, 2, 1, vocab), UsageError);
  CHECK_THROWS_AS(top_word_ids(lam, 0, 4), UsageError);
}

TEST_CASE("LdaModel implements the model contract") {
  std::mt19937_64 rng(16);
  const TopicMatrix lam = random_lambda(rng, 3, 10);
  const auto corpus = testsupport::categorical_corpus(10, 4, 8, 17);
  Batch batch;
  for (const auto& d : corpus.docs) batch.push_back(&d);
  LdaModel model(hyper3(), 10);
  const TopicMatrix via_model = model.lambda_hat(batch, lam, 4);
  const TopicMatrix direct = lambda_hat(batch, local_estep(batch, lam, hyper3()), hyper3(), 10, 4);
  CHECK(via_model == direct);

  LdaModel diag(hyper3(), 10, {}, Curvature::kDiagonal);
  const RowVector row = lam.row(0);
  const RowVector v = RowVector::LinSpaced(10, -1, 1);
  CHECK(diag.hessian_inverse_apply(RowRef(row), RowRef(v)) == diagonal_hessian_inverse_apply(row, v));
  CHECK(model.hessian_inverse_apply(RowRef(row), RowRef(v)) == hessian_inverse_apply(row, v));
  CHECK_THROWS_AS(LdaModel(LdaHyper{0, 0.1, 0.1, 1}, 10), UsageError);
}
