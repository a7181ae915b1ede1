#pragma once

// Shared fixtures for the unit tests and the acceptance binary.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nsvi/corpus.hpp>
#include <nsvi/expfam.hpp>
#include <nsvi/model.hpp>

namespace testsupport {

// Long-double reference for psi, independent of the library series: shift by
// N = 64 with the explicit sum, then the asymptotic tail to x^-12.
inline long double digamma_ref(long double x) {
  long double acc = 0.0L;
  const int shift = 64;
  for (int n = 0; n < shift; ++n) acc -= 1.0L / (x + n);
  const long double y = x + shift;
  const long double y2 = 1.0L / (y * y);
  const long double tail =
      std::log(y) - 0.5L / y -
      y2 * (1.0L / 12 - y2 * (1.0L / 120 - y2 * (1.0L / 252 - y2 * (1.0L / 240 - y2 / 132))));
  return acc + tail;
}

inline long double trigamma_ref(long double x) {
  long double acc = 0.0L;
  const int shift = 64;
  for (int n = 0; n < shift; ++n) acc += 1.0L / ((x + n) * (x + n));
  const long double y = x + shift;
  const long double iy = 1.0L / y;
  const long double y2 = iy * iy;
  const long double tail =
      iy + 0.5L * y2 +
      iy * y2 * (1.0L / 6 - y2 * (1.0L / 30 - y2 * (1.0L / 42 - y2 * (1.0L / 30 - y2 * 5.0L / 66))));
  return acc + tail;
}

// Dense log-normalizer Hessian built from the reference trigamma.
inline Eigen::MatrixXd hessian_ref(const nsvi::RowVector& row) {
  const Eigen::Index n = row.size();
  const double off = static_cast<double>(trigamma_ref(row.sum()));
  Eigen::MatrixXd h = Eigen::MatrixXd::Constant(n, n, -off);
  for (Eigen::Index w = 0; w < n; ++w) h(w, w) += static_cast<double>(trigamma_ref(row[w]));
  return h;
}

inline nsvi::RowVector random_row(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  nsvi::RowVector r(n);
  for (Eigen::Index i = 0; i < n; ++i) r[i] = std::exp(u(rng));
  return r;
}

// Conjugate Dirichlet-multinomial model over m outcomes: one global row,
// no local variables. lambda_hat = eta + (D/B) * sum of batch counts.
class DirichletMultinomial final : public nsvi::ModelContract {
 public:
  DirichletMultinomial(std::size_t m, double eta, double corpus_size)
      : m_(m), eta_(eta), corpus_size_(corpus_size) {}

  std::vector<nsvi::LocalVariational> local_expectations(
      const nsvi::Batch&, const nsvi::TopicMatrix&) const override {
    return {};
  }

  nsvi::TopicMatrix intermediate_global(const nsvi::Batch& batch,
                                        const std::vector<nsvi::LocalVariational>&,
                                        std::size_t batch_size) const override {
    nsvi::TopicMatrix out = nsvi::TopicMatrix::Zero(1, static_cast<Eigen::Index>(m_));
    for (const auto* doc : batch) {
      for (const auto& t : doc->terms()) out(0, t.id) += t.count;
    }
    out *= corpus_size_ / static_cast<double>(batch_size);
    out.array() += eta_;
    return out;
  }

 private:
  std::size_t m_;
  double eta_;
  double corpus_size_;
};

// Categorical draws from a fixed skewed distribution over m outcomes.
inline nsvi::Corpus categorical_corpus(std::size_t m, std::size_t docs,
                                       std::size_t tokens, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> w(m);
  for (std::size_t i = 0; i < m; ++i) w[i] = 1.0 + static_cast<double>(i);
  std::discrete_distribution<std::uint32_t> pick(w.begin(), w.end());
  nsvi::Corpus c;
  c.vocab_size = m;
  for (std::size_t d = 0; d < docs; ++d) {
    std::vector<std::uint32_t> counts(m, 0);
    for (std::size_t i = 0; i < tokens; ++i) ++counts[pick(rng)];
    std::vector<nsvi::TermCount> terms;
    for (std::uint32_t i = 0; i < m; ++i) {
      if (counts[i] > 0) terms.push_back({i, counts[i]});
    }
    c.docs.emplace_back(std::move(terms));
  }
  return c;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("nsvi_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testsupport
