#include "nsvi/corpus.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

namespace nsvi {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

BowDoc::BowDoc(std::vector<TermCount> terms) : terms_(std::move(terms)) {
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (terms_[i].count == 0) {
      throw DataError("document term " + std::to_string(terms_[i].id) +
                      " has zero count");
    }
    if (i > 0 && terms_[i].id <= terms_[i - 1].id) {
      throw DataError("document term ids must be strictly increasing (" +
                      std::to_string(terms_[i - 1].id) + " then " +
                      std::to_string(terms_[i].id) + ")");
    }
  }
}

std::uint64_t BowDoc::total_tokens() const {
  std::uint64_t n = 0;
  for (const auto& t : terms_) n += t.count;
  return n;
}

Vocabulary::Vocabulary(std::vector<std::string> terms)
    : terms_(std::move(terms)) {
  if (terms_.size() < 2) {
    throw DataError("vocabulary needs at least two terms");
  }
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (!seen.insert(terms_[i]).second) {
      throw DataError("duplicate vocabulary term '" + terms_[i] +
                      "' at line " + std::to_string(i + 1));
    }
  }
}

Vocabulary Vocabulary::numbered(std::size_t size) {
  std::vector<std::string> terms;
  terms.reserve(size);
  for (std::size_t i = 0; i < size; ++i) terms.push_back("w" + std::to_string(i));
  return Vocabulary(std::move(terms));
}

std::uint64_t Corpus::total_tokens() const {
  std::uint64_t n = 0;
  for (const auto& d : docs) n += d.total_tokens();
  return n;
}

namespace {

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
  throw DataError("corpus line " + std::to_string(line_no) + ": " + what);
}

template <typename T>
bool parse_uint(std::string_view text, T& out) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

BowDoc parse_line(std::string_view line, std::size_t line_no,
                  std::size_t vocab_size) {
  const auto fields = split_ws(line);
  if (fields.empty()) parse_fail(line_no, "empty line");
  std::size_t declared = 0;
  if (!parse_uint(fields[0], declared)) {
    parse_fail(line_no, "expected unique-term count, got '" +
                            std::string(fields[0]) + "'");
  }
  if (declared != fields.size() - 1) {
    parse_fail(line_no, "declared " + std::to_string(declared) +
                            " terms, found " +
                            std::to_string(fields.size() - 1));
  }
  std::vector<TermCount> terms;
  terms.reserve(declared);
  for (std::size_t i = 1; i < fields.size(); ++i) {
    const auto colon = fields[i].find(':');
    TermCount tc;
    if (colon == std::string_view::npos ||
        !parse_uint(fields[i].substr(0, colon), tc.id) ||
        !parse_uint(fields[i].substr(colon + 1), tc.count)) {
      parse_fail(line_no, "malformed pair '" + std::string(fields[i]) + "'");
    }
    if (tc.id >= vocab_size) {
      parse_fail(line_no, "term id " + std::to_string(tc.id) +
                              " out of range for vocabulary of size " +
                              std::to_string(vocab_size));
    }
    terms.push_back(tc);
  }
  try {
    return BowDoc(std::move(terms));
  } catch (const DataError& e) {
    parse_fail(line_no, e.what());
  }
}

bool ends_with_gz(const std::filesystem::path& path) {
  return path.extension() == ".gz";
}

}  // namespace

Corpus parse_corpus(std::istream& in, std::size_t vocab_size) {
  Corpus corpus;
  corpus.vocab_size = vocab_size;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    corpus.docs.push_back(parse_line(line, line_no, vocab_size));
  }
  return corpus;
}

Corpus parse_corpus(const std::string& text, std::size_t vocab_size) {
  std::istringstream in(text);
  return parse_corpus(in, vocab_size);
}

std::string serialize_doc(const BowDoc& doc) {
  std::string out = std::to_string(doc.unique_terms());
  for (const auto& t : doc.terms()) {
    out += ' ';
    out += std::to_string(t.id);
    out += ':';
    out += std::to_string(t.count);
  }
  return out;
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& d : corpus.docs) {
    out += serialize_doc(d);
    out += '\n';
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  if (ends_with_gz(path)) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (f == nullptr) throw DataError("cannot open " + path.string());
    std::string out;
    char buf[1 << 15];
    int n = 0;
    while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
    const bool failed = n < 0;
    gzclose(f);
    if (failed) throw DataError("gzip read error in " + path.string());
    return out;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (ends_with_gz(path)) {
    gzFile f = gzopen(path.c_str(), "wb");
    if (f == nullptr) throw DataError("cannot write " + path.string());
    const int n = gzwrite(f, text.data(), static_cast<unsigned>(text.size()));
    gzclose(f);
    if (n != static_cast<int>(text.size())) {
      throw DataError("gzip write error in " + path.string());
    }
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    terms.push_back(line);
  }
  return Vocabulary(std::move(terms));
}

void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::string out;
  for (const auto& t : vocab.terms()) {
    out += t;
    out += '\n';
  }
  write_text_file(path, out);
}

Corpus load_corpus(const std::filesystem::path& path, std::size_t vocab_size) {
  return parse_corpus(read_text_file(path), vocab_size);
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  write_text_file(path, serialize_corpus(corpus));
}

namespace {

void append_double(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace

void save_topics(const std::filesystem::path& path, const TopicMatrix& topics) {
  std::string out;
  for (Eigen::Index k = 0; k < topics.rows(); ++k) {
    for (Eigen::Index w = 0; w < topics.cols(); ++w) {
      if (w > 0) out += ' ';
      append_double(out, topics(k, w));
    }
    out += '\n';
  }
  write_text_file(path, out);
}

TopicMatrix load_topics(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<double> row;
    for (auto field : split_ws(line)) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw DataError(path.string() + " line " + std::to_string(line_no) +
                        ": bad number '" + std::string(field) + "'");
      }
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError(path.string() + " line " + std::to_string(line_no) +
                      ": ragged matrix row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path.string() + ": empty matrix file");
  TopicMatrix m(rows.size(), rows.front().size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t w = 0; w < rows[k].size(); ++w) m(k, w) = rows[k][w];
  }
  return m;
}

SyntheticCorpus generate_synthetic(const SyntheticParams& p) {
  if (p.vocab_size < 2) throw UsageError("synthetic corpus needs V >= 2");
  if (p.num_topics < 1) throw UsageError("synthetic corpus needs K_true >= 1");
  if (p.num_docs < 1) throw UsageError("synthetic corpus needs D >= 1");
  if (!(p.mean_doc_length >= 1.0)) {
    throw UsageError("synthetic corpus needs mean document length >= 1");
  }
  if (!(p.doc_topic_alpha > 0.0) || !(p.topic_word_concentration > 0.0)) {
    throw UsageError("synthetic Dirichlet parameters must be positive");
  }

  std::mt19937_64 rng(p.seed);
  const auto dirichlet = [&rng](std::size_t n, double a) {
    std::gamma_distribution<double> g(a, 1.0);
    std::vector<double> x(n);
    double s = 0.0;
    // Small concentrations can underflow every draw; redraw until some mass.
    do {
      s = 0.0;
      for (auto& v : x) {
        v = g(rng);
        s += v;
      }
    } while (!(s > 0.0));
    for (auto& v : x) v /= s;
    return x;
  };

  SyntheticCorpus out;
  out.true_topics.resize(p.num_topics, p.vocab_size);
  std::vector<std::discrete_distribution<std::uint32_t>> word_dists;
  for (std::size_t k = 0; k < p.num_topics; ++k) {
    auto beta = dirichlet(p.vocab_size, p.topic_word_concentration);
    for (std::size_t w = 0; w < p.vocab_size; ++w) out.true_topics(k, w) = beta[w];
    word_dists.emplace_back(beta.begin(), beta.end());
  }

  std::poisson_distribution<std::uint32_t> extra_len(p.mean_doc_length - 1.0);
  out.corpus.vocab_size = p.vocab_size;
  out.corpus.docs.reserve(p.num_docs);
  std::vector<std::uint32_t> counts(p.vocab_size);
  for (std::size_t d = 0; d < p.num_docs; ++d) {
    auto theta = dirichlet(p.num_topics, p.doc_topic_alpha);
    std::discrete_distribution<std::size_t> topic_dist(theta.begin(), theta.end());
    const std::uint32_t len = 1 + (p.mean_doc_length > 1.0 ? extra_len(rng) : 0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::uint32_t n = 0; n < len; ++n) {
      ++counts[word_dists[topic_dist(rng)](rng)];
    }
    std::vector<TermCount> terms;
    for (std::uint32_t w = 0; w < p.vocab_size; ++w) {
      if (counts[w] > 0) terms.push_back({w, counts[w]});
    }
    out.corpus.docs.emplace_back(std::move(terms));
  }
  return out;
}

HoldoutSplit split_holdout(const Corpus& corpus, double fraction,
                           std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw UsageError("held-out fraction must lie in (0, 1)");
  }
  const std::size_t d = corpus.size();
  const auto n_held = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(d) + 1e-9));
  if (n_held == 0 || n_held == d) {
    throw UsageError("held-out split of " + std::to_string(d) +
                     " documents at fraction " + std::to_string(fraction) +
                     " leaves one side empty");
  }
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, 0x686f6c64));
  std::shuffle(order.begin(), order.end(), rng);

  HoldoutSplit split;
  split.train.vocab_size = split.heldout.vocab_size = corpus.vocab_size;
  for (std::size_t i = 0; i < d; ++i) {
    auto& side = i < n_held ? split.heldout : split.train;
    side.docs.push_back(corpus.docs[order[i]]);
  }
  return split;
}

MinibatchStream::MinibatchStream(const Corpus& corpus, std::vector<Pool> pools,
                                 std::vector<std::size_t> node_pool,
                                 std::size_t batch_size, std::uint64_t seed)
    : corpus_(&corpus),
      pools_(std::move(pools)),
      node_pool_(std::move(node_pool)),
      batch_size_(batch_size),
      seed_(seed) {
  if (batch_size_ == 0) throw UsageError("batch size must be positive");
  if (node_pool_.empty()) throw UsageError("stream needs at least one node");
  for (std::size_t k = 0; k < node_pool_.size(); ++k) {
    if (node_pool_[k] >= pools_.size()) {
      throw UsageError("node " + std::to_string(k) + " maps to unknown pool");
    }
    const auto& pool = pools_[node_pool_[k]];
    if (batch_size_ > pool.doc_indices.size()) {
      throw UsageError("batch size " + std::to_string(batch_size_) +
                       " exceeds the " + std::to_string(pool.doc_indices.size()) +
                       " documents available to node " + std::to_string(k));
    }
  }
  for (const auto& pool : pools_) {
    for (auto idx : pool.doc_indices) {
      if (idx >= corpus.size()) throw UsageError("pool document index out of range");
    }
  }
}

MinibatchStream MinibatchStream::shared(const Corpus& corpus,
                                        std::size_t num_nodes,
                                        std::size_t batch_size,
                                        std::uint64_t seed) {
  Pool all;
  all.doc_indices.resize(corpus.size());
  std::iota(all.doc_indices.begin(), all.doc_indices.end(), 0);
  return MinibatchStream(corpus, {std::move(all)},
                         std::vector<std::size_t>(num_nodes, 0), batch_size, seed);
}

MinibatchStream MinibatchStream::disjoint(const Corpus& corpus,
                                          std::size_t num_nodes,
                                          std::size_t batch_size,
                                          std::uint64_t seed) {
  if (num_nodes == 0) throw UsageError("stream needs at least one node");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, 0x70617274));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Pool> pools(num_nodes);
  for (std::size_t i = 0; i < order.size(); ++i) {
    pools[i % num_nodes].doc_indices.push_back(order[i]);
  }
  std::vector<std::size_t> node_pool(num_nodes);
  std::iota(node_pool.begin(), node_pool.end(), 0);
  return MinibatchStream(corpus, std::move(pools), std::move(node_pool),
                         batch_size, seed);
}

MinibatchStream MinibatchStream::custom(const Corpus& corpus,
                                        std::vector<Pool> pools,
                                        std::vector<std::size_t> node_pool,
                                        std::size_t batch_size,
                                        std::uint64_t seed) {
  return MinibatchStream(corpus, std::move(pools), std::move(node_pool),
                         batch_size, seed);
}

std::vector<std::size_t> MinibatchStream::epoch_order(std::size_t pool,
                                                      std::uint64_t epoch) const {
  std::vector<std::size_t> order = pools_[pool].doc_indices;
  std::mt19937_64 rng(mix_seed(mix_seed(seed_, pool), epoch));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::vector<std::size_t> MinibatchStream::batch_indices(std::size_t node,
                                                        std::uint64_t round) const {
  const std::size_t pool = node_pool_.at(node);
  const std::size_t n = pools_[pool].doc_indices.size();
  std::vector<std::size_t> out;
  out.reserve(batch_size_);
  std::uint64_t pos = round * batch_size_;
  std::uint64_t epoch = pos / n;
  auto order = epoch_order(pool, epoch);
  for (std::size_t i = 0; i < batch_size_; ++i, ++pos) {
    if (pos / n != epoch) {
      epoch = pos / n;
      order = epoch_order(pool, epoch);
    }
    out.push_back(order[pos % n]);
  }
  return out;
}

std::vector<Batch> MinibatchStream::next_batches(std::uint64_t round) const {
  std::vector<Batch> out(node_pool_.size());
  for (std::size_t k = 0; k < node_pool_.size(); ++k) {
    for (auto idx : batch_indices(k, round)) out[k].push_back(&corpus_->docs[idx]);
  }
  return out;
}

}  // namespace nsvi
