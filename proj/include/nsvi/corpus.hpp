#pragma once

// Bag-of-words corpora, synthetic generation, held-out splits and
// per-learner minibatch streams.
//
// Corpus line grammar (one document per line):
//   U id:count id:count ...
// where U is the number of (id, count) pairs that follow.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "nsvi/expfam.hpp"

namespace nsvi {

struct TermCount {
  std::uint32_t id = 0;
  std::uint32_t count = 0;

  friend bool operator==(const TermCount&, const TermCount&) = default;
};

// Term ids strictly increasing, counts >= 1.
class BowDoc {
 public:
  BowDoc() = default;
  // Validates ordering and counts; throws DataError.
  explicit BowDoc(std::vector<TermCount> terms);

  const std::vector<TermCount>& terms() const { return terms_; }
  std::size_t unique_terms() const { return terms_.size(); }
  std::uint64_t total_tokens() const;
  bool empty() const { return terms_.empty(); }

  friend bool operator==(const BowDoc&, const BowDoc&) = default;

 private:
  std::vector<TermCount> terms_;
};

class Vocabulary {
 public:
  Vocabulary() = default;
  // Throws DataError on duplicates or fewer than two terms.
  explicit Vocabulary(std::vector<std::string> terms);

  // Placeholder vocabulary "w0".."w{V-1}".
  static Vocabulary numbered(std::size_t size);

  std::size_t size() const { return terms_.size(); }
  const std::string& operator[](std::size_t id) const { return terms_.at(id); }
  const std::vector<std::string>& terms() const { return terms_; }

 private:
  std::vector<std::string> terms_;
};

struct Corpus {
  std::vector<BowDoc> docs;
  std::size_t vocab_size = 0;

  std::size_t size() const { return docs.size(); }
  std::uint64_t total_tokens() const;
};

// Parses the line format above. Every term id must be < vocab_size.
// Errors carry the 1-based line number.
Corpus parse_corpus(std::istream& in, std::size_t vocab_size);
Corpus parse_corpus(const std::string& text, std::size_t vocab_size);

// Canonical serialization: "U id:count ..." per line, LF terminated.
std::string serialize_corpus(const Corpus& corpus);
std::string serialize_doc(const BowDoc& doc);

// File I/O; paths ending in ".gz" are read/written gzip-compressed.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

Vocabulary load_vocabulary(const std::filesystem::path& path);
void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);
Corpus load_corpus(const std::filesystem::path& path, std::size_t vocab_size);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

// Ground-truth topics as rows of word probabilities, one row per line.
void save_topics(const std::filesystem::path& path, const TopicMatrix& topics);
TopicMatrix load_topics(const std::filesystem::path& path);

struct SyntheticParams {
  std::size_t vocab_size = 50;
  std::size_t num_topics = 5;
  std::size_t num_docs = 2000;
  double mean_doc_length = 80.0;
  double doc_topic_alpha = 0.2;
  // Concentration of the sparse symmetric Dirichlet the topics come from.
  double topic_word_concentration = 0.1;
  std::uint64_t seed = 1;
};

struct SyntheticCorpus {
  Corpus corpus;
  TopicMatrix true_topics;  // num_topics x vocab_size, rows sum to 1
};

SyntheticCorpus generate_synthetic(const SyntheticParams& params);

struct HoldoutSplit {
  Corpus train;
  Corpus heldout;
};

// Seeded shuffle; held-out side gets floor(fraction * D) documents.
HoldoutSplit split_holdout(const Corpus& corpus, double fraction,
                           std::uint64_t seed);

enum class StreamMode { kShared, kDisjoint };

using Batch = std::vector<const BowDoc*>;

// Seeded per-node minibatch source. Each node reads from a pool of document
// indices; nodes that share a stream key receive identical batches. Within a
// pool, batches walk through seeded per-epoch permutations, so the batch for
// (node, round) is a pure function of the seed.
class MinibatchStream {
 public:
  struct Pool {
    std::vector<std::size_t> doc_indices;
  };

  // Every node receives the same batch sequence drawn from the whole corpus.
  static MinibatchStream shared(const Corpus& corpus, std::size_t num_nodes,
                                std::size_t batch_size, std::uint64_t seed);
  // Documents are partitioned across nodes with no overlap.
  static MinibatchStream disjoint(const Corpus& corpus, std::size_t num_nodes,
                                  std::size_t batch_size, std::uint64_t seed);
  // Arbitrary pools plus a node -> pool map. Nodes mapped to the same pool
  // read the identical sequence.
  static MinibatchStream custom(const Corpus& corpus, std::vector<Pool> pools,
                                std::vector<std::size_t> node_pool,
                                std::size_t batch_size, std::uint64_t seed);

  std::size_t num_nodes() const { return node_pool_.size(); }
  std::size_t batch_size() const { return batch_size_; }
  const Pool& pool_of(std::size_t node) const {
    return pools_.at(node_pool_.at(node));
  }

  // Document indices for node `node` at round `round`.
  std::vector<std::size_t> batch_indices(std::size_t node,
                                         std::uint64_t round) const;
  // One batch per node for round `round`.
  std::vector<Batch> next_batches(std::uint64_t round) const;

 private:
  MinibatchStream(const Corpus& corpus, std::vector<Pool> pools,
                  std::vector<std::size_t> node_pool, std::size_t batch_size,
                  std::uint64_t seed);

  std::vector<std::size_t> epoch_order(std::size_t pool,
                                       std::uint64_t epoch) const;

  const Corpus* corpus_;
  std::vector<Pool> pools_;
  std::vector<std::size_t> node_pool_;
  std::size_t batch_size_;
  std::uint64_t seed_;
};

// splitmix64 finalizer; used to derive independent seeds from tuples.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace nsvi
