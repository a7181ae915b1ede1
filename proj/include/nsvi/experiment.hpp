#pragma once

// Experiment orchestration: turns a flat key=value run description into
// cohorts of learners, drives the synchronous rounds, evaluates held-out
// perplexity and writes run artifacts.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nsvi/consensus.hpp"
#include "nsvi/corpus.hpp"
#include "nsvi/graph.hpp"
#include "nsvi/lda.hpp"

namespace nsvi {

enum class InitPolicy { kSharedSeed, kIndependentSeeds };

// Penalty and step-size offset calibrated for desk-scale synthetic runs
// with diagonal curvature.
inline AdmmConfig desk_admm() {
  AdmmConfig a;
  a.penalty = 1e-3;
  a.tau0 = 8.0;
  return a;
}

// Data layouts describe how training documents are assigned to nodes.
//   standard       one cohort; all nodes shared or disjoint per data_mode
//   line5-offline  nodes 0,1 replay a fixed offline pool, 2..4 stream
//                  disjoint partitions of the rest
//   indep-vs-net5  node 0 alone on the full corpus, nodes 1..4 networked on
//                  quartered partitions, node 5 alone on node 1's quarter
struct ExperimentSpec {
  std::string preset;  // informational; presets are expanded on load
  std::string layout = "standard";

  Mode mode = Mode::kNetworked;
  std::string graph = "star:4";  // preset name or edge-list file path
  std::size_t nodes = 0;         // distributed/centralized; 0 = graph size
  StreamMode data_mode = StreamMode::kDisjoint;
  std::size_t offline_docs = 800;  // line5-offline pool size

  // Corpus: files when corpus_file is set, otherwise synthetic.
  std::string corpus_file;
  std::string vocab_file;
  std::string truth_file;
  SyntheticParams synthetic;

  double holdout_fraction = 0.1;
  std::uint64_t holdout_seed = 11;
  std::uint64_t split_seed = 13;

  AdmmConfig admm = desk_admm();
  // Curvature used to precondition the ADMM coupling terms.
  Curvature curvature = Curvature::kDiagonal;
  LdaHyper hyper{5, 0.2, 0.01, 0};  // corpus_size_hint 0 = automatic
  EStepOptions estep;

  std::size_t rounds = 200;
  std::size_t eval_every = 10;
  InitPolicy init = InitPolicy::kSharedSeed;
  std::uint64_t init_seed = 17;
  std::uint64_t stream_seed = 19;

  // Not recorded in the manifest: neither affects results.
  std::filesystem::path output_dir;

  // Applies one key=value setting; throws UsageError on unknown keys or
  // unparsable values. Setting "preset" expands that preset in place.
  void set(const std::string& key, const std::string& value);
  // Applies every line of a key=value file ('#' comments allowed).
  void apply_file(const std::filesystem::path& path);

  // Canonical key=value text (sorted keys), parseable by apply_file.
  std::string to_manifest() const;
  std::map<std::string, std::string> to_map() const;

  void validate() const;
};

// Names accepted by ExperimentSpec::set("preset", ...).
std::vector<std::string> preset_names();
ExperimentSpec make_preset(const std::string& name);

// Everything derived from a spec before the first round.
struct Cohort {
  std::string name;
  Mode mode = Mode::kNetworked;
  std::optional<Graph> graph;         // networked only
  std::vector<std::size_t> nodes;     // global node ids
  std::vector<MinibatchStream::Pool> pools;
  std::vector<std::size_t> node_pool;  // per local node
  bool report_disagreement = false;
};

struct Metrics {
  struct PerplexityRow {
    std::size_t round;
    std::size_t node;
    double perplexity;
  };
  struct DisagreementRow {
    std::size_t round;
    double value;
  };
  std::vector<PerplexityRow> perplexity;
  std::vector<DisagreementRow> disagreement;
};

struct RunResult {
  ExperimentSpec spec;
  std::vector<Cohort> cohorts;
  std::vector<LearnerState> learners;          // indexed by global node id
  std::vector<std::optional<TopicMatrix>> zeta;  // per cohort, distributed only
  Metrics metrics;
  std::optional<TopicMatrix> true_topics;
  Vocabulary vocab;
};

struct LoadedCorpus {
  Corpus train;
  Corpus heldout;
  Vocabulary vocab;
  std::optional<TopicMatrix> true_topics;
};

LoadedCorpus load_experiment_corpus(const ExperimentSpec& spec);
std::vector<Cohort> build_cohorts(const ExperimentSpec& spec, const Corpus& train);

// Initial lambda for node `node` under the spec's init policy.
TopicMatrix initial_lambda(const ExperimentSpec& spec, std::size_t vocab_size,
                           std::size_t node);

// Called after every evaluated round; optional progress hook.
using RoundObserver = std::function<void(std::size_t round, const RunResult&)>;

// Runs the whole experiment in memory.
RunResult run_experiment(const ExperimentSpec& spec, const RoundObserver& observer = {});

// Writes manifest.txt, metrics.log, vocab.txt, lambda/multiplier per node,
// zeta per distributed cohort and, when known, true_topics.txt.
void write_run_artifacts(const RunResult& result, const std::filesystem::path& dir);

struct LoadedRun {
  ExperimentSpec spec;
  Metrics metrics;
  std::vector<TopicMatrix> lambdas;
  Vocabulary vocab;
  std::optional<TopicMatrix> true_topics;
};

LoadedRun load_run(const std::filesystem::path& dir);

// perplexity.csv and disagreement.csv text.
std::string perplexity_csv(const Metrics& metrics);
std::string disagreement_csv(const Metrics& metrics);
void export_run(const std::filesystem::path& run_dir,
                const std::filesystem::path& out_dir);

// Topic table aligned to the reference node plus alignment scores.
std::string render_report(const LoadedRun& run, std::size_t reference_node,
                          std::size_t top_n, std::size_t max_topics);

// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace nsvi
