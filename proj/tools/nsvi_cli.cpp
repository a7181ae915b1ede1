// nsvi: command-line front end for ADMM-coupled stochastic variational
// inference experiments.
//
//   nsvi gen-corpus --out DIR [--vocab-size V --topics K --docs D ...]
//   nsvi run --out DIR [--preset NAME] [--spec FILE] [--set key=value ...]
//   nsvi report --run DIR [--reference K --top N --topics T]
//   nsvi export --run DIR [--out DIR]

#include <filesystem>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "nsvi/corpus.hpp"
#include "nsvi/error.hpp"
#include "nsvi/experiment.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int gen_corpus(const nsvi::SyntheticParams& params, const fs::path& out) {
  if (params.num_docs == 0) throw nsvi::UsageError("--docs must be at least 1");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw nsvi::DataError("cannot create " + out.string() + ": " + ec.message());
  const auto synth = nsvi::generate_synthetic(params);
  nsvi::save_corpus(out / "corpus.txt", synth.corpus);
  nsvi::save_vocabulary(out / "vocab.txt", nsvi::Vocabulary::numbered(params.vocab_size));
  nsvi::save_topics(out / "true_topics.txt", synth.true_topics);
  std::cout << "D=" << synth.corpus.size() << " V=" << params.vocab_size
            << " K_true=" << params.num_topics << " tokens=" << synth.corpus.total_tokens()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ADMM-coupled stochastic variational inference simulator"};
  app.require_subcommand(1);

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic bag-of-words corpus");
  nsvi::SyntheticParams synth;
  fs::path gen_out;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--vocab-size", synth.vocab_size, "Vocabulary size V");
  gen->add_option("--topics", synth.num_topics, "Number of true topics");
  gen->add_option("--docs", synth.num_docs, "Number of documents D");
  gen->add_option("--doc-length", synth.mean_doc_length, "Mean document length");
  gen->add_option("--doc-alpha", synth.doc_topic_alpha, "Document-topic Dirichlet parameter");
  gen->add_option("--topic-concentration", synth.topic_word_concentration,
                  "Topic-word Dirichlet parameter");
  gen->add_option("--seed", synth.seed, "Random seed");

  // run
  auto* run = app.add_subcommand("run", "Run an experiment");
  std::string preset, spec_file, mode, graph;
  std::vector<std::string> settings;
  std::size_t rounds = 0, eval_every = 0;
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  fs::path run_out;
  run->add_option("--out", run_out, "Run output directory")->required();
  run->add_option("--preset", preset, "Named preset")
      ->check(CLI::IsMember(nsvi::preset_names()));
  run->add_option("--spec", spec_file, "key=value spec file (a manifest works too)");
  run->add_option("--set", settings, "Override a setting, key=value (repeatable)");
  run->add_option("--mode", mode, "centralized | distributed | networked");
  run->add_option("--graph", graph, "Graph preset (line:N, star:N, full:N, ...) or edge-list file");
  run->add_option("--rounds", rounds, "Number of rounds");
  run->add_option("--eval-every", eval_every, "Evaluation cadence in rounds");
  run->add_option("--workers", workers, "Worker threads; results do not depend on this");

  // report
  auto* report = app.add_subcommand("report", "Print aligned topic tables for a run");
  fs::path report_dir;
  std::size_t reference = 0, top_n = 3, max_topics = 0;
  report->add_option("--run", report_dir, "Run directory")->required();
  report->add_option("--reference", reference, "Reference node for alignment");
  report->add_option("--top", top_n, "Words per topic");
  report->add_option("--topics", max_topics, "Topics to show (0 = all)");

  // export
  auto* exp = app.add_subcommand("export", "Write perplexity.csv and disagreement.csv");
  fs::path export_dir, export_out;
  exp->add_option("--run", export_dir, "Run directory")->required();
  exp->add_option("--out", export_out, "Destination directory (default: run directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (gen->parsed()) return gen_corpus(synth, gen_out);

    if (run->parsed()) {
      nsvi::ExperimentSpec spec;
      if (!preset.empty()) spec.set("preset", preset);
      if (!spec_file.empty()) spec.apply_file(spec_file);
      if (!mode.empty()) spec.set("mode", mode);
      if (!graph.empty()) spec.set("graph", graph);
      for (const auto& kv : settings) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw nsvi::UsageError("--set expects key=value, got '" + kv + "'");
        spec.set(kv.substr(0, eq), kv.substr(eq + 1));
      }
      if (rounds) spec.rounds = rounds;
      if (eval_every) spec.eval_every = eval_every;
      spec.admm.workers = workers;
      spec.output_dir = run_out;
      const auto result = nsvi::run_experiment(spec, [](std::size_t round, const nsvi::RunResult& r) {
        std::cerr << "round " << round;
        if (!r.metrics.disagreement.empty()) {
          std::cerr << " disagreement=" << r.metrics.disagreement.back().value;
        }
        std::cerr << "\n";
      });
      nsvi::write_run_artifacts(result, run_out);
      std::cout << "wrote " << result.learners.size() << " learners to " << run_out.string() << "\n";
      return 0;
    }

    if (report->parsed()) {
      const auto loaded = nsvi::load_run(report_dir);
      const auto text = nsvi::render_report(loaded, reference, top_n, max_topics);
      nsvi::write_text_file(report_dir / "report.txt", text);
      std::cout << text;
      return 0;
    }

    if (exp->parsed()) {
      nsvi::export_run(export_dir, export_out.empty() ? export_dir : export_out);
      return 0;
    }
  } catch (const nsvi::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nsvi::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const nsvi::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
