#include "nsvi/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "nsvi/align.hpp"

namespace nsvi {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

namespace {

std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  s.erase(0, s.find_first_not_of(ws));
  s.erase(s.find_last_not_of(ws) + 1);
  return s;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw UsageError("setting '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

const char* to_string(StreamMode m) {
  return m == StreamMode::kShared ? "shared" : "disjoint";
}

const char* to_string(InitPolicy p) {
  return p == InitPolicy::kSharedSeed ? "shared-seed" : "independent-seeds";
}

// Desk-scale synthetic corpus shared by the small presets.
void desk_corpus(ExperimentSpec& s) {
  s.synthetic.vocab_size = 50;
  s.synthetic.num_topics = 5;
  s.synthetic.num_docs = 2000;
  s.synthetic.mean_doc_length = 80;
  s.hyper.num_topics = 5;
  s.admm.batch_size = 16;
  s.rounds = 200;
  s.eval_every = 10;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"four-fully-connected", "four-fully-connected-synthetic", "line5",
          "star5", "indep-vs-net5"};
}

ExperimentSpec make_preset(const std::string& name) {
  ExperimentSpec s;
  s.preset = name;
  if (name == "four-fully-connected") {
    // Four learners, batch 64, 100 topics, c = 5e-8, 35 rounds.
    s.mode = Mode::kDistributed;
    s.graph = "full:4";
    s.nodes = 4;
    s.data_mode = StreamMode::kDisjoint;
    s.synthetic.vocab_size = 2000;
    s.synthetic.num_topics = 100;
    s.synthetic.num_docs = 10000;
    s.synthetic.mean_doc_length = 120;
    s.synthetic.doc_topic_alpha = 0.05;
    s.hyper.num_topics = 100;
    s.hyper.alpha = 0.01;
    s.admm.batch_size = 64;
    s.admm.penalty = 5e-8;
    s.admm.tau0 = 64.0;
    s.curvature = Curvature::kExact;
    s.rounds = 35;
    s.eval_every = 5;
  } else if (name == "four-fully-connected-synthetic") {
    desk_corpus(s);
    s.mode = Mode::kDistributed;
    s.graph = "full:4";
    s.nodes = 4;
    s.data_mode = StreamMode::kDisjoint;
  } else if (name == "line5") {
    desk_corpus(s);
    s.mode = Mode::kNetworked;
    s.graph = "line5";
    s.layout = "line5-offline";
  } else if (name == "star5") {
    desk_corpus(s);
    s.mode = Mode::kNetworked;
    s.graph = "star5";
    s.data_mode = StreamMode::kDisjoint;
  } else if (name == "indep-vs-net5") {
    desk_corpus(s);
    s.mode = Mode::kNetworked;
    s.graph = "full:4";
    s.layout = "indep-vs-net5";
  } else {
    throw UsageError("unknown preset '" + name + "'");
  }
  return s;
}

void ExperimentSpec::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  auto u64 = [&] { return parse_number<std::uint64_t>(key, value); };
  auto size = [&] { return parse_number<std::size_t>(key, value); };
  auto dbl = [&] { return parse_number<double>(key, value); };

  if (key == "preset") {
    if (value.empty()) {
      preset.clear();
      return;
    }
    const auto keep_out = output_dir;
    const auto keep_workers = admm.workers;
    *this = make_preset(value);
    output_dir = keep_out;
    admm.workers = keep_workers;
  } else if (key == "layout") {
    if (value != "standard" && value != "line5-offline" && value != "indep-vs-net5") {
      throw UsageError("unknown layout '" + value + "'");
    }
    layout = value;
  } else if (key == "mode") {
    mode = parse_mode(value);
    admm.mode = mode;
  } else if (key == "graph") {
    graph = value;
  } else if (key == "nodes") {
    nodes = size();
  } else if (key == "data_mode") {
    if (value == "shared") data_mode = StreamMode::kShared;
    else if (value == "disjoint") data_mode = StreamMode::kDisjoint;
    else throw UsageError("data_mode must be shared or disjoint");
  } else if (key == "offline_docs") {
    offline_docs = size();
  } else if (key == "corpus_file") {
    corpus_file = value;
  } else if (key == "vocab_file") {
    vocab_file = value;
  } else if (key == "truth_file") {
    truth_file = value;
  } else if (key == "synth_vocab") {
    synthetic.vocab_size = size();
  } else if (key == "synth_topics") {
    synthetic.num_topics = size();
  } else if (key == "synth_docs") {
    synthetic.num_docs = size();
  } else if (key == "synth_doc_length") {
    synthetic.mean_doc_length = dbl();
  } else if (key == "synth_doc_alpha") {
    synthetic.doc_topic_alpha = dbl();
  } else if (key == "synth_topic_concentration") {
    synthetic.topic_word_concentration = dbl();
  } else if (key == "synth_seed") {
    synthetic.seed = u64();
  } else if (key == "holdout_fraction") {
    holdout_fraction = dbl();
  } else if (key == "holdout_seed") {
    holdout_seed = u64();
  } else if (key == "split_seed") {
    split_seed = u64();
  } else if (key == "penalty") {
    admm.penalty = dbl();
  } else if (key == "tau0") {
    admm.tau0 = dbl();
  } else if (key == "curvature") {
    curvature = parse_curvature(value);
  } else if (key == "kappa") {
    admm.kappa = dbl();
  } else if (key == "batch_size") {
    admm.batch_size = size();
  } else if (key == "projection_floor") {
    admm.projection_floor = dbl();
  } else if (key == "topics") {
    hyper.num_topics = size();
  } else if (key == "alpha") {
    hyper.alpha = dbl();
  } else if (key == "eta") {
    hyper.eta = dbl();
  } else if (key == "corpus_size_hint") {
    hyper.corpus_size_hint = size();
  } else if (key == "estep_tolerance") {
    estep.tolerance = dbl();
  } else if (key == "estep_max_iterations") {
    estep.max_iterations = parse_number<int>(key, value);
  } else if (key == "rounds") {
    rounds = size();
  } else if (key == "eval_every") {
    eval_every = size();
  } else if (key == "init") {
    if (value == "shared-seed") init = InitPolicy::kSharedSeed;
    else if (value == "independent-seeds") init = InitPolicy::kIndependentSeeds;
    else throw UsageError("init must be shared-seed or independent-seeds");
  } else if (key == "init_seed") {
    init_seed = u64();
  } else if (key == "stream_seed") {
    stream_seed = u64();
  } else if (key == "workers") {
    admm.workers = size();
  } else if (key == "output_dir") {
    output_dir = value;
  } else {
    throw UsageError("unknown setting '" + key + "'");
  }
}

void ExperimentSpec::apply_file(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + " line " + std::to_string(line_no) +
                       ": expected key=value");
    }
    entries.emplace_back(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  // A preset resets everything, so it is applied before the other keys.
  std::stable_partition(entries.begin(), entries.end(),
                        [](const auto& e) { return e.first == "preset"; });
  for (const auto& [k, v] : entries) set(k, v);
}

std::map<std::string, std::string> ExperimentSpec::to_map() const {
  std::map<std::string, std::string> m;
  const auto num = [](auto v) { return std::to_string(v); };
  m["preset"] = preset;
  m["layout"] = layout;
  m["mode"] = to_string(mode);
  m["graph"] = graph;
  m["nodes"] = num(nodes);
  m["data_mode"] = to_string(data_mode);
  m["offline_docs"] = num(offline_docs);
  m["corpus_file"] = corpus_file;
  m["vocab_file"] = vocab_file;
  m["truth_file"] = truth_file;
  m["synth_vocab"] = num(synthetic.vocab_size);
  m["synth_topics"] = num(synthetic.num_topics);
  m["synth_docs"] = num(synthetic.num_docs);
  m["synth_doc_length"] = format_double(synthetic.mean_doc_length);
  m["synth_doc_alpha"] = format_double(synthetic.doc_topic_alpha);
  m["synth_topic_concentration"] = format_double(synthetic.topic_word_concentration);
  m["synth_seed"] = num(synthetic.seed);
  m["holdout_fraction"] = format_double(holdout_fraction);
  m["holdout_seed"] = num(holdout_seed);
  m["split_seed"] = num(split_seed);
  m["penalty"] = format_double(admm.penalty);
  m["tau0"] = format_double(admm.tau0);
  m["kappa"] = format_double(admm.kappa);
  m["curvature"] = to_string(curvature);
  m["batch_size"] = num(admm.batch_size);
  m["projection_floor"] = format_double(admm.projection_floor);
  m["topics"] = num(hyper.num_topics);
  m["alpha"] = format_double(hyper.alpha);
  m["eta"] = format_double(hyper.eta);
  m["corpus_size_hint"] = num(hyper.corpus_size_hint);
  m["estep_tolerance"] = format_double(estep.tolerance);
  m["estep_max_iterations"] = num(estep.max_iterations);
  m["rounds"] = num(rounds);
  m["eval_every"] = num(eval_every);
  m["init"] = to_string(init);
  m["init_seed"] = num(init_seed);
  m["stream_seed"] = num(stream_seed);
  return m;
}

std::string ExperimentSpec::to_manifest() const {
  std::string out = "preset=" + preset + "\n";
  for (const auto& [k, v] : to_map()) {
    if (k == "preset") continue;
    out += k + "=" + v + "\n";
  }
  return out;
}

void ExperimentSpec::validate() const {
  AdmmConfig cfg = admm;
  cfg.mode = mode;
  cfg.validate();
  if (rounds < 1) throw UsageError("rounds must be at least 1");
  if (eval_every < 1 || rounds % eval_every != 0) {
    throw UsageError("eval_every must be positive and divide rounds");
  }
  if (hyper.num_topics < 1) throw UsageError("topics must be at least 1");
  if (!(hyper.alpha > 0.0) || !(hyper.eta > 0.0)) throw UsageError("alpha and eta must be positive");
  if (!corpus_file.empty()) {
    if (vocab_file.empty()) throw UsageError("corpus_file requires vocab_file");
    if (!fs::exists(corpus_file)) throw UsageError("corpus file not found: " + corpus_file);
    if (!fs::exists(vocab_file)) throw UsageError("vocabulary file not found: " + vocab_file);
    if (!truth_file.empty() && !fs::exists(truth_file)) {
      throw UsageError("truth file not found: " + truth_file);
    }
  }
  if (layout != "standard" && mode != Mode::kNetworked) {
    throw UsageError("layout '" + layout + "' requires networked mode");
  }
}

LoadedCorpus load_experiment_corpus(const ExperimentSpec& spec) {
  LoadedCorpus out;
  Corpus all;
  if (!spec.corpus_file.empty()) {
    out.vocab = load_vocabulary(spec.vocab_file);
    all = load_corpus(spec.corpus_file, out.vocab.size());
    if (!spec.truth_file.empty()) out.true_topics = load_topics(spec.truth_file);
  } else {
    auto synth = generate_synthetic(spec.synthetic);
    all = std::move(synth.corpus);
    out.true_topics = std::move(synth.true_topics);
    out.vocab = Vocabulary::numbered(spec.synthetic.vocab_size);
  }
  auto split = split_holdout(all, spec.holdout_fraction, spec.holdout_seed);
  out.train = std::move(split.train);
  out.heldout = std::move(split.heldout);
  return out;
}

namespace {

Graph resolve_graph(const std::string& name) {
  if (fs::exists(name)) return Graph::load(name);
  return Graph::from_preset(name);
}

std::vector<std::size_t> iota_vec(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> v(end - begin);
  std::iota(v.begin(), v.end(), begin);
  return v;
}

std::vector<MinibatchStream::Pool> partition(std::vector<std::size_t> docs,
                                             std::size_t parts, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x706f6f6c));
  std::shuffle(docs.begin(), docs.end(), rng);
  std::vector<MinibatchStream::Pool> out(parts);
  for (std::size_t i = 0; i < docs.size(); ++i) out[i % parts].doc_indices.push_back(docs[i]);
  return out;
}

}  // namespace

std::vector<Cohort> build_cohorts(const ExperimentSpec& spec, const Corpus& train) {
  std::vector<Cohort> cohorts;
  const auto all_docs = iota_vec(0, train.size());
  if (spec.layout == "standard") {
    Cohort c;
    c.name = "main";
    c.mode = spec.mode;
    std::size_t k = spec.nodes;
    if (spec.mode == Mode::kNetworked) {
      c.graph = resolve_graph(spec.graph);
      if (k != 0 && k != c.graph->num_nodes()) {
        throw UsageError("nodes=" + std::to_string(k) + " conflicts with graph of " +
                         std::to_string(c.graph->num_nodes()) + " nodes");
      }
      k = c.graph->num_nodes();
    } else if (k == 0) {
      k = resolve_graph(spec.graph).num_nodes();
    }
    c.nodes = iota_vec(0, k);
    if (spec.data_mode == StreamMode::kShared) {
      c.pools = {MinibatchStream::Pool{all_docs}};
      c.node_pool.assign(k, 0);
    } else {
      c.pools = partition(all_docs, k, spec.stream_seed);
      c.node_pool = iota_vec(0, k);
    }
    c.report_disagreement = true;
    cohorts.push_back(std::move(c));
  } else if (spec.layout == "line5-offline") {
    Cohort c;
    c.name = "line";
    c.mode = Mode::kNetworked;
    c.graph = resolve_graph(spec.graph);
    if (c.graph->num_nodes() < 3) throw UsageError("line5-offline layout needs >= 3 nodes");
    const std::size_t k = c.graph->num_nodes();
    std::vector<std::size_t> docs = all_docs;
    std::mt19937_64 rng(mix_seed(spec.stream_seed, 0x6f66666c));
    std::shuffle(docs.begin(), docs.end(), rng);
    const std::size_t offline = std::min(spec.offline_docs, docs.size() / 2);
    c.pools.push_back({std::vector<std::size_t>(docs.begin(), docs.begin() + offline)});
    auto online = partition(std::vector<std::size_t>(docs.begin() + offline, docs.end()),
                            k - 2, spec.stream_seed);
    for (auto& p : online) c.pools.push_back(std::move(p));
    c.nodes = iota_vec(0, k);
    c.node_pool = {0, 0};
    for (std::size_t i = 2; i < k; ++i) c.node_pool.push_back(i - 1);
    c.report_disagreement = true;
    cohorts.push_back(std::move(c));
  } else if (spec.layout == "indep-vs-net5") {
    Graph net = resolve_graph(spec.graph);
    const std::size_t k = net.num_nodes();
    auto quarters = partition(all_docs, k, spec.stream_seed);

    Cohort full;
    full.name = "isolated-full";
    full.mode = Mode::kCentralized;
    full.nodes = {0};
    full.pools = {MinibatchStream::Pool{all_docs}};
    full.node_pool = {0};
    cohorts.push_back(std::move(full));

    Cohort network;
    network.name = "network";
    network.mode = Mode::kNetworked;
    network.graph = std::move(net);
    network.nodes = iota_vec(1, k + 1);
    network.pools = quarters;
    network.node_pool = iota_vec(0, k);
    network.report_disagreement = true;
    cohorts.push_back(std::move(network));

    Cohort part;
    part.name = "isolated-partition";
    part.mode = Mode::kCentralized;
    part.nodes = {k + 1};
    part.pools = {quarters[0]};
    part.node_pool = {0};
    cohorts.push_back(std::move(part));
  } else {
    throw UsageError("unknown layout '" + spec.layout + "'");
  }
  return cohorts;
}

TopicMatrix initial_lambda(const ExperimentSpec& spec, std::size_t vocab_size,
                           std::size_t node) {
  const std::uint64_t seed = spec.init == InitPolicy::kSharedSeed
                                 ? mix_seed(spec.init_seed, 0)
                                 : mix_seed(spec.init_seed, node + 1);
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> g(100.0, 0.01);
  TopicMatrix lambda(static_cast<Eigen::Index>(spec.hyper.num_topics),
                     static_cast<Eigen::Index>(vocab_size));
  for (Eigen::Index i = 0; i < lambda.size(); ++i) lambda.data()[i] = g(rng);
  return lambda;
}

namespace {

std::size_t auto_hint(const Cohort& c) {
  std::size_t total = 0;
  for (auto p : c.node_pool) total += c.pools[p].doc_indices.size();
  return std::max<std::size_t>(1, (total + c.node_pool.size() / 2) / c.node_pool.size());
}

}  // namespace

RunResult run_experiment(const ExperimentSpec& spec_in, const RoundObserver& observer) {
  ExperimentSpec spec = spec_in;
  spec.admm.mode = spec.mode;
  spec.validate();

  RunResult result;
  LoadedCorpus data = load_experiment_corpus(spec);
  result.vocab = data.vocab;
  result.true_topics = data.true_topics;
  result.cohorts = build_cohorts(spec, data.train);
  const std::size_t vocab_size = data.vocab.size();

  std::size_t total_nodes = 0;
  for (const auto& c : result.cohorts) total_nodes += c.nodes.size();
  for (std::size_t k = 0; k < total_nodes; ++k) {
    result.learners.push_back(make_learner(k, initial_lambda(spec, vocab_size, k),
                                           mix_seed(spec.stream_seed, k)));
  }

  struct CohortRuntime {
    LdaModel model;
    MinibatchStream stream;
    AdmmConfig cfg;
    std::vector<LearnerState> states;
    std::optional<CollectorState> collector;
  };
  std::vector<CohortRuntime> runtime;
  for (std::size_t ci = 0; ci < result.cohorts.size(); ++ci) {
    const auto& c = result.cohorts[ci];
    LdaHyper hyper = spec.hyper;
    if (hyper.corpus_size_hint == 0) hyper.corpus_size_hint = auto_hint(c);
    AdmmConfig cfg = spec.admm;
    cfg.mode = c.mode;
    std::vector<LearnerState> states;
    for (auto g : c.nodes) states.push_back(result.learners[g]);
    std::optional<CollectorState> collector;
    if (c.mode == Mode::kDistributed) collector = make_collector(states, cfg.penalty);
    runtime.push_back(CohortRuntime{
        LdaModel(hyper, vocab_size, spec.estep, spec.curvature),
        MinibatchStream::custom(data.train, c.pools, c.node_pool, cfg.batch_size,
                                mix_seed(spec.stream_seed, ci)),
        cfg, std::move(states), std::move(collector)});
  }
  result.zeta.assign(result.cohorts.size(), std::nullopt);

  LdaHyper eval_hyper = spec.hyper;
  eval_hyper.corpus_size_hint = std::max<std::size_t>(1, data.train.size());

  for (std::size_t t = 0; t < spec.rounds; ++t) {
    for (std::size_t ci = 0; ci < runtime.size(); ++ci) {
      auto& rt = runtime[ci];
      const auto batches = rt.stream.next_batches(t);
      switch (rt.cfg.mode) {
        case Mode::kCentralized:
          for (std::size_t k = 0; k < rt.states.size(); ++k) {
            try {
              rt.states[k] = centralized_step(rt.states[k], batches[k], rt.model, rt.cfg, t);
            } catch (const NumericError& e) {
              throw NumericError("round " + std::to_string(t) + ", node " +
                                 std::to_string(result.cohorts[ci].nodes[k]) + ": " + e.what());
            }
          }
          break;
        case Mode::kDistributed:
          distributed_round(rt.states, *rt.collector, batches, rt.model, rt.cfg, t);
          break;
        case Mode::kNetworked:
          networked_round(rt.states, *result.cohorts[ci].graph, batches, rt.model, rt.cfg, t);
          break;
      }
    }

    const std::size_t round = t + 1;
    if (round % spec.eval_every != 0) continue;

    std::vector<const LearnerState*> flat(total_nodes);
    for (std::size_t ci = 0; ci < runtime.size(); ++ci) {
      for (std::size_t k = 0; k < runtime[ci].states.size(); ++k) {
        flat[result.cohorts[ci].nodes[k]] = &runtime[ci].states[k];
      }
    }
    std::vector<double> perp(total_nodes);
    {
      std::vector<std::jthread> pool;
      const std::size_t workers = std::clamp<std::size_t>(spec.admm.workers, 1, total_nodes);
      std::vector<std::exception_ptr> errors(workers);
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t k = w; k < total_nodes; k += workers) {
              perp[k] = held_out_perplexity(flat[k]->lambda, data.heldout.docs,
                                            eval_hyper, spec.split_seed)
                            .perplexity;
            }
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      pool.clear();
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }
    for (std::size_t k = 0; k < total_nodes; ++k) {
      result.metrics.perplexity.push_back({round, k, perp[k]});
    }
    for (std::size_t ci = 0; ci < runtime.size(); ++ci) {
      if (result.cohorts[ci].report_disagreement) {
        result.metrics.disagreement.push_back({round, disagreement(runtime[ci].states)});
      }
    }
    if (observer) {
      for (std::size_t k = 0; k < total_nodes; ++k) result.learners[k] = *flat[k];
      observer(round, result);
    }
  }

  for (std::size_t ci = 0; ci < runtime.size(); ++ci) {
    for (std::size_t k = 0; k < runtime[ci].states.size(); ++k) {
      result.learners[result.cohorts[ci].nodes[k]] = runtime[ci].states[k];
    }
    if (runtime[ci].collector) result.zeta[ci] = runtime[ci].collector->zeta;
  }
  result.spec = spec;
  return result;
}

void write_run_artifacts(const RunResult& result, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());

  write_text_file(dir / "manifest.txt", result.spec.to_manifest());

  std::string log;
  for (const auto& r : result.metrics.perplexity) {
    log += "perplexity " + std::to_string(r.round) + " " + std::to_string(r.node) + " " +
           format_double(r.perplexity) + "\n";
  }
  for (const auto& r : result.metrics.disagreement) {
    log += "disagreement " + std::to_string(r.round) + " " + format_double(r.value) + "\n";
  }
  write_text_file(dir / "metrics.log", log);

  std::string cohorts;
  for (std::size_t ci = 0; ci < result.cohorts.size(); ++ci) {
    const auto& c = result.cohorts[ci];
    cohorts += "cohort " + c.name + " mode=" + to_string(c.mode) + " nodes=";
    for (std::size_t i = 0; i < c.nodes.size(); ++i) {
      cohorts += (i ? "," : "") + std::to_string(c.nodes[i]);
    }
    if (c.graph) {
      cohorts += " edges=";
      const auto& edges = c.graph->edges();
      for (std::size_t i = 0; i < edges.size(); ++i) {
        cohorts += (i ? "," : "") + std::to_string(c.nodes[edges[i].first]) + "-" +
                   std::to_string(c.nodes[edges[i].second]);
      }
    }
    cohorts += "\n";
    if (result.zeta[ci]) save_topics(dir / ("zeta_cohort" + std::to_string(ci) + ".txt"), *result.zeta[ci]);
  }
  write_text_file(dir / "cohorts.txt", cohorts);

  for (const auto& s : result.learners) {
    const auto k = std::to_string(s.node_id);
    save_topics(dir / ("lambda_node" + k + ".txt"), s.lambda);
    save_topics(dir / ("multiplier_node" + k + ".txt"), s.multiplier);
  }
  save_vocabulary(dir / "vocab.txt", result.vocab);
  if (result.true_topics) save_topics(dir / "true_topics.txt", *result.true_topics);
}

LoadedRun load_run(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.txt")) {
    throw DataError("no run artifacts in " + dir.string() + " (manifest.txt missing)");
  }
  LoadedRun run;
  run.spec.apply_file(dir / "manifest.txt");
  if (!fs::exists(dir / "metrics.log")) throw DataError("metrics.log missing in " + dir.string());
  std::istringstream in(read_text_file(dir / "metrics.log"));
  std::string kind;
  while (in >> kind) {
    if (kind == "perplexity") {
      Metrics::PerplexityRow r{};
      std::string v;
      in >> r.round >> r.node >> v;
      r.perplexity = std::stod(v);
      run.metrics.perplexity.push_back(r);
    } else if (kind == "disagreement") {
      Metrics::DisagreementRow r{};
      std::string v;
      in >> r.round >> v;
      r.value = std::stod(v);
      run.metrics.disagreement.push_back(r);
    } else {
      throw DataError("metrics.log: unknown record '" + kind + "'");
    }
  }
  for (std::size_t k = 0;; ++k) {
    const auto p = dir / ("lambda_node" + std::to_string(k) + ".txt");
    if (!fs::exists(p)) break;
    run.lambdas.push_back(load_topics(p));
  }
  if (run.lambdas.empty()) throw DataError("no lambda_node*.txt files in " + dir.string());
  run.vocab = load_vocabulary(dir / "vocab.txt");
  if (fs::exists(dir / "true_topics.txt")) run.true_topics = load_topics(dir / "true_topics.txt");
  return run;
}

std::string perplexity_csv(const Metrics& metrics) {
  std::string out = "round,node,perplexity\n";
  for (const auto& r : metrics.perplexity) {
    out += std::to_string(r.round) + "," + std::to_string(r.node) + "," +
           format_double(r.perplexity) + "\n";
  }
  return out;
}

std::string disagreement_csv(const Metrics& metrics) {
  std::string out = "round,value\n";
  for (const auto& r : metrics.disagreement) {
    out += std::to_string(r.round) + "," + format_double(r.value) + "\n";
  }
  return out;
}

void export_run(const fs::path& run_dir, const fs::path& out_dir) {
  const LoadedRun run = load_run(run_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  write_text_file(out_dir / "perplexity.csv", perplexity_csv(run.metrics));
  write_text_file(out_dir / "disagreement.csv", disagreement_csv(run.metrics));
}

std::string render_report(const LoadedRun& run, std::size_t reference_node,
                          std::size_t top_n, std::size_t max_topics) {
  const std::size_t k_count = run.lambdas.size();
  if (reference_node >= k_count) {
    throw UsageError("reference node " + std::to_string(reference_node) +
                     " out of range (run has " + std::to_string(k_count) + " nodes)");
  }
  const TopicMatrix& ref = run.lambdas[reference_node];
  const auto topics = static_cast<std::size_t>(ref.rows());
  const std::size_t shown = max_topics == 0 ? topics : std::min(max_topics, topics);

  std::vector<TopicMatching> matches;
  for (std::size_t k = 0; k < k_count; ++k) matches.push_back(match_topics(ref, run.lambdas[k]));

  std::vector<std::vector<std::vector<std::string>>> words(k_count);
  std::size_t width = 8;
  for (std::size_t k = 0; k < k_count; ++k) {
    words[k].resize(shown);
    for (std::size_t i = 0; i < shown; ++i) {
      words[k][i] = top_words(run.lambdas[k], matches[k].permutation[i], top_n, run.vocab);
      for (const auto& w : words[k][i]) width = std::max(width, w.size());
    }
  }
  const auto pad = [width](const std::string& s) {
    return s + std::string(width + 2 - std::min(width + 2, s.size()), ' ');
  };

  std::ostringstream out;
  out << "Top " << top_n << " words per topic, aligned to node " << reference_node << "\n";
  out << pad("topic");
  for (std::size_t k = 0; k < k_count; ++k) out << pad("node " + std::to_string(k));
  out << "\n";
  for (std::size_t i = 0; i < shown; ++i) {
    for (std::size_t r = 0; r < top_n; ++r) {
      out << pad(r == 0 ? "#" + std::to_string(i) : "");
      for (std::size_t k = 0; k < k_count; ++k) out << pad(words[k][i][r]);
      out << "\n";
    }
  }
  out << "\nAlignment to node " << reference_node << "\n";
  for (std::size_t k = 0; k < k_count; ++k) {
    const auto& m = matches[k];
    bool identity = true;
    for (std::size_t i = 0; i < m.permutation.size(); ++i) identity &= m.permutation[i] == i;
    out << "node " << k << " mean_score=" << format_double(m.mean_score())
        << " identity=" << (identity ? "yes" : "no") << " permutation=";
    for (std::size_t i = 0; i < m.permutation.size(); ++i) {
      out << (i ? "," : "") << m.permutation[i];
    }
    out << "\n";
  }
  if (run.true_topics && run.true_topics->cols() == ref.cols()) {
    out << "\nAlignment to true topics\n";
    for (std::size_t k = 0; k < k_count; ++k) {
      const auto& lam = run.lambdas[k];
      if (lam.rows() != run.true_topics->rows()) {
        out << "node " << k << " skipped (topic count differs from truth)\n";
        continue;
      }
      out << "node " << k << " mean_score="
          << format_double(match_topics(*run.true_topics, lam).mean_score()) << "\n";
    }
  }
  return out.str();
}

}  // namespace nsvi
