// Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <nsvi/align.hpp>
#include <nsvi/consensus.hpp>
#include <nsvi/experiment.hpp>
#include <nsvi/graph.hpp>
#include <nsvi/lda.hpp>

#include "support.hpp"

using namespace nsvi;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << std::endl;
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool bit_equal(const TopicMatrix& a, const TopicMatrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::equal(a.data(), a.data() + a.size(), b.data());
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// K=3 line graph, m=8 Dirichlet-multinomial instance shared by 1 and 2.
struct ExpFamInstance {
  std::size_t m = 8;
  // D equal to the batch size and short documents keep lambda O(1).
  Corpus corpus = testsupport::categorical_corpus(8, 90, 2, 2024);
  testsupport::DirichletMultinomial model{8, 0.5, 10.0};
  Graph graph = Graph::line(3);
  AdmmConfig cfg;
  std::vector<TopicMatrix> init;

  ExpFamInstance() {
    cfg.penalty = 1e-2;
    cfg.tau0 = 4.0;
    cfg.batch_size = 10;
    std::mt19937_64 rng(99);
    for (int k = 0; k < 3; ++k) init.emplace_back(testsupport::random_row(rng, 8, 0.5, 5.0));
  }
};

void criterion1() {
  const auto t0 = Clock::now();
  ExpFamInstance inst;
  std::vector<LearnerState> simple;
  for (std::size_t k = 0; k < 3; ++k) simple.push_back(make_learner(k, inst.init[k]));
  std::vector<TopicMatrix> oracle = inst.init;
  FullNetState full(inst.graph, oracle);
  const auto stream = MinibatchStream::disjoint(inst.corpus, 3, inst.cfg.batch_size, 5);
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 20; ++t) {
    const auto batches = stream.next_batches(t);
    networked_round(simple, inst.graph, batches, inst.model, inst.cfg, t);
    full_network_oracle_round(full, oracle, batches, inst.model, inst.cfg, t);
    for (std::size_t k = 0; k < 3; ++k) {
      worst = std::max(worst, (simple[k].lambda - oracle[k]).cwiseAbs().maxCoeff());
    }
  }
  const double secs = seconds_since(t0);
  report(1, worst <= 1e-9 && secs < 1.0,
         "simplified vs per-edge oracle, line:3, m=8, 20 rounds: max |diff| = " + fmt(worst) +
             " (tol 1e-9), " + fmt(secs) + " s (limit 1 s)");
}

void criterion2() {
  ExpFamInstance inst;
  std::vector<TopicMatrix> lambdas = inst.init;
  FullNetState full(inst.graph, lambdas);
  const auto stream = MinibatchStream::disjoint(inst.corpus, 3, inst.cfg.batch_size, 6);
  double eq = 0.0, anti = 0.0, avg = 0.0;
  for (std::uint64_t t = 0; t < 50; ++t) {
    full_network_oracle_round(full, lambdas, stream.next_batches(t), inst.model, inst.cfg, t);
    for (std::size_t k = 0; k < 3; ++k) {
      for (auto l : inst.graph.neighbors(k)) {
        const auto& e = full.edge(k, l);
        eq = std::max(eq, (e.y1 - e.y2).cwiseAbs().maxCoeff());
        anti = std::max(anti, (e.y1 + full.edge(l, k).y1).cwiseAbs().maxCoeff());
        avg = std::max(avg, (e.zeta - 0.5 * (lambdas[k] + lambdas[l])).cwiseAbs().maxCoeff());
      }
    }
  }
  report(2, eq <= 1e-12 && anti <= 1e-12 && avg <= 1e-12,
         "50 rounds: max|y_kl1 - y_kl2| = " + fmt(eq) + ", max|y_kl1 + y_lk1| = " + fmt(anti) +
             ", max|zeta_kl - mean| = " + fmt(avg) + " (tol 1e-12)");
}

void criterion3() {
  SyntheticParams p;
  p.vocab_size = 30;
  p.num_topics = 4;
  p.num_docs = 200;
  p.seed = 8;
  const auto synth = generate_synthetic(p);
  LdaModel model(LdaHyper{4, 0.2, 0.01, 200}, 30);
  AdmmConfig cfg;
  cfg.penalty = 0.0;
  cfg.batch_size = 8;
  ExperimentSpec spec;
  spec.hyper.num_topics = 4;
  std::vector<LearnerState> net;
  for (std::size_t k = 0; k < 3; ++k) net.push_back(make_learner(k, initial_lambda(spec, 30, k)));
  auto solo = net;
  const auto stream = MinibatchStream::disjoint(synth.corpus, 3, cfg.batch_size, 4);
  bool same = true;
  for (std::uint64_t t = 0; t < 20; ++t) {
    const auto batches = stream.next_batches(t);
    networked_round(net, Graph::line(3), batches, model, cfg, t);
    for (std::size_t k = 0; k < 3; ++k) {
      solo[k] = centralized_step(solo[k], batches[k], model, cfg, t);
      same &= bit_equal(net[k].lambda, solo[k].lambda);
    }
  }
  report(3, same, std::string("networked c=0, y=0 vs centralized SVI, LDA, line:3, 20 rounds: ") +
                      (same ? "bit-identical" : "differs"));
}

void criterion4() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(4);
  std::normal_distribution<double> gauss;
  double grad_err = 0.0, hess_err = 0.0, inv_err = 0.0;
  for (Eigen::Index n : {2, 5, 50}) {
    for (int trial = 0; trial < 100; ++trial) {
      const RowVector row = testsupport::random_row(rng, n, 0.5, 50.0);
      const RowVector ex = dirichlet_expectation(row);
      const double hg = 1e-5;
      for (Eigen::Index w = 0; w < n; ++w) {
        RowVector up = row, dn = row;
        up[w] += hg;
        dn[w] -= hg;
        grad_err = std::max(grad_err,
                            std::abs((log_normalizer(up) - log_normalizer(dn)) / (2 * hg) - ex[w]));
      }
      const Eigen::MatrixXd H = dense_hessian(row);
      const double hh = 1e-4;
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          auto f = [&](double di, double dj) {
            RowVector r = row;
            r[i] += di;
            r[j] += dj;
            return log_normalizer(r);
          };
          const double fd = (f(hh, hh) - f(hh, -hh) - f(-hh, hh) + f(-hh, -hh)) / (4 * hh * hh);
          hess_err = std::max(hess_err, std::abs(fd - H(i, j)));
        }
      }
      RowVector v(n);
      for (auto& x : v) x = gauss(rng);
      const Eigen::MatrixXd Href = testsupport::hessian_ref(row);
      const RowVector x = hessian_inverse_apply(RowRef(row), RowRef(v));
      inv_err = std::max(inv_err, (Href * x.transpose() - v.transpose()).norm() / v.norm());
    }
  }
  const double secs = seconds_since(t0);
  report(4, grad_err <= 1e-5 && hess_err <= 1e-4 && inv_err <= 1e-6 && secs < 10.0,
         "V in {2,5,50} x 100 rows: gradient " + fmt(grad_err) + " (tol 1e-5), Hessian " +
             fmt(hess_err) + " (tol 1e-4), inverse rel " + fmt(inv_err) + " (tol 1e-6), " +
             fmt(secs) + " s (limit 10 s)");
}

double final_perplexity(const Metrics& m, std::size_t round, std::size_t node) {
  for (const auto& r : m.perplexity) {
    if (r.round == round && r.node == node) return r.perplexity;
  }
  throw std::runtime_error("missing perplexity row");
}

void criterion5() {
  const auto t0 = Clock::now();
  ExperimentSpec spec;  // V=50, K_true=5, D=2000, length 80, star:4, disjoint, shared init
  spec.graph = "star:4";
  spec.data_mode = StreamMode::kDisjoint;
  spec.init = InitPolicy::kSharedSeed;
  spec.rounds = 200;
  spec.eval_every = 1;
  spec.admm.batch_size = 16;
  const auto run = run_experiment(spec);
  const double secs = seconds_since(t0);

  // Calibration references: a single learner on the full training corpus and
  // the perplexity of the generating topics.
  ExperimentSpec solo = spec;
  solo.mode = Mode::kCentralized;
  solo.nodes = 1;
  solo.eval_every = 200;
  const auto single = run_experiment(solo);
  const auto data = load_experiment_corpus(spec);
  LdaHyper eval = spec.hyper;
  eval.corpus_size_hint = data.train.size();
  const double truth_ppl =
      held_out_perplexity(TopicMatrix(data.true_topics->array() * 1e4 + 1e-6), data.heldout.docs,
                          eval, spec.split_seed)
          .perplexity;
  std::cout << "  calibration: single learner, full corpus: final perplexity "
            << fmt(final_perplexity(single.metrics, 200, 0)) << ", truth Pearson "
            << fmt(match_topics(*single.true_topics, single.learners[0].lambda).mean_score())
            << "; true-topic perplexity " << fmt(truth_ppl) << "\n";

  bool drop_ok = true;
  std::string drops;
  double truth_sum = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    const double first = final_perplexity(run.metrics, 1, k);
    const double last = final_perplexity(run.metrics, 200, k);
    drop_ok &= last <= 0.8 * first;
    drops += (k ? ", " : "") + std::string("node ") + std::to_string(k) + " " + fmt(first) + " -> " +
             fmt(last) + " (ratio " + fmt(last / first) + ")";
    truth_sum += match_topics(*run.true_topics, run.learners[k].lambda).mean_score();
  }
  const double truth = truth_sum / 4.0;
  const double dis = run.metrics.disagreement.back().value;
  report(5, drop_ok && truth >= 0.9 && dis <= 0.05 && secs <= 300.0,
         std::string("(a) ") + (drop_ok ? "ok" : "FAIL") + " round-1 -> final: " + drops +
             " (need ratio <= 0.8); (b) mean truth Pearson " + fmt(truth) +
             " (need >= 0.9); (c) disagreement " + fmt(dis) + " (need <= 0.05); " + fmt(secs) +
             " s (limit 300 s)");
}

void criterion6() {
  std::vector<double> net, iso;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    ExperimentSpec spec = make_preset("indep-vs-net5");
    spec.synthetic.seed = s;
    spec.init_seed = 7 * s + 1;
    spec.stream_seed = 7 * s + 2;
    spec.eval_every = spec.rounds;
    spec.admm.workers = 4;
    const auto run = run_experiment(spec);
    std::vector<double> seed_net;
    for (std::size_t k = 1; k <= 4; ++k) seed_net.push_back(final_perplexity(run.metrics, spec.rounds, k));
    const double seed_iso = final_perplexity(run.metrics, spec.rounds, 5);
    std::sort(seed_net.begin(), seed_net.end());
    std::cout << "  seed " << s << ": networked " << fmt(seed_net[0]) << " " << fmt(seed_net[1]) << " "
              << fmt(seed_net[2]) << " " << fmt(seed_net[3]) << " | isolated partition "
              << fmt(seed_iso) << " | isolated full " << fmt(final_perplexity(run.metrics, spec.rounds, 0))
              << "\n";
    net.insert(net.end(), seed_net.begin(), seed_net.end());
    iso.push_back(seed_iso);
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  const double mn = median(net), mi = median(iso);
  report(6, mn < mi,
         "indep-vs-net5 over 5 seeds: median final perplexity networked " + fmt(mn) +
             " vs isolated partition " + fmt(mi) + " (need networked < isolated)");
}

void criterion7() {
  SyntheticParams p;
  p.vocab_size = 30;
  p.num_topics = 4;
  p.num_docs = 300;
  p.seed = 12;
  const auto synth = generate_synthetic(p);
  ExperimentSpec spec;
  spec.hyper.num_topics = 4;
  LdaModel model(LdaHyper{4, 0.2, 0.01, 300}, 30, {}, spec.curvature);
  AdmmConfig cfg = desk_admm();
  cfg.batch_size = 8;
  const Graph g = Graph::complete(4);
  std::vector<LearnerState> states;
  for (std::size_t k = 0; k < 4; ++k) states.push_back(make_learner(k, initial_lambda(spec, 30, k)));
  const auto stream = MinibatchStream::shared(synth.corpus, 4, cfg.batch_size, 3);
  bool same = true;
  std::size_t first_bad = 0;
  for (std::uint64_t t = 0; t < 50; ++t) {
    networked_round(states, g, stream.next_batches(t), model, cfg, t);
    for (std::size_t k = 1; k < 4; ++k) {
      const bool ok = bit_equal(states[k].lambda, states[0].lambda) &&
                      bit_equal(states[k].multiplier, states[0].multiplier);
      if (!ok && same) first_bad = t + 1;
      same &= ok;
    }
  }
  report(7, same, std::string("full:4, shared data, shared init, 50 rounds: ") +
                      (same ? "all states bit-identical every round"
                            : "divergence at round " + std::to_string(first_bad)));
}

void criterion8() {
  const Graph g = Graph::load(std::string(NSVI_PRESET_DIR) + "/example_graph_8.txt");
  const bool graph_ok = g.num_nodes() == 8 && g.num_edges() == 8 &&
                        g.neighbors(4) == std::vector<std::size_t>{2, 3, 5, 6};
  const auto preset = make_preset("four-fully-connected");
  const bool preset_ok = preset.admm.batch_size == 64 && preset.hyper.num_topics == 100 &&
                         preset.admm.penalty == 5e-8;
  std::ostringstream nb;
  for (auto l : g.neighbors(4)) nb << l << " ";
  report(8, graph_ok && preset_ok,
         "graph file: " + std::to_string(g.num_nodes()) + " nodes, " + std::to_string(g.num_edges()) +
             " edges, B_4 = { " + nb.str() + "}; four-fully-connected: batch " +
             std::to_string(preset.admm.batch_size) + ", topics " +
             std::to_string(preset.hyper.num_topics) + ", c = " + fmt(preset.admm.penalty));
}

}  // namespace

int main() {
  const std::pair<int, void (*)()> all[] = {{1, criterion1}, {2, criterion2}, {3, criterion3},
                                            {4, criterion4}, {5, criterion5}, {6, criterion6},
                                            {7, criterion7}, {8, criterion8}};
  for (const auto& [id, fn] : all) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, false, std::string("exception: ") + e.what());
    }
  }
  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " criterion(s) failed"
                         : std::string("acceptance: all criteria passed"))
            << std::endl;
  return failures ? 1 : 0;
}
