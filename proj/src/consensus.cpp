#include "nsvi/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

namespace nsvi {

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
// processed by exactly one thread, so per-index results never depend on the
// schedule.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < n; i += workers) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void check_shape(const TopicMatrix& a, const TopicMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream msg;
    msg << what << ": shape mismatch (" << a.rows() << "x" << a.cols() << " vs "
        << b.rows() << "x" << b.cols() << ")";
    throw DataError(msg.str());
  }
}

[[noreturn]] void rethrow_for_node(const Error& e, std::size_t node,
                                   std::uint64_t t) {
  const std::string where =
      "round " + std::to_string(t) + ", node " + std::to_string(node) + ": ";
  if (dynamic_cast<const ConditioningError*>(&e)) throw ConditioningError(where + e.what());
  if (dynamic_cast<const NumericError*>(&e)) throw NumericError(where + e.what());
  if (dynamic_cast<const UsageError*>(&e)) throw UsageError(where + e.what());
  throw DataError(where + e.what());
}

template <typename Fn>
void for_each_node(std::size_t n, std::size_t workers, std::uint64_t t, Fn&& fn) {
  parallel_for(n, workers, [&](std::size_t k) {
    try {
      fn(k);
    } catch (const Error& e) {
      rethrow_for_node(e, k, t);
    }
  });
}

}  // namespace

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::kCentralized: return "centralized";
    case Mode::kDistributed: return "distributed";
    case Mode::kNetworked: return "networked";
  }
  return "?";
}

Mode parse_mode(const std::string& text) {
  if (text == "centralized") return Mode::kCentralized;
  if (text == "distributed") return Mode::kDistributed;
  if (text == "networked") return Mode::kNetworked;
  throw UsageError("unknown mode '" + text +
                   "' (expected centralized, distributed or networked)");
}

void AdmmConfig::validate() const {
  if (mode != Mode::kCentralized && !(penalty > 0.0)) {
    throw UsageError("ADMM penalty c must be positive");
  }
  if (!(tau0 >= 0.0)) throw UsageError("tau0 must be non-negative");
  if (!(kappa > 0.5 && kappa <= 1.0)) throw UsageError("kappa must lie in (0.5, 1]");
  if (batch_size == 0) throw UsageError("batch size must be positive");
  if (!(projection_floor > 0.0)) throw UsageError("projection floor must be positive");
}

double step_size(std::uint64_t t, double tau0, double kappa) {
  return std::pow(tau0 + static_cast<double>(t), -kappa);
}

LearnerState make_learner(std::size_t node_id, TopicMatrix lambda,
                          std::uint64_t rng_stream_seed) {
  LearnerState s;
  s.node_id = node_id;
  s.multiplier = TopicMatrix::Zero(lambda.rows(), lambda.cols());
  s.lambda = std::move(lambda);
  s.rng_stream_seed = rng_stream_seed;
  return s;
}

CollectorState make_collector(const std::vector<LearnerState>& states, double c) {
  if (states.empty()) throw UsageError("collector needs at least one learner");
  CollectorState out;
  out.zeta = TopicMatrix::Zero(states[0].lambda.rows(), states[0].lambda.cols());
  for (const auto& s : states) out.zeta += s.lambda + s.multiplier / c;
  out.zeta /= static_cast<double>(states.size());
  return out;
}

TopicMatrix projected_step(const TopicMatrix& lambda, const TopicMatrix& grad,
                           double rho, double floor) {
  check_shape(lambda, grad, "projected_step");
  TopicMatrix next = lambda - rho * grad;
  if (!next.allFinite()) throw NumericError("lambda update produced non-finite values");
  return next.cwiseMax(floor);
}

LearnerState centralized_step(const LearnerState& state, const Batch& batch,
                              const ModelContract& model, const AdmmConfig& cfg,
                              std::uint64_t t) {
  const TopicMatrix hat = model.lambda_hat(batch, state.lambda, cfg.batch_size);
  LearnerState next = state;
  next.lambda = projected_step(state.lambda, natural_gradient_g(state.lambda, hat),
                               step_size(t, cfg.tau0, cfg.kappa),
                               cfg.projection_floor);
  return next;
}

TopicMatrix distributed_lambda_grad(const TopicMatrix& lambda,
                                    const TopicMatrix& lambda_hat,
                                    const TopicMatrix& y,
                                    const TopicMatrix& zeta, double c,
                                    const ModelContract& model) {
  check_shape(lambda, lambda_hat, "distributed_lambda_grad");
  check_shape(lambda, y, "distributed_lambda_grad");
  check_shape(lambda, zeta, "distributed_lambda_grad");
  const TopicMatrix penalty = y + c * (lambda - zeta);
  return natural_gradient_g(lambda, lambda_hat) +
         model.hessian_inverse_apply(lambda, penalty);
}

void distributed_round(std::vector<LearnerState>& states,
                       CollectorState& collector,
                       const std::vector<Batch>& batches,
                       const ModelContract& model, const AdmmConfig& cfg,
                       std::uint64_t t) {
  const std::size_t k_count = states.size();
  if (batches.size() != k_count) throw UsageError("distributed_round: one batch per learner required");
  if (k_count == 0) throw UsageError("distributed_round: no learners");
  const double rho = step_size(t, cfg.tau0, cfg.kappa);
  const double c = cfg.penalty;

  std::vector<TopicMatrix> next(k_count);
  for_each_node(k_count, cfg.workers, t, [&](std::size_t k) {
    const auto& s = states[k];
    const TopicMatrix hat = model.lambda_hat(batches[k], s.lambda, cfg.batch_size);
    const TopicMatrix grad =
        distributed_lambda_grad(s.lambda, hat, s.multiplier, collector.zeta, c, model);
    next[k] = projected_step(s.lambda, grad, rho, cfg.projection_floor);
  });

  TopicMatrix zeta = TopicMatrix::Zero(collector.zeta.rows(), collector.zeta.cols());
  for (std::size_t k = 0; k < k_count; ++k) {
    zeta += next[k] + states[k].multiplier / c;
  }
  zeta /= static_cast<double>(k_count);

  for (std::size_t k = 0; k < k_count; ++k) {
    states[k].lambda = std::move(next[k]);
    states[k].multiplier += c * (states[k].lambda - zeta);
  }
  collector.zeta = std::move(zeta);
}

TopicMatrix networked_lambda_grad(const LearnerState& state,
                                  const std::vector<const TopicMatrix*>& neighbor_lambdas,
                                  const TopicMatrix& lambda_hat, double c,
                                  const ModelContract& model) {
  check_shape(state.lambda, lambda_hat, "networked_lambda_grad");
  check_shape(state.lambda, state.multiplier, "networked_lambda_grad");
  TopicMatrix spread = TopicMatrix::Zero(state.lambda.rows(), state.lambda.cols());
  for (const TopicMatrix* other : neighbor_lambdas) {
    check_shape(state.lambda, *other, "networked_lambda_grad");
    spread += state.lambda - *other;
  }
  const TopicMatrix penalty = state.multiplier + c * spread;
  return natural_gradient_g(state.lambda, lambda_hat) +
         model.hessian_inverse_apply(state.lambda, penalty);
}

void networked_round(std::vector<LearnerState>& states, const Graph& graph,
                     const std::vector<Batch>& batches,
                     const ModelContract& model, const AdmmConfig& cfg,
                     std::uint64_t t) {
  const std::size_t k_count = states.size();
  if (graph.num_nodes() != k_count) {
    throw UsageError("networked_round: graph has " + std::to_string(graph.num_nodes()) +
                     " nodes but " + std::to_string(k_count) + " learners were given");
  }
  if (batches.size() != k_count) throw UsageError("networked_round: one batch per node required");
  const double rho = step_size(t, cfg.tau0, cfg.kappa);
  const double c = cfg.penalty;

  // Phase 1: gradients from the round-start snapshot.
  std::vector<TopicMatrix> next(k_count);
  for_each_node(k_count, cfg.workers, t, [&](std::size_t k) {
    std::vector<const TopicMatrix*> nb;
    for (auto l : graph.neighbors(k)) nb.push_back(&states[l].lambda);
    const TopicMatrix hat = model.lambda_hat(batches[k], states[k].lambda, cfg.batch_size);
    const TopicMatrix grad = networked_lambda_grad(states[k], nb, hat, c, model);
    next[k] = projected_step(states[k].lambda, grad, rho, cfg.projection_floor);
  });
  for (std::size_t k = 0; k < k_count; ++k) states[k].lambda = std::move(next[k]);

  // Phase 2: multipliers from the new lambdas.
  for (std::size_t k = 0; k < k_count; ++k) {
    TopicMatrix spread = TopicMatrix::Zero(states[k].lambda.rows(), states[k].lambda.cols());
    for (auto l : graph.neighbors(k)) spread += states[k].lambda - states[l].lambda;
    states[k].multiplier += c * spread;
  }
}

FullNetState::FullNetState(const Graph& graph, const std::vector<TopicMatrix>& lambdas)
    : graph_(&graph) {
  if (lambdas.size() != graph.num_nodes()) {
    throw UsageError("FullNetState: one lambda per node required");
  }
  offsets_.assign(graph.num_nodes() + 1, 0);
  for (std::size_t k = 0; k < graph.num_nodes(); ++k) {
    offsets_[k + 1] = offsets_[k] + graph.neighbors(k).size();
  }
  edges_.resize(offsets_.back());
  for (std::size_t k = 0; k < graph.num_nodes(); ++k) {
    for (auto l : graph.neighbors(k)) {
      auto& e = edges_[index(k, l)];
      e.zeta = 0.5 * (lambdas[k] + lambdas[l]);
      e.y1 = TopicMatrix::Zero(lambdas[k].rows(), lambdas[k].cols());
      e.y2 = e.y1;
    }
  }
}

std::size_t FullNetState::index(std::size_t k, std::size_t l) const {
  const auto& nb = graph_->neighbors(k);
  const auto it = std::lower_bound(nb.begin(), nb.end(), l);
  if (it == nb.end() || *it != l) {
    throw UsageError("FullNetState: " + std::to_string(l) + " is not a neighbor of " +
                     std::to_string(k));
  }
  return offsets_[k] + static_cast<std::size_t>(it - nb.begin());
}

const FullNetState::EdgeVars& FullNetState::edge(std::size_t k, std::size_t l) const {
  return edges_[index(k, l)];
}

FullNetState::EdgeVars& FullNetState::edge(std::size_t k, std::size_t l) {
  return edges_[index(k, l)];
}

TopicMatrix FullNetState::node_multiplier(std::size_t k) const {
  const auto& nb = graph_->neighbors(k);
  TopicMatrix out = TopicMatrix::Zero(edges_[offsets_[k]].y1.rows(), edges_[offsets_[k]].y1.cols());
  for (auto l : nb) out += edge(k, l).y1;
  return 2.0 * out;
}

void full_network_oracle_round(FullNetState& state,
                               std::vector<TopicMatrix>& lambdas,
                               const std::vector<Batch>& batches,
                               const ModelContract& model, const AdmmConfig& cfg,
                               std::uint64_t t) {
  const Graph& graph = state.graph();
  const std::size_t k_count = graph.num_nodes();
  if (lambdas.size() != k_count || batches.size() != k_count) {
    throw UsageError("full_network_oracle_round: one lambda and batch per node required");
  }
  const double rho = step_size(t, cfg.tau0, cfg.kappa);
  const double c = cfg.penalty;

  // Inexact lambda minimization: one projected natural-gradient step on
  //   g_k + lambda_k^T sum_l (y_kl1 - y_lk2)
  //       + c/2 sum_l (|lambda_k - zeta_kl|^2 + |zeta_lk - lambda_k|^2).
  std::vector<TopicMatrix> next(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    const TopicMatrix& lam = lambdas[k];
    TopicMatrix linear = TopicMatrix::Zero(lam.rows(), lam.cols());
    TopicMatrix quad = TopicMatrix::Zero(lam.rows(), lam.cols());
    for (auto l : graph.neighbors(k)) {
      linear += state.edge(k, l).y1 - state.edge(l, k).y2;
      quad += (lam - state.edge(k, l).zeta) + (lam - state.edge(l, k).zeta);
    }
    const TopicMatrix hat = model.lambda_hat(batches[k], lam, cfg.batch_size);
    const TopicMatrix grad =
        natural_gradient_g(lam, hat) +
        model.hessian_inverse_apply(lam, TopicMatrix(linear + c * quad));
    next[k] = projected_step(lam, grad, rho, cfg.projection_floor);
  }
  lambdas = std::move(next);

  // Closed-form zeta_kl minimizer, then the two dual ascent steps.
  for (std::size_t k = 0; k < k_count; ++k) {
    for (auto l : graph.neighbors(k)) {
      auto& e = state.edge(k, l);
      e.zeta = (e.y1 - e.y2) / (2.0 * c) + 0.5 * (lambdas[k] + lambdas[l]);
      e.y1 += c * (lambdas[k] - e.zeta);
      e.y2 += c * (e.zeta - lambdas[l]);
    }
  }
}

double disagreement(const std::vector<const TopicMatrix*>& lambdas) {
  if (lambdas.empty()) throw UsageError("disagreement needs at least one learner");
  TopicMatrix mean = TopicMatrix::Zero(lambdas[0]->rows(), lambdas[0]->cols());
  for (const auto* l : lambdas) {
    check_shape(mean, *l, "disagreement");
    mean += *l;
  }
  mean /= static_cast<double>(lambdas.size());
  const double scale = mean.norm();
  double worst = 0.0;
  for (const auto* l : lambdas) worst = std::max(worst, (*l - mean).norm());
  if (worst == 0.0) return 0.0;
  return worst / scale;
}

double disagreement(const std::vector<LearnerState>& states) {
  std::vector<const TopicMatrix*> ptrs;
  for (const auto& s : states) ptrs.push_back(&s.lambda);
  return disagreement(ptrs);
}

}  // namespace nsvi
