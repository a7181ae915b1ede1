#pragma once

// Consensus steppers for stochastic variational inference across learners:
//  * centralized SVI (one learner, reference baseline),
//  * distributed ADMM against a central collector zeta,
//  * networked ADMM over an undirected graph, plus the unsimplified
//    per-edge iteration used as a test oracle.
//
// Every round is synchronous. All learners read the round-start snapshot,
// update their lambda, and only then are the multipliers advanced.

#include <cstdint>
#include <vector>

#include "nsvi/corpus.hpp"
#include "nsvi/expfam.hpp"
#include "nsvi/graph.hpp"
#include "nsvi/model.hpp"

namespace nsvi {

enum class Mode { kCentralized, kDistributed, kNetworked };

const char* to_string(Mode mode);
Mode parse_mode(const std::string& text);

struct AdmmConfig {
  double penalty = 1e-2;  // c
  double tau0 = 1.0;
  double kappa = 0.7;
  std::size_t batch_size = 16;
  double projection_floor = 1e-8;
  Mode mode = Mode::kNetworked;
  std::size_t workers = 1;  // per-node parallelism; results do not depend on it

  void validate() const;
};

// (tau0 + t)^(-kappa).
double step_size(std::uint64_t t, double tau0, double kappa);

struct LearnerState {
  std::size_t node_id = 0;
  TopicMatrix lambda;
  TopicMatrix multiplier;  // y_k, same shape as lambda, any sign
  std::uint64_t rng_stream_seed = 0;
};

// Fresh learner with the given lambda and a zero multiplier.
LearnerState make_learner(std::size_t node_id, TopicMatrix lambda,
                          std::uint64_t rng_stream_seed = 0);

// Central collector for the distributed mode. The per-learner multipliers
// live in LearnerState::multiplier.
struct CollectorState {
  TopicMatrix zeta;
};

// zeta^0 = (1/K) sum_k (lambda_k + y_k / c).
CollectorState make_collector(const std::vector<LearnerState>& states, double c);

// lambda <- max(floor, lambda - rho * grad), throws NumericError on
// non-finite results.
TopicMatrix projected_step(const TopicMatrix& lambda, const TopicMatrix& grad,
                           double rho, double floor);

LearnerState centralized_step(const LearnerState& state, const Batch& batch,
                              const ModelContract& model, const AdmmConfig& cfg,
                              std::uint64_t t);

// Natural gradient of the augmented Lagrangian against the collector:
//   (lambda - lambda_hat) + H^{-1} (y + c (lambda - zeta)),
// H the log-normalizer Hessian at lambda, applied row by row.
TopicMatrix distributed_lambda_grad(const TopicMatrix& lambda,
                                    const TopicMatrix& lambda_hat,
                                    const TopicMatrix& y,
                                    const TopicMatrix& zeta, double c,
                                    const ModelContract& model);

void distributed_round(std::vector<LearnerState>& states,
                       CollectorState& collector,
                       const std::vector<Batch>& batches,
                       const ModelContract& model, const AdmmConfig& cfg,
                       std::uint64_t t);

// Networked counterpart:
//   (lambda_k - lambda_hat) + H^{-1} (y_k + c sum_{l in B_k} (lambda_k - lambda_l)).
TopicMatrix networked_lambda_grad(const LearnerState& state,
                                  const std::vector<const TopicMatrix*>& neighbor_lambdas,
                                  const TopicMatrix& lambda_hat, double c,
                                  const ModelContract& model);

void networked_round(std::vector<LearnerState>& states, const Graph& graph,
                     const std::vector<Batch>& batches,
                     const ModelContract& model, const AdmmConfig& cfg,
                     std::uint64_t t);

// Per directed edge (k, l), l in B_k: the redundant consensus variable
// zeta_kl and the multipliers of lambda_k = zeta_kl (y1) and
// zeta_kl = lambda_l (y2).
class FullNetState {
 public:
  struct EdgeVars {
    TopicMatrix zeta;
    TopicMatrix y1;
    TopicMatrix y2;
  };

  // Zero multipliers, zeta_kl = (lambda_k + lambda_l) / 2.
  FullNetState(const Graph& graph, const std::vector<TopicMatrix>& lambdas);

  const EdgeVars& edge(std::size_t k, std::size_t l) const;
  EdgeVars& edge(std::size_t k, std::size_t l);
  // 2 sum_{l in B_k} y_kl1, the simplified per-node multiplier.
  TopicMatrix node_multiplier(std::size_t k) const;

  const Graph& graph() const { return *graph_; }

 private:
  std::size_t index(std::size_t k, std::size_t l) const;

  const Graph* graph_;
  std::vector<std::size_t> offsets_;  // directed edge storage per node
  std::vector<EdgeVars> edges_;
};

// One round of the unsimplified per-edge iteration: an inexact lambda step on
// the edge-split augmented Lagrangian, the closed-form zeta_kl update, then
// both multiplier updates. Testing oracle only.
void full_network_oracle_round(FullNetState& state,
                               std::vector<TopicMatrix>& lambdas,
                               const std::vector<Batch>& batches,
                               const ModelContract& model, const AdmmConfig& cfg,
                               std::uint64_t t);

// max_k ||lambda_k - mean||_F / ||mean||_F.
double disagreement(const std::vector<LearnerState>& states);
double disagreement(const std::vector<const TopicMatrix*>& lambdas);

}  // namespace nsvi
