#pragma once

#include <optional>
#include <span>
#include <vector>

#include "srpo/policy.hpp"
#include "srpo/softrank.hpp"

namespace srpo {

enum class Schedule { Constant, InvSqrt };
enum class UpdaterKind { Sgd, Adam };

// Loss the offline trainer minimizes. KlRegularized is the negated
// advantage-weighted log-likelihood with KL and entropy terms; it is
// unbounded below in the logits (the advantage term is linear in them), so
// long runs drift toward degenerate policies. RankMatching regresses the
// centered implicit reward onto the advantages and has the bounded minimizer
// pi_ref * exp(A / beta); it ignores lambda.
enum class Objective { RankMatching, KlRegularized };

struct OptimConfig {
  double beta = 0.1;     // KL coefficient
  double lambda = 0.01;  // entropy coefficient
  double lr = 3e-4;
  Schedule schedule = Schedule::Constant;
  UpdaterKind updater = UpdaterKind::Adam;
  double clip_ratio = 0.2;
  double value_coef = 0.5;
  Objective objective = Objective::RankMatching;
  SoftRankConfig softrank;
  // Standard-deviation stabilizer of the z-score baseline.
  double grpo_epsilon = 1e-4;

  void validate() const;
};

// One offline state: observation, per-action rewards and the advantages
// shaped from them.
struct TrainItem {
  Observation obs;
  std::vector<double> rewards;
  std::vector<double> advantages;
};

struct LabeledItem {
  Observation obs;
  Action label = Action::Persist;
};

struct PpoItem {
  Observation obs;
  Action action = Action::Persist;
  std::optional<double> old_log_prob;
  double ret = 0;
  double advantage = 0;
};

struct BatchResult {
  double loss = 0;
  std::vector<double> grad;
  double kl = 0;       // batch mean of KL(pi_theta || pi_ref)
  double entropy = 0;  // batch mean of H(pi_theta)
  // Trace of the empirical covariance of per-item gradients (zero unless
  // requested).
  double grad_variance = 0;
};

struct PpoResult {
  double loss = 0;
  std::vector<double> policy_grad;
  std::vector<double> value_grad;
  double clip_fraction = 0;
};

// Linear value baseline on the encoded observation: 2 * d_model weights
// followed by a bias.
std::vector<double> make_value_params(const PolicyDims& dims);
double value_estimate(const Observation& obs, const PolicyParams& params, std::span<const double> value_params);

// beta * (log pi_theta(a|o) - log pi_ref(a|o)), from log-softmax of logits.
double implicit_kl_reward(const PolicyParams& params, const PolicyParams& ref_params, const Observation& obs,
                          Action action, double beta);

// Negated KL-regularized objective averaged over the batch, with its exact
// gradient.
BatchResult softrankpo_loss_and_grad(std::span<const TrainItem> batch, const PolicyParams& params,
                                     const PolicyParams& ref_params, const OptimConfig& cfg,
                                     bool with_variance = false);

double rank_matching_loss(std::span<const TrainItem> batch, const PolicyParams& params,
                          const PolicyParams& ref_params, const OptimConfig& cfg);
BatchResult rank_matching_loss_and_grad(std::span<const TrainItem> batch, const PolicyParams& params,
                                        const PolicyParams& ref_params, const OptimConfig& cfg,
                                        bool with_variance = false);

// Dispatches on cfg.objective.
BatchResult objective_loss_and_grad(std::span<const TrainItem> batch, const PolicyParams& params,
                                    const PolicyParams& ref_params, const OptimConfig& cfg,
                                    bool with_variance = false);

struct TripleTerms {
  double advantage = 0;
  double variance = 0;
  double covariance = 0;
  double sum() const { return advantage + variance + covariance; }
};
// Diagnostic split of the rank-matching loss (entropy coefficient ignored).
TripleTerms triple_decomposition(std::span<const TrainItem> batch, const PolicyParams& params,
                                 const PolicyParams& ref_params, const OptimConfig& cfg);

// Per-state z-score: (R - mean) / (population std + epsilon); all-equal
// input gives zeros.
AdvantageVector grpo_advantages(std::span<const double> rewards, double epsilon = 1e-4);

// Clipped-ratio surrogate plus squared-error value baseline. Items must carry
// the behaviour policy's log-probabilities.
PpoResult ppo_loss_and_grad(std::span<const PpoItem> batch, const PolicyParams& params,
                            std::span<const double> value_params, const OptimConfig& cfg);

// Fills in old_log_prob from the given parameters.
void attach_old_log_probs(std::span<PpoItem> batch, const PolicyParams& old_params);

// Mean cross-entropy -log pi(label | obs) and its gradient.
BatchResult sft_loss_and_grad(std::span<const LabeledItem> batch, const PolicyParams& params);

struct UpdaterState {
  std::vector<double> m, v;
  long step = 0;
};

double learning_rate(const OptimConfig& cfg, long step);

// One SGD or Adam (0.9 / 0.999 / 1e-8) step; advances state.step.
// Throws NumericError naming the first non-finite gradient entry.
void update_step(std::span<double> params, std::span<const double> grads, const OptimConfig& cfg,
                 UpdaterState& state);

struct StepMetrics {
  long step = 0;
  double loss = 0;
  double kl = 0;
  double entropy = 0;
  double grad_norm = 0;
  double grad_variance = 0;
};

double l2_norm(std::span<const double> v);

}  // namespace srpo
