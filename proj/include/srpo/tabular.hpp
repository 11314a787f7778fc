#pragma once

// Per-state objectives over a K-way softmax, expressed directly in logits.
// The network losses in optim.hpp backpropagate these logit gradients; the
// theorem-verification suites optimize logits tables with them directly.

#include <span>
#include <vector>

namespace srpo::tabular {

struct StateLoss {
  double loss = 0;
  std::vector<double> d_logits;
  double kl = 0;       // KL(pi_theta || pi_ref)
  double entropy = 0;  // H(pi_theta)
};

std::vector<double> log_softmax(std::span<const double> logits);
std::vector<double> softmax(std::span<const double> logits);

// -( A . log pi - beta KL(pi || ref) + lambda H(pi) ) and its logit gradient.
StateLoss softrankpo(std::span<const double> logits, std::span<const double> ref_log_probs,
                     std::span<const double> advantages, double beta, double lambda);

// (1/K) sum_i (R_theta(a_i) - mean R_theta - A_i)^2 with
// R_theta = beta (log pi - log ref), and its logit gradient.
StateLoss rank_matching(std::span<const double> logits, std::span<const double> ref_log_probs,
                        std::span<const double> advantages, double beta);

// Additive split of rank_matching: advantage weighting, log-prob variance,
// and log-prob/reference covariance. Their sum differs from rank_matching
// by a term that does not depend on the logits.
struct Decomposition {
  double advantage = 0;
  double variance = 0;
  double covariance = 0;
};
Decomposition decompose(std::span<const double> logits, std::span<const double> ref_log_probs,
                        std::span<const double> advantages, double beta);

// pi*(a) proportional to ref(a) exp(A(a) / beta).
std::vector<double> kl_optimal_policy(std::span<const double> ref_probs,
                                      std::span<const double> advantages, double beta);

double total_variation(std::span<const double> p, std::span<const double> q);
double kl_divergence(std::span<const double> p, std::span<const double> q);

}  // namespace srpo::tabular
