#include "srpo/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "srpo/error.hpp"

namespace srpo::tabular {
namespace {

void check_sizes(std::span<const double> logits, std::span<const double> ref,
                 std::span<const double> adv) {
  if (logits.size() != ref.size() || logits.size() != adv.size() || logits.size() < 2)
    throw InvalidBatch("advantage/action length mismatch");
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::vector<double> log_softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0;
  for (double z : logits) s += std::exp(z - m);
  const double lse = m + std::log(s);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  auto out = log_softmax(logits);
  for (double& x : out) x = std::exp(x);
  return out;
}

StateLoss softrankpo(std::span<const double> logits, std::span<const double> ref_log_probs,
                     std::span<const double> advantages, double beta, double lambda) {
  check_sizes(logits, ref_log_probs, advantages);
  const std::size_t k = logits.size();
  const auto lp = log_softmax(logits);

  StateLoss out;
  double adv_term = 0, adv_sum = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double p = std::exp(lp[i]);
    adv_term += advantages[i] * lp[i];
    adv_sum += advantages[i];
    out.kl += p * (lp[i] - ref_log_probs[i]);
    out.entropy -= p * lp[i];
  }
  out.loss = -(adv_term - beta * out.kl + lambda * out.entropy);

  out.d_logits.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double p = std::exp(lp[i]);
    const double d_adv = advantages[i] - p * adv_sum;
    const double d_kl = p * (lp[i] - ref_log_probs[i] - out.kl);
    const double d_ent = -p * (lp[i] + out.entropy);
    out.d_logits[i] = -(d_adv - beta * d_kl + lambda * d_ent);
  }
  return out;
}

StateLoss rank_matching(std::span<const double> logits, std::span<const double> ref_log_probs,
                        std::span<const double> advantages, double beta) {
  check_sizes(logits, ref_log_probs, advantages);
  const std::size_t k = logits.size();
  const double kd = static_cast<double>(k);
  const auto lp = log_softmax(logits);

  std::vector<double> implicit(k);
  for (std::size_t i = 0; i < k; ++i) implicit[i] = beta * (lp[i] - ref_log_probs[i]);
  const double implicit_mean = mean(implicit);

  StateLoss out;
  std::vector<double> residual(k);
  for (std::size_t i = 0; i < k; ++i) {
    residual[i] = implicit[i] - implicit_mean - advantages[i];
    out.loss += residual[i] * residual[i] / kd;
  }
  // Centering removes the log-partition term, so d(R_theta_i - mean)/dz_j =
  // beta (delta_ij - 1/K).
  const double residual_mean = mean(residual);
  out.d_logits.resize(k);
  for (std::size_t j = 0; j < k; ++j) out.d_logits[j] = 2.0 * beta / kd * (residual[j] - residual_mean);

  for (std::size_t i = 0; i < k; ++i) {
    const double p = std::exp(lp[i]);
    out.kl += p * (lp[i] - ref_log_probs[i]);
    out.entropy -= p * lp[i];
  }
  return out;
}

Decomposition decompose(std::span<const double> logits, std::span<const double> ref_log_probs,
                        std::span<const double> advantages, double beta) {
  check_sizes(logits, ref_log_probs, advantages);
  const double kd = static_cast<double>(logits.size());
  const auto lp = log_softmax(logits);
  const double lp_mean = mean(lp);
  const double ref_mean = mean(ref_log_probs);

  double weighted = 0, var = 0, cov = 0;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    weighted += advantages[i] * lp[i];
    var += (lp[i] - lp_mean) * (lp[i] - lp_mean);
    cov += (lp[i] - lp_mean) * (ref_log_probs[i] - ref_mean);
  }
  Decomposition d;
  d.advantage = -2.0 * beta * weighted / kd;
  d.variance = beta * beta * var / kd;
  d.covariance = -2.0 * beta * beta * cov / kd;
  return d;
}

std::vector<double> kl_optimal_policy(std::span<const double> ref_probs,
                                      std::span<const double> advantages, double beta) {
  if (ref_probs.size() != advantages.size()) throw InvalidBatch("kl_optimal_policy: length mismatch");
  std::vector<double> logits(ref_probs.size());
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = std::log(ref_probs[i]) + advantages[i] / beta;
  return softmax(logits);
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0) s += p[i] * (std::log(p[i]) - std::log(q[i]));
  return s;
}

}  // namespace srpo::tabular
