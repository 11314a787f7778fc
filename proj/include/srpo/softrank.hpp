#pragma once

#include <span>
#include <vector>

namespace srpo {

// Rewards over K >= 2 candidate actions of one state. Construction
// validates length and finiteness.
class RewardVector {
 public:
  explicit RewardVector(std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  std::vector<double> values_;
};

struct AdvantageVector {
  std::vector<double> values;
  // Set when every input reward was equal; values are then all zero.
  bool degenerate = false;
};

struct SoftRankConfig {
  double tau = 0.5;
  // Added to the standard deviation before dividing. Kept far below the
  // smallest non-degenerate spread so the output variance stays unit to
  // within 1e-9.
  double epsilon = 1e-12;

  void validate() const;
};

// 0-based midranks; ties share the average of the positions they occupy.
// Throws InvalidInput on non-finite entries.
std::vector<double> rank(std::span<const double> values);

double normal_cdf(double x);

// Inverse standard normal CDF for p in (0, 1); throws DomainError otherwise.
// Rational approximation followed by a Halley step, |Phi(x) - p| <= 1e-10.
double inverse_normal_cdf(double p);

// Rank-based Gaussian advantages: powered percentiles of the midranks are
// mapped through the inverse normal CDF, then centered and divided by the
// population standard deviation plus epsilon. All-equal input yields the
// all-zero degenerate vector. O(K log K).
AdvantageVector softrank_advantages(const RewardVector& rewards, const SoftRankConfig& cfg = {});
AdvantageVector softrank_advantages(std::span<const double> rewards, const SoftRankConfig& cfg = {});

}  // namespace srpo
