#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "squeeze/coarse.hpp"
#include "squeeze/prompt.hpp"

namespace squeeze {

inline constexpr double kDefaultTauIns = 0.85;
inline constexpr double kDefaultTauQue = 0.9;
inline constexpr double kDefaultDeltaTau = 0.3;
inline constexpr std::size_t kDefaultSegmentSize = 200;

/// The instruction and question alone need more tokens than the target.
class InfeasibleBudgetError : public std::runtime_error {
 public:
  InfeasibleBudgetError(std::size_t target, std::size_t required)
      : std::runtime_error("target of " + std::to_string(target) + " tokens is " +
                           std::to_string(required - target) +
                           " tokens short of what the instruction and question need (" +
                           std::to_string(required) + ")"),
        target_(target),
        required_(required) {}

  std::size_t shortfall() const { return required_ - target_; }

 private:
  std::size_t target_;
  std::size_t required_;
};

struct CompressionPlan {
  std::size_t target_tokens = 0;
  double tau_ins = kDefaultTauIns;
  double tau_que = kDefaultTauQue;
  double tau_doc = 0.0;
  double delta_tau = kDefaultDeltaTau;
  std::map<std::size_t, double> per_doc_tau;  // doc_index -> ratio in [0, 1]
  std::vector<std::string> warnings;
};

/// (target - ceil(tau_ins * ins) - ceil(tau_que * que)) / retained_doc_tokens,
/// clipped to [0, 1]. Returns 0 when no document tokens are retained.
/// Throws InfeasibleBudgetError when the subtraction goes negative.
double base_budget(std::size_t ins_tokens, std::size_t que_tokens,
                   std::size_t retained_doc_tokens, std::size_t target_tokens, double tau_ins,
                   double tau_que);

double base_budget(const StructuredPrompt& prompt, const std::vector<ScoredDocument>& retained,
                   std::size_t target_tokens, double tau_ins, double tau_que);

/// Linear schedule over importance rank:
///   clip((1 - 2 * rank / retained_count) * delta_tau + tau_doc, 0, 1)
double dynamic_tau(std::size_t rank_index, std::size_t retained_count, double tau_doc,
                   double delta_tau);

/// ceil(tau * n), robust to floating-point noise in the product.
std::size_t keep_count(double tau, std::size_t n);

/// Tokens kept from a section of `length` tokens: the sum over its
/// segments of ceil(tau * segment_length).
std::size_t segment_quota(std::size_t length, double tau, std::size_t segment_size);

/// Scales every ratio by one common factor (re-clipping to [0, 1]), choosing
/// the largest factor whose segment quotas still fit `budget_tokens`.
std::vector<double> rescale_to_budget(const std::vector<double>& taus,
                                      const std::vector<std::size_t>& lengths,
                                      std::size_t budget_tokens, std::size_t segment_size);

struct BudgetSettings {
  std::size_t target_tokens = 0;
  double tau_ins = kDefaultTauIns;
  double tau_que = kDefaultTauQue;
  double delta_tau = kDefaultDeltaTau;
  std::size_t segment_size = kDefaultSegmentSize;
};

/// base_budget, dynamic_tau per retained document, then rescale_to_budget
/// so the planned total does not exceed the target.
CompressionPlan plan_budget(const StructuredPrompt& prompt,
                            const std::vector<ScoredDocument>& retained,
                            const BudgetSettings& settings);

}  // namespace squeeze
