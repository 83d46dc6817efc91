#include "squeeze/budget.hpp"

#include <algorithm>
#include <cmath>

namespace squeeze {

namespace {

double clip01(double x) { return std::max(std::min(x, 1.0), 0.0); }

}  // namespace

std::size_t keep_count(double tau, std::size_t n) {
  // 0.85 * 100 evaluates a hair above 85; snap near-integers first.
  const double x = tau * static_cast<double>(n);
  const double r = std::round(x);
  if (std::abs(x - r) < 1e-9) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::ceil(x));
}

double base_budget(std::size_t ins_tokens, std::size_t que_tokens,
                   std::size_t retained_doc_tokens, std::size_t target_tokens, double tau_ins,
                   double tau_que) {
  const std::size_t fixed = keep_count(tau_ins, ins_tokens) + keep_count(tau_que, que_tokens);
  if (fixed > target_tokens) throw InfeasibleBudgetError(target_tokens, fixed);
  if (retained_doc_tokens == 0) return 0.0;
  return clip01(static_cast<double>(target_tokens - fixed) /
                static_cast<double>(retained_doc_tokens));
}

double base_budget(const StructuredPrompt& prompt, const std::vector<ScoredDocument>& retained,
                   std::size_t target_tokens, double tau_ins, double tau_que) {
  std::size_t doc_tokens = 0;
  for (const auto& d : retained) doc_tokens += d.token_count;
  return base_budget(prompt.instruction.size(), prompt.question.size(), doc_tokens,
                     target_tokens, tau_ins, tau_que);
}

double dynamic_tau(std::size_t rank_index, std::size_t retained_count, double tau_doc,
                   double delta_tau) {
  const double shift =
      1.0 - 2.0 * static_cast<double>(rank_index) / static_cast<double>(retained_count);
  return clip01(shift * delta_tau + tau_doc);
}

std::size_t segment_quota(std::size_t length, double tau, std::size_t segment_size) {
  if (segment_size == 0) segment_size = length == 0 ? 1 : length;
  std::size_t total = 0;
  for (std::size_t start = 0; start < length; start += segment_size) {
    total += keep_count(tau, std::min(segment_size, length - start));
  }
  return total;
}

std::vector<double> rescale_to_budget(const std::vector<double>& taus,
                                      const std::vector<std::size_t>& lengths,
                                      std::size_t budget_tokens, std::size_t segment_size) {
  const auto total_at = [&](double f) {
    std::size_t total = 0;
    for (std::size_t k = 0; k < taus.size(); ++k) {
      total += segment_quota(lengths[k], clip01(f * taus[k]), segment_size);
    }
    return total;
  };
  double smallest = 1.0;
  for (double t : taus) {
    if (t > 0.0) smallest = std::min(smallest, t);
  }
  double hi = 1.0 / smallest;
  double lo = 0.0;
  if (total_at(hi) <= budget_tokens) {
    lo = hi;
  } else {
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (total_at(mid) <= budget_tokens) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
  }
  std::vector<double> out(taus.size());
  for (std::size_t k = 0; k < taus.size(); ++k) out[k] = clip01(lo * taus[k]);
  return out;
}

CompressionPlan plan_budget(const StructuredPrompt& prompt,
                            const std::vector<ScoredDocument>& retained,
                            const BudgetSettings& settings) {
  CompressionPlan plan;
  plan.target_tokens = settings.target_tokens;
  plan.tau_ins = settings.tau_ins;
  plan.tau_que = settings.tau_que;
  plan.delta_tau = settings.delta_tau;
  plan.tau_doc = base_budget(prompt, retained, settings.target_tokens, settings.tau_ins,
                             settings.tau_que);
  if (retained.empty()) {
    plan.warnings.push_back("no documents retained; only instruction and question are compressed");
    return plan;
  }

  const std::size_t fixed =
      segment_quota(prompt.instruction.size(), settings.tau_ins, settings.segment_size) +
      segment_quota(prompt.question.size(), settings.tau_que, settings.segment_size);
  if (fixed > settings.target_tokens) throw InfeasibleBudgetError(settings.target_tokens, fixed);
  const std::size_t doc_budget = settings.target_tokens - fixed;

  std::vector<double> taus;
  std::vector<std::size_t> lengths;
  for (const auto& d : retained) {
    taus.push_back(dynamic_tau(d.rank_index, retained.size(), plan.tau_doc, settings.delta_tau));
    lengths.push_back(d.token_count);
  }
  taus = rescale_to_budget(taus, lengths, doc_budget, settings.segment_size);
  for (std::size_t k = 0; k < retained.size(); ++k) {
    plan.per_doc_tau[retained[k].doc_index] = taus[k];
  }
  return plan;
}

}  // namespace squeeze
