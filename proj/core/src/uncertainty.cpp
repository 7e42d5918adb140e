#include "prpm/uncertainty.hpp"

#include <cmath>
#include <stdexcept>

namespace prpm {

namespace {

void check_probabilities(std::span<const double> probs) {
  if (probs.empty()) throw std::invalid_argument("member probabilities are empty");
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("member probability outside [0, 1]");
    }
  }
}

double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

}  // namespace

double avg_pred(std::span<const double> member_probs) {
  check_probabilities(member_probs);
  double sum = 0;
  for (double p : member_probs) sum += p;
  return sum / static_cast<double>(member_probs.size());
}

double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability outside [0, 1]");
  return -plogp(p) - plogp(1.0 - p);
}

UncertaintyReport decompose(std::span<const double> member_probs) {
  UncertaintyReport report;
  report.avg_pred = avg_pred(member_probs);
  report.total = binary_entropy(report.avg_pred);
  double entropy_sum = 0;
  for (double p : member_probs) entropy_sum += binary_entropy(p);
  report.aleatoric = entropy_sum / static_cast<double>(member_probs.size());
  report.epistemic = report.total - report.aleatoric;
  if (std::abs(report.epistemic) < 1e-12) report.epistemic = 0.0;
  return report;
}

}  // namespace prpm
