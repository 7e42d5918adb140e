#pragma once

#include <span>

namespace prpm {

/// Entropy decomposition of an ensemble's binary prediction, in bits.
struct UncertaintyReport {
  double avg_pred = 0;
  /// Entropy of the mean prediction.
  double total = 0;
  /// Mean entropy of the member predictions (data noise).
  double aleatoric = 0;
  /// total - aleatoric: member disagreement (lack of knowledge).
  double epistemic = 0;
};

/// Arithmetic mean of the member probabilities.
double avg_pred(std::span<const double> member_probs);

/// Binary entropy in bits, with 0 * log2(0) taken as 0.
double binary_entropy(double p);

/// Splits the total uncertainty of the averaged prediction into its aleatoric
/// and epistemic parts. Epistemic values with magnitude below 1e-12 are
/// snapped to zero.
UncertaintyReport decompose(std::span<const double> member_probs);

}  // namespace prpm
