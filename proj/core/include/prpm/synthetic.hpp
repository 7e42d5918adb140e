#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "prpm/config.hpp"
#include "prpm/event_log.hpp"

namespace prpm {

/// Parameters of the synthetic loan-application log.
///
/// Every regular case has a latent risk r ~ U(0, 1) that sets its untreated
/// negative-outcome probability p = clamp(base + risk_spread * (r - 0.5)),
/// observed through noisy `credit_score` readings and the frequency of
/// "W_Call incomplete files" events. Each case also has a responsiveness
/// rho ~ U(0, 1), observed through "W_Call after offers" events; its uplift
/// is uplift * (1 + uplift_spread * (2 rho - 1)). Treated cases end
/// negatively with probability max(p - uplift_case, 0), so with
/// uplift_spread = 0 the true effect is the constant `uplift` wherever p
/// allows it.
///
/// Treated cases carry a second "O_Create Offer" as their last non-outcome
/// event, so the default offer-count rule and the `treatment` column agree.
///
/// A `noise_fraction` of cases is out of distribution: scattered attribute
/// values, random activities, outcome probability `noise_negative_rate` and
/// no treatment effect.
struct SyntheticSpec {
  std::size_t cases = 2500;
  double base_negative_rate = 0.55;
  double risk_spread = 0.7;
  double uplift = 0.3;
  double uplift_spread = 0.0;
  double noise_fraction = 0.0;
  double noise_negative_rate = 0.6;
  double propensity = 0.5;
  std::size_t min_events = 3;
  std::size_t max_events = 12;
  double arrival_gap_seconds = 12.0;
  double event_gap_seconds = 45.0;
  Timestamp start = 1483228800000;  // 2017-01-01T00:00:00Z

  void validate() const;

  static SyntheticSpec from_config(const KeyValueConfig& config);
  void to_config(KeyValueConfig& config) const;
};

/// Spec of the bundled acceptance log.
SyntheticSpec acceptance_log_spec();

/// Complete traces, each ending in its outcome-defining activity, with
/// `outcome` and `treated` set. Deterministic in (spec, seed).
std::vector<Trace> generate_synthetic_log(const SyntheticSpec& spec, std::uint64_t seed);

/// Mapping that reads logs written by write_event_log.
LogMapping synthetic_log_mapping();

/// CSV with columns case_id,activity,timestamp,amount,credit_score,treatment
/// in (case start, event) order.
void write_event_log(std::ostream& out, std::span<const Trace> traces);

/// Applies the mapping's outcome-event removal to in-memory traces.
std::vector<Trace> strip_outcome_events(std::vector<Trace> traces, const LogMapping& mapping);

}  // namespace prpm
