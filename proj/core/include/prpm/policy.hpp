#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "prpm/event_log.hpp"
#include "prpm/future_state.hpp"

namespace prpm {

struct CostParams {
  /// Cost of a negative outcome.
  double c_uout = 20.0;
  /// Cost of performing the intervention; must stay below c_uout.
  double c_t1 = 1.0;

  void validate() const;
};

double cost_untreated(double avg_pred, const CostParams& costs);
double cost_treated(double avg_pred, double cate, const CostParams& costs);
/// cost_untreated - cost_treated = cate * c_uout - c_t1.
double gain(double avg_pred, double cate, const CostParams& costs);

enum class Decision { treat, wait, neutral };
std::string_view to_string(Decision decision);

struct GainBreakdown {
  double cost_untreated = 0;
  double cost_treated = 0;
  double c_gain = 0;
  double f_gain = 0;
  /// f_gain - c_gain.
  double opp_cost = 0;
  /// c_gain - opp_cost.
  double adj_gain = 0;
  Decision decision = Decision::neutral;
};

/// Treat when opp_cost < 0, Wait when opp_cost > 0, Neutral otherwise.
Decision decide(double opp_cost);

/// Opportunity cost, adjusted gain and decision from the two state gains.
/// Cost fields are left at zero.
GainBreakdown breakdown_from_gains(double c_gain, double f_gain);

GainBreakdown breakdown(const ScoreTriple& current, const ScoreTriple& future,
                        const CostParams& costs);

enum class RankMode {
  /// Rank by current-state gain only.
  current_only,
  /// Rank by adjusted gain. The Treat/Wait label is informational only.
  adjusted_gain,
};

enum class DeltaOrientation { future_minus_current, current_minus_future };

struct PolicyConfig {
  std::string name = "custom";
  double proba_threshold = 0.5;
  double cate_threshold = 0.0;
  std::optional<double> uncer_threshold;
  bool use_delta_uncer = false;
  double delta_uncer_threshold = 0.0;
  DeltaOrientation delta_orientation = DeltaOrientation::future_minus_current;
  RankMode mode = RankMode::current_only;

  void validate() const;
};

/// avgProba_CATE, avgProba_CATE_tUncer, avgProba_CATE_oppCost and
/// avgProba_CATE_oppCost_dUncer with the default thresholds.
std::vector<std::string> standard_policy_names();
/// Throws ConfigError for an unknown name.
PolicyConfig named_policy(std::string_view name);

std::string_view to_string(RankMode mode);
std::optional<RankMode> parse_rank_mode(std::string_view text);
std::string_view to_string(DeltaOrientation orientation);
std::optional<DeltaOrientation> parse_delta_orientation(std::string_view text);

struct Candidate {
  std::string case_id;
  /// Case start time; earlier cases win ties.
  Timestamp arrival = 0;
  ScoreTriple current;
  ScoreTriple future;
  GainBreakdown gains;
};

Candidate make_candidate(std::string case_id, Timestamp arrival, const ScoreTriple& current,
                         const ScoreTriple& future, const CostParams& costs);

/// Change in total uncertainty under the configured orientation.
double delta_uncertainty(const Candidate& candidate, const PolicyConfig& config);

bool passes_filter(const Candidate& candidate, const PolicyConfig& config);
std::vector<Candidate> filter(std::vector<Candidate> candidates, const PolicyConfig& config);

/// Ranking key: c_gain in current_only mode, adj_gain otherwise.
double rank_score(const Candidate& candidate, RankMode mode);

/// Stable ordering by descending rank score, then earlier arrival, then case id.
std::vector<Candidate> rank(std::vector<Candidate> candidates,
                            RankMode mode = RankMode::adjusted_gain);

}  // namespace prpm
