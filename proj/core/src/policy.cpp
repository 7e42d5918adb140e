#include "prpm/policy.hpp"

#include <algorithm>
#include <cmath>

#include "prpm/error.hpp"

namespace prpm {

void CostParams::validate() const {
  if (!(c_uout > 0)) throw ConfigError("c_uout must be positive");
  if (!(c_t1 >= 0 && c_t1 < c_uout)) throw ConfigError("c_t1 must lie in [0, c_uout)");
}

double cost_untreated(double avg_pred, const CostParams& costs) { return avg_pred * costs.c_uout; }

double cost_treated(double avg_pred, double cate, const CostParams& costs) {
  return (avg_pred - cate) * costs.c_uout + costs.c_t1;
}

double gain(double avg_pred, double cate, const CostParams& costs) {
  return cost_untreated(avg_pred, costs) - cost_treated(avg_pred, cate, costs);
}

std::string_view to_string(Decision decision) {
  switch (decision) {
    case Decision::treat: return "Treat";
    case Decision::wait: return "Wait";
    case Decision::neutral: return "Neutral";
  }
  return "?";
}

Decision decide(double opp_cost) {
  if (opp_cost < 0) return Decision::treat;
  if (opp_cost > 0) return Decision::wait;
  return Decision::neutral;
}

GainBreakdown breakdown_from_gains(double c_gain, double f_gain) {
  GainBreakdown b;
  b.c_gain = c_gain;
  b.f_gain = f_gain;
  b.opp_cost = f_gain - c_gain;
  b.adj_gain = c_gain - b.opp_cost;
  b.decision = decide(b.opp_cost);
  return b;
}

GainBreakdown breakdown(const ScoreTriple& current, const ScoreTriple& future,
                        const CostParams& costs) {
  GainBreakdown b = breakdown_from_gains(gain(current.avg_pred, current.cate, costs),
                                         gain(future.avg_pred, future.cate, costs));
  b.cost_untreated = cost_untreated(current.avg_pred, costs);
  b.cost_treated = cost_treated(current.avg_pred, current.cate, costs);
  return b;
}

void PolicyConfig::validate() const {
  if (!(proba_threshold >= 0 && proba_threshold <= 1)) {
    throw ConfigError("proba_threshold must lie in [0, 1]");
  }
  if (!(cate_threshold >= -1 && cate_threshold <= 1)) {
    throw ConfigError("cate_threshold must lie in [-1, 1]");
  }
  if (uncer_threshold && !(*uncer_threshold >= 0 && *uncer_threshold <= 1)) {
    throw ConfigError("uncer_threshold must lie in [0, 1]");
  }
  if (!(delta_uncer_threshold >= -1 && delta_uncer_threshold <= 1)) {
    throw ConfigError("delta_uncer_threshold must lie in [-1, 1]");
  }
}

std::vector<std::string> standard_policy_names() {
  return {"avgProba_CATE", "avgProba_CATE_tUncer", "avgProba_CATE_oppCost",
          "avgProba_CATE_oppCost_dUncer"};
}

PolicyConfig named_policy(std::string_view name) {
  PolicyConfig config;
  config.name = std::string(name);
  if (name == "avgProba_CATE") return config;
  if (name == "avgProba_CATE_tUncer") {
    config.uncer_threshold = 0.75;
    return config;
  }
  if (name == "avgProba_CATE_oppCost") {
    config.mode = RankMode::adjusted_gain;
    return config;
  }
  if (name == "avgProba_CATE_oppCost_dUncer") {
    config.mode = RankMode::adjusted_gain;
    config.use_delta_uncer = true;
    config.delta_uncer_threshold = 0.0;
    return config;
  }
  throw ConfigError("unknown policy '" + std::string(name) + "'");
}

std::string_view to_string(RankMode mode) {
  return mode == RankMode::current_only ? "current_only" : "adjusted_gain";
}

std::optional<RankMode> parse_rank_mode(std::string_view text) {
  if (text == "current_only") return RankMode::current_only;
  if (text == "adjusted_gain") return RankMode::adjusted_gain;
  return std::nullopt;
}

std::string_view to_string(DeltaOrientation orientation) {
  return orientation == DeltaOrientation::future_minus_current ? "future_minus_current"
                                                               : "current_minus_future";
}

std::optional<DeltaOrientation> parse_delta_orientation(std::string_view text) {
  if (text == "future_minus_current") return DeltaOrientation::future_minus_current;
  if (text == "current_minus_future") return DeltaOrientation::current_minus_future;
  return std::nullopt;
}

Candidate make_candidate(std::string case_id, Timestamp arrival, const ScoreTriple& current,
                         const ScoreTriple& future, const CostParams& costs) {
  return Candidate{std::move(case_id), arrival, current, future,
                   breakdown(current, future, costs)};
}

double delta_uncertainty(const Candidate& candidate, const PolicyConfig& config) {
  const double delta = candidate.future.total_uncer - candidate.current.total_uncer;
  return config.delta_orientation == DeltaOrientation::future_minus_current ? delta : -delta;
}

bool passes_filter(const Candidate& candidate, const PolicyConfig& config) {
  const ScoreTriple& c = candidate.current;
  if (!(c.avg_pred > config.proba_threshold)) return false;
  if (!(c.cate > config.cate_threshold)) return false;
  if (config.uncer_threshold && !(c.total_uncer < *config.uncer_threshold)) return false;
  if (config.use_delta_uncer &&
      !(delta_uncertainty(candidate, config) < config.delta_uncer_threshold)) {
    return false;
  }
  return true;
}

std::vector<Candidate> filter(std::vector<Candidate> candidates, const PolicyConfig& config) {
  std::erase_if(candidates, [&](const Candidate& c) { return !passes_filter(c, config); });
  return candidates;
}

double rank_score(const Candidate& candidate, RankMode mode) {
  return mode == RankMode::current_only ? candidate.gains.c_gain : candidate.gains.adj_gain;
}

std::vector<Candidate> rank(std::vector<Candidate> candidates, RankMode mode) {
  std::stable_sort(candidates.begin(), candidates.end(),
                   [mode](const Candidate& a, const Candidate& b) {
                     const double sa = rank_score(a, mode);
                     const double sb = rank_score(b, mode);
                     if (sa != sb) return sa > sb;
                     if (a.arrival != b.arrival) return a.arrival < b.arrival;
                     return a.case_id < b.case_id;
                   });
  return candidates;
}

}  // namespace prpm
