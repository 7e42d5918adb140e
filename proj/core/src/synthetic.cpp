#include "prpm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "prpm/csv.hpp"
#include "prpm/error.hpp"
#include "prpm/random.hpp"

namespace prpm {

namespace {

constexpr const char* kCreate = "A_Create Application";
constexpr const char* kOffer = "O_Create Offer";
constexpr const char* kCallOffers = "W_Call after offers";
constexpr const char* kCallFiles = "W_Call incomplete files";
constexpr const char* kValidate = "W_Validate application";
constexpr const char* kComplete = "W_Complete application";

Timestamp gap_ms(double mean_seconds, Rng& rng) {
  std::exponential_distribution<double> gap(1.0 / mean_seconds);
  return std::max<Timestamp>(1, std::llround(gap(rng) * 1000.0));
}

Event make_event(const std::string& case_id, std::string activity, Timestamp ts) {
  Event e;
  e.case_id = case_id;
  e.activity = std::move(activity);
  e.timestamp = ts;
  return e;
}

}  // namespace

void SyntheticSpec::validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(base_negative_rate) || !unit(uplift) || !unit(uplift_spread) ||
      !unit(noise_fraction) || !unit(noise_negative_rate) || !unit(propensity)) {
    throw ConfigError("synthetic log rates must lie in [0, 1]");
  }
  if (!(risk_spread >= 0.0)) throw ConfigError("risk_spread must be non-negative");
  if (min_events < 1 || max_events < min_events) {
    throw ConfigError("synthetic event counts must satisfy 1 <= min <= max");
  }
  if (!(arrival_gap_seconds > 0) || !(event_gap_seconds > 0)) {
    throw ConfigError("synthetic time gaps must be positive");
  }
}

SyntheticSpec SyntheticSpec::from_config(const KeyValueConfig& c) {
  SyntheticSpec s;
  s.cases = static_cast<std::size_t>(c.get_int("synth_cases", static_cast<long long>(s.cases)));
  s.base_negative_rate = c.get_double("synth_base_negative_rate", s.base_negative_rate);
  s.risk_spread = c.get_double("synth_risk_spread", s.risk_spread);
  s.uplift = c.get_double("synth_uplift", s.uplift);
  s.uplift_spread = c.get_double("synth_uplift_spread", s.uplift_spread);
  s.noise_fraction = c.get_double("synth_noise_fraction", s.noise_fraction);
  s.noise_negative_rate = c.get_double("synth_noise_negative_rate", s.noise_negative_rate);
  s.propensity = c.get_double("synth_propensity", s.propensity);
  s.min_events =
      static_cast<std::size_t>(c.get_int("synth_min_events", static_cast<long long>(s.min_events)));
  s.max_events =
      static_cast<std::size_t>(c.get_int("synth_max_events", static_cast<long long>(s.max_events)));
  s.arrival_gap_seconds = c.get_double("synth_arrival_gap_seconds", s.arrival_gap_seconds);
  s.event_gap_seconds = c.get_double("synth_event_gap_seconds", s.event_gap_seconds);
  s.validate();
  return s;
}

void SyntheticSpec::to_config(KeyValueConfig& c) const {
  c.set("synth_cases", std::to_string(cases));
  c.set("synth_base_negative_rate", csv::format_double(base_negative_rate));
  c.set("synth_risk_spread", csv::format_double(risk_spread));
  c.set("synth_uplift", csv::format_double(uplift));
  c.set("synth_uplift_spread", csv::format_double(uplift_spread));
  c.set("synth_noise_fraction", csv::format_double(noise_fraction));
  c.set("synth_noise_negative_rate", csv::format_double(noise_negative_rate));
  c.set("synth_propensity", csv::format_double(propensity));
  c.set("synth_min_events", std::to_string(min_events));
  c.set("synth_max_events", std::to_string(max_events));
  c.set("synth_arrival_gap_seconds", csv::format_double(arrival_gap_seconds));
  c.set("synth_event_gap_seconds", csv::format_double(event_gap_seconds));
}

SyntheticSpec acceptance_log_spec() {
  SyntheticSpec spec;
  spec.cases = 2500;
  spec.uplift = 0.3;
  spec.uplift_spread = 0.6;
  spec.noise_fraction = 0.2;
  return spec;
}

std::vector<Trace> generate_synthetic_log(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<Trace> traces;
  traces.reserve(spec.cases);
  Rng arrivals(derive_seed(seed, 0xA771));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Timestamp start = spec.start;

  for (std::size_t c = 0; c < spec.cases; ++c) {
    start += gap_ms(spec.arrival_gap_seconds, arrivals);
    Rng rng(derive_seed(seed, c));

    Trace trace;
    char id[32];
    std::snprintf(id, sizeof(id), "case_%06zu", c);
    trace.case_id = id;

    const bool noise = unit(rng) < spec.noise_fraction;
    const double risk = unit(rng);
    const double rho = unit(rng);
    const double p_control =
        noise ? spec.noise_negative_rate
              : std::clamp(spec.base_negative_rate + spec.risk_spread * (risk - 0.5), 0.0, 1.0);
    const double case_uplift =
        noise ? 0.0 : spec.uplift * (1.0 + spec.uplift_spread * (2.0 * rho - 1.0));
    trace.treated = unit(rng) < spec.propensity;
    const double p_negative = trace.treated ? std::max(p_control - case_uplift, 0.0) : p_control;
    const Outcome outcome = unit(rng) < p_negative ? Outcome::negative : Outcome::positive;
    trace.outcome = outcome;

    std::binomial_distribution<int> extra(static_cast<int>(spec.max_events - spec.min_events),
                                          noise ? 0.5 : 0.3 + 0.4 * rho);
    const std::size_t n_events = spec.min_events + static_cast<std::size_t>(extra(rng));

    std::normal_distribution<double> score_noise(0.0, 60.0);
    std::uniform_real_distribution<double> wild(0.0, 1500.0);
    auto credit_score = [&] { return noise ? wild(rng) : 750.0 - 300.0 * risk + score_noise(rng); };

    Timestamp ts = start;
    Event first = make_event(trace.case_id, kCreate, ts);
    first.attributes.emplace("amount", noise ? std::round(unit(rng) * 200000.0)
                                             : std::round(5000.0 + 20000.0 * unit(rng)));
    first.attributes.emplace("credit_score", std::round(credit_score()));
    trace.events.push_back(std::move(first));

    static const char* const kNoiseActivities[] = {kCallOffers, kCallFiles, kValidate, kComplete};
    for (std::size_t j = 2; j <= n_events; ++j) {
      ts += gap_ms(spec.event_gap_seconds, rng);
      std::string activity;
      if (j == 2) {
        activity = kOffer;
      } else if (noise) {
        activity = kNoiseActivities[std::uniform_int_distribution<int>(0, 3)(rng)];
      } else {
        const double u = unit(rng);
        if (u < 0.6 * rho) {
          activity = kCallOffers;
        } else if (u < 0.6 * rho + 0.4 * risk) {
          activity = kCallFiles;
        } else {
          activity = unit(rng) < 0.5 ? kValidate : kComplete;
        }
      }
      Event e = make_event(trace.case_id, activity, ts);
      e.attributes.emplace("credit_score", std::round(credit_score()));
      trace.events.push_back(std::move(e));
    }

    if (trace.treated) {
      ts += gap_ms(spec.event_gap_seconds, rng);
      trace.events.push_back(make_event(trace.case_id, kOffer, ts));
    }

    ts += gap_ms(spec.event_gap_seconds, rng);
    const char* terminal = "A_Pending";
    if (outcome == Outcome::negative) terminal = unit(rng) < 0.5 ? "A_Cancelled" : "A_Denied";
    trace.events.push_back(make_event(trace.case_id, terminal, ts));
    traces.push_back(std::move(trace));
  }
  return traces;
}

LogMapping synthetic_log_mapping() {
  LogMapping mapping;
  mapping.treatment_col = "treatment";
  return mapping;
}

void write_event_log(std::ostream& out, std::span<const Trace> traces) {
  const std::vector<std::string> header{"case_id", "activity", "timestamp",
                                        "amount",  "credit_score", "treatment"};
  csv::write_row(out, header);
  std::vector<std::string> row(header.size());
  for (const Trace& trace : traces) {
    for (const Event& e : trace.events) {
      row[0] = e.case_id;
      row[1] = e.activity;
      row[2] = format_timestamp(e.timestamp);
      for (std::size_t col = 3; col <= 4; ++col) {
        row[col].clear();
        auto it = e.attributes.find(header[col]);
        if (it == e.attributes.end()) continue;
        if (const double* v = std::get_if<double>(&it->second)) {
          row[col] = csv::format_double(*v);
        } else {
          row[col] = std::get<std::string>(it->second);
        }
      }
      row[5] = trace.treated ? "1" : "0";
      csv::write_row(out, row);
    }
  }
}

std::vector<Trace> strip_outcome_events(std::vector<Trace> traces, const LogMapping& mapping) {
  if (!mapping.drop_outcome_events) return traces;
  auto is_outcome = [&](const Event& e) {
    return std::find(mapping.negative_activities.begin(), mapping.negative_activities.end(),
                     e.activity) != mapping.negative_activities.end() ||
           std::find(mapping.positive_activities.begin(), mapping.positive_activities.end(),
                     e.activity) != mapping.positive_activities.end();
  };
  for (Trace& t : traces) std::erase_if(t.events, is_outcome);
  return traces;
}

}  // namespace prpm
