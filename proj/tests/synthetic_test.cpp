#include <doctest.h>

#include <cmath>
#include <sstream>

#include "prpm/error.hpp"
#include "prpm/synthetic.hpp"

using namespace prpm;

namespace {

struct ArmRates {
  double treated = 0, control = 0;
  std::size_t n_treated = 0, n_control = 0;

  double se() const {
    return std::sqrt(treated * (1 - treated) / static_cast<double>(n_treated) +
                     control * (1 - control) / static_cast<double>(n_control));
  }
};

ArmRates arm_rates(const std::vector<Trace>& traces) {
  ArmRates r;
  std::size_t neg_t = 0, neg_c = 0;
  for (const auto& t : traces) {
    const bool neg = t.outcome == Outcome::negative;
    if (t.treated) {
      ++r.n_treated;
      neg_t += neg;
    } else {
      ++r.n_control;
      neg_c += neg;
    }
  }
  r.treated = static_cast<double>(neg_t) / static_cast<double>(r.n_treated);
  r.control = static_cast<double>(neg_c) / static_cast<double>(r.n_control);
  return r;
}

std::string render(const std::vector<Trace>& traces) {
  std::ostringstream out;
  write_event_log(out, traces);
  return out.str();
}

}  // namespace

TEST_SUITE("synthetic") {

TEST_CASE("no planted effect gives equal arm outcome rates") {
  SyntheticSpec spec;
  spec.cases = 6000;
  spec.uplift = 0.0;
  const auto r = arm_rates(generate_synthetic_log(spec, 3));
  CHECK(std::abs(r.treated - r.control) < 3 * r.se());
}

TEST_CASE("the planted effect shows up as a rate difference") {
  SyntheticSpec spec;
  spec.cases = 6000;
  spec.uplift = 0.3;
  const auto r = arm_rates(generate_synthetic_log(spec, 4));
  // clamping at zero only shrinks the effect for the lowest-risk cases
  CHECK(r.control - r.treated > 0.2);
  CHECK(r.control - r.treated < 0.3 + 3 * r.se());
}

TEST_CASE("generation is deterministic in the seed") {
  SyntheticSpec spec;
  spec.cases = 200;
  spec.noise_fraction = 0.2;
  CHECK(render(generate_synthetic_log(spec, 9)) == render(generate_synthetic_log(spec, 9)));
  CHECK(render(generate_synthetic_log(spec, 9)) != render(generate_synthetic_log(spec, 10)));
  spec.cases = 0;
  CHECK(generate_synthetic_log(spec, 9).empty());
}

TEST_CASE("traces are well formed and parse back") {
  SyntheticSpec spec = acceptance_log_spec();
  spec.cases = 300;
  const auto traces = generate_synthetic_log(spec, 5);
  REQUIRE(traces.size() == 300);
  for (const auto& t : traces) {
    REQUIRE(t.outcome);
    CHECK(t.events.size() >= spec.min_events);
    CHECK(t.events.size() <= spec.max_events + 2);
    for (std::size_t i = 1; i < t.events.size(); ++i) {
      CHECK(t.events[i].timestamp > t.events[i - 1].timestamp);
    }
  }

  std::istringstream text(render(traces));
  const auto parsed = parse_log(text, synthetic_log_mapping());
  CHECK(parsed.errors.empty());
  REQUIRE(parsed.traces.size() == traces.size());
  LogMapping by_count = synthetic_log_mapping();
  by_count.treatment_col.clear();
  std::istringstream again(render(traces));
  const auto counted = parse_log(again, by_count);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    // parse order is by case start, which is also generation order
    CHECK(parsed.traces[i].case_id == traces[i].case_id);
    CHECK(parsed.traces[i].treated == traces[i].treated);
    CHECK(parsed.traces[i].outcome == traces[i].outcome);
    CHECK(counted.traces[i].treated == traces[i].treated);
  }

  const auto stripped = strip_outcome_events(traces, synthetic_log_mapping());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    CHECK(stripped[i].events.size() + 1 == traces[i].events.size());
  }
}

TEST_CASE("spec validation and config round-trip") {
  SyntheticSpec spec;
  spec.uplift = 1.5;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = SyntheticSpec{};
  spec.min_events = 5;
  spec.max_events = 4;
  CHECK_THROWS_AS(spec.validate(), ConfigError);

  SyntheticSpec tuned;
  tuned.cases = 77;
  tuned.noise_fraction = 0.25;
  tuned.arrival_gap_seconds = 3.5;
  KeyValueConfig config;
  tuned.to_config(config);
  const auto back = SyntheticSpec::from_config(config);
  CHECK(back.cases == 77);
  CHECK(back.noise_fraction == 0.25);
  CHECK(back.arrival_gap_seconds == 3.5);
}

}  // TEST_SUITE
