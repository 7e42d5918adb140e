#include <doctest.h>

#include <map>
#include <random>
#include <set>
#include <sstream>

#include "prpm/error.hpp"
#include "prpm/replay.hpp"
#include "support.hpp"

using namespace prpm;
using doctest::Approx;

namespace {

ScoredCase make_case(const std::string& id, std::vector<Timestamp> times,
                     std::vector<std::pair<ScoreTriple, ScoreTriple>> scores,
                     Outcome label = Outcome::negative) {
  ScoredCase c;
  c.case_id = id;
  c.arrival = times.front();
  c.event_times = std::move(times);
  for (const auto& [now, later] : scores) c.prefixes.push_back(ScoredPrefix{0, now, later});
  c.label = label;
  return c;
}

std::vector<ScoredCase> random_cases(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ScoredCase> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = 2 + rng() % 6;
    Timestamp t = static_cast<Timestamp>(i) * 4000 + static_cast<Timestamp>(rng() % 3000);
    std::vector<Timestamp> times;
    std::vector<std::pair<ScoreTriple, ScoreTriple>> scores;
    for (std::size_t j = 0; j < len; ++j) {
      times.push_back(t);
      t += 1000 + static_cast<Timestamp>(rng() % 60000);
      if (j + 1 < len) {
        scores.emplace_back(ScoreTriple{u(rng), u(rng), u(rng) - 0.2},
                            ScoreTriple{u(rng), u(rng), u(rng) - 0.2});
      }
    }
    out.push_back(make_case("case" + std::to_string(i), times, scores,
                            u(rng) < 0.5 ? Outcome::negative : Outcome::positive));
  }
  return out;
}

std::vector<std::size_t> levels() { return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}; }

std::vector<PolicyConfig> standard_policies() {
  std::vector<PolicyConfig> out;
  for (const auto& name : standard_policy_names()) out.push_back(named_policy(name));
  return out;
}

}  // namespace

TEST_SUITE("replay") {

TEST_CASE("events are ordered by time, case id and prefix") {
  using test::make_trace;
  const std::vector<Trace> traces{make_trace("b", {"x", "y"}, 1000, Outcome::positive),
                                  make_trace("a", {"x", "y"}, 2000, Outcome::negative)};
  const auto events = replay_events(traces);
  REQUIRE(events.size() == 4);
  CHECK(events[0].case_id == "b");
  CHECK(events[1].case_id == "a");
  CHECK(events[1].time == 2000);
  CHECK(events[1].prefix_len == 1);
  CHECK(events[2].case_id == "b");
  CHECK(events[2].prefix_len == 2);
  CHECK(events[3].time == 3000);
}

TEST_CASE("zero capacity treats nobody") {
  const auto cases = random_cases(1, 30);
  const auto report = run(cases, named_policy("avgProba_CATE"), PoolConfig{0, {}}, {}, 1);
  CHECK(report.treated_count == 0);
  CHECK(report.total_gain == 0.0);
  CHECK(report.gain_per_treated == 0.0);
}

TEST_CASE("a single eligible candidate is treated at its first prefix") {
  const std::vector<ScoredCase> cases{
      make_case("only", {0, 5000, 9000},
                {{{0.8, 0.4, 0.3}, {0.8, 0.4, 0.3}}, {{0.8, 0.4, 0.3}, {0.8, 0.4, 0.3}}})};
  const auto report = run(cases, named_policy("avgProba_CATE"), PoolConfig{1, {}}, {}, 1);
  REQUIRE(report.treated_count == 1);
  const auto& e = report.ledger.front();
  CHECK(e.case_id == "only");
  CHECK(e.treated_at_prefix == 1);
  CHECK(e.treated_at == 0);
  CHECK(e.release_at == 60000);
  CHECK(e.c_gain == Approx(5.0));
  CHECK(e.outcome_aware_gain == Approx(5.0));
  CHECK(report.total_gain == Approx(5.0));
}

TEST_CASE("simultaneous candidates compete on the policy's ranking") {
  // "a": c_gain 5, f_gain 1 -> adj 9; "b": c_gain 7, f_gain 12 -> adj 2.
  const std::vector<ScoredCase> cases{
      make_case("a", {0, 1000}, {{{0.8, 0.4, 0.3}, {0.8, 0.4, 0.1}}}),
      make_case("b", {0, 1000}, {{{0.8, 0.4, 0.4}, {0.8, 0.4, 0.65}}})};
  const auto adjusted = run(cases, named_policy("avgProba_CATE_oppCost"), PoolConfig{1, {}}, {}, 1);
  REQUIRE(adjusted.treated_count == 1);
  CHECK(adjusted.ledger[0].case_id == "a");
  CHECK(adjusted.ledger[0].adj_gain == Approx(9.0));
  CHECK(adjusted.ledger[0].decision == Decision::treat);

  const auto current = run(cases, named_policy("avgProba_CATE"), PoolConfig{1, {}}, {}, 1);
  REQUIRE(current.treated_count == 1);
  CHECK(current.ledger[0].case_id == "b");
  CHECK(current.ledger[0].adj_gain == Approx(2.0));
  CHECK(current.ledger[0].decision == Decision::wait);

  const auto both = run(cases, named_policy("avgProba_CATE_oppCost"), PoolConfig{2, {}}, {}, 1);
  CHECK(both.treated_count == 2);
}

TEST_CASE("a freed resource serves a waiting case and the last event ends candidacy") {
  DurationDist short_task;
  short_task.fixed_seconds = 2;
  const ScoreTriple good{0.8, 0.4, 0.3}, better{0.8, 0.4, 0.5};
  const std::vector<ScoredCase> cases{make_case("a", {0, 10000}, {{good, good}}),
                                      make_case("b", {1000, 3000, 8000}, {{good, good}, {good, good}}),
                                      make_case("c", {1500, 2000}, {{better, better}})};
  const auto report = run(cases, named_policy("avgProba_CATE"), PoolConfig{1, short_task}, {}, 1);
  REQUIRE(report.treated_count == 2);
  CHECK(report.ledger[0].case_id == "a");
  // the resource frees at 2000, the instant "c" completes, so the waiting "b" gets it
  CHECK(report.ledger[1].case_id == "b");
  CHECK(report.ledger[1].treated_at == 2000);
  CHECK(report.ledger[1].treated_at_prefix == 1);
}

TEST_CASE("duplicate case ids are rejected") {
  const ScoreTriple s{0.8, 0.4, 0.3};
  const std::vector<ScoredCase> cases{make_case("x", {0, 1}, {{s, s}}),
                                      make_case("x", {5, 6}, {{s, s}})};
  CHECK_THROWS_AS(run(cases, named_policy("avgProba_CATE"), PoolConfig{1, {}}, {}, 1), DataError);
}

TEST_CASE("ledger invariants over random replays") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const auto cases = random_cases(seed, 80);
    std::map<std::string, const ScoredCase*> by_id;
    for (const auto& c : cases) by_id[c.case_id] = &c;
    DurationDist d;
    d.kind = seed % 2 ? DurationKind::exponential : DurationKind::normal;
    for (const auto& policy : standard_policies()) {
      for (std::size_t r : {1u, 3u, 7u}) {
        const auto report = run(cases, policy, PoolConfig{r, d}, {}, seed);
        std::set<std::string> seen;
        double total = 0;
        for (const auto& e : report.ledger) {
          CHECK(seen.insert(e.case_id).second);  // at most once
          const ScoredCase& c = *by_id.at(e.case_id);
          REQUIRE(e.treated_at_prefix >= 1);
          REQUIRE(e.treated_at_prefix <= c.prefixes.size());
          // treated while the case sits at that prefix
          CHECK(c.event_times[e.treated_at_prefix - 1] <= e.treated_at);
          CHECK(e.treated_at < c.event_times[e.treated_at_prefix]);
          CHECK(e.resource_id < r);
          const ScoredPrefix& p = c.prefixes[e.treated_at_prefix - 1];
          Candidate cand = make_candidate(c.case_id, c.arrival, p.current, p.future, {});
          CHECK(passes_filter(cand, policy));
          total += e.c_gain;
        }
        CHECK(report.total_gain == Approx(total));
        // busy intervals never exceed the capacity at any instant
        for (const auto& e : report.ledger) {
          std::size_t busy = 0;
          for (const auto& other : report.ledger) {
            busy += other.treated_at <= e.treated_at && e.treated_at < other.release_at;
          }
          CHECK(busy <= r);
        }
      }
    }
  }
}

TEST_CASE("sweep grid, monotone capacity and reproducibility") {
  const auto cases = random_cases(5, 150);
  const auto policies = standard_policies();
  const auto grid = levels();
  const auto a = sweep(cases, policies, grid, DurationDist{}, {}, 9);
  REQUIRE(a.size() == 40);
  for (std::size_t p = 0; p < policies.size(); ++p) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(a[p * grid.size() + i].policy_name == policies[p].name);
      CHECK(a[p * grid.size() + i].resources == grid[i]);
    }
  }
  // spot-check: the widest pool treats at least as many as a single resource
  CHECK(a[grid.size() - 1].treated_count >= a[0].treated_count);
  const auto b = sweep(cases, policies, grid, DurationDist{}, {}, 9);
  std::ostringstream sa, sb;
  write_summary(sa, a);
  write_summary(sb, b);
  CHECK(sa.str() == sb.str());
}

TEST_CASE("emit_report writes a summary and one ledger per cell") {
  test::TempDir dir;
  emit_report({}, dir.path());
  CHECK(test::read_file(dir / "summary.csv") ==
        "policy,resources,treated_count,total_gain,gain_per_treated,outcome_aware_gain\n");

  const auto cases = random_cases(3, 60);
  const auto policies = standard_policies();
  const std::vector<std::size_t> grid{1, 4};
  const auto reports = sweep(cases, policies, grid, DurationDist{}, {}, 2);
  test::TempDir out;
  emit_report(reports, out.path());
  std::istringstream summary(test::read_file(out / "summary.csv"));
  const auto back = read_summary(summary);
  REQUIRE(back.size() == reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    CHECK(back[i].policy_name == reports[i].policy_name);
    CHECK(back[i].resources == reports[i].resources);
    CHECK(back[i].treated_count == reports[i].treated_count);
    CHECK(back[i].total_gain == Approx(reports[i].total_gain).epsilon(1e-9));
    const auto path = out.path() / "ledgers" / ledger_file_name(reports[i]);
    REQUIRE(std::filesystem::exists(path));
    std::istringstream ledger_text(test::read_file(path));
    const auto ledger = read_ledger(ledger_text);
    REQUIRE(ledger.size() == back[i].treated_count);
    double sum = 0;
    for (std::size_t j = 0; j < ledger.size(); ++j) {
      CHECK(ledger[j].case_id == reports[i].ledger[j].case_id);
      CHECK(ledger[j].decision == reports[i].ledger[j].decision);
      sum += ledger[j].c_gain;
    }
    CHECK(sum == Approx(back[i].total_gain).epsilon(1e-9));
  }
  CHECK(ledger_file_name(ReplayReport{"a/b c", 3}) == "a_b_c_R3.csv");
}

}  // TEST_SUITE
