#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "prpm/error.hpp"
#include "prpm/future_state.hpp"

using namespace prpm;
using doctest::Approx;

namespace {

ScoreTriple triple(double p, double u = 0.5, double c = 0.1) { return ScoreTriple{p, u, c}; }

struct OracleEntry {
  std::vector<double> scaled;
  ScoreTriple scores;
  double frequency;
};

// Exhaustive scan: sort every entry by (distance, insertion order), keep k.
ScoreTriple knn_oracle(const std::vector<OracleEntry>& entries, const std::vector<double>& query,
                       std::size_t k) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    double sq = 0;
    for (std::size_t j = 0; j < query.size(); ++j) {
      const double diff = entries[i].scaled[j] - query[j];
      sq += diff * diff;
    }
    d.emplace_back(std::sqrt(sq), i);
  }
  std::sort(d.begin(), d.end());
  long double w_sum = 0, p = 0, u = 0, c = 0;
  for (std::size_t j = 0; j < std::min(k, d.size()); ++j) {
    const auto& e = entries[d[j].second];
    const long double w = e.frequency / (1.0L + d[j].first);
    w_sum += w;
    p += w * e.scores.avg_pred;
    u += w * e.scores.total_uncer;
    c += w * e.scores.cate;
  }
  return ScoreTriple{static_cast<double>(p / w_sum), static_cast<double>(u / w_sum),
                     static_cast<double>(c / w_sum)};
}

Ensemble constant_ensemble(double p, std::size_t features) {
  return Ensemble(features, {MemberModel{1, TreeParams{}, DecisionTree::constant(p)},
                             MemberModel{2, TreeParams{}, DecisionTree::constant(p)}});
}

}  // namespace

TEST_SUITE("future_state") {

TEST_CASE("min-max scaler maps the training range to [0, 1]") {
  LabeledMatrix m;
  m.cols = 3;
  m.add_row(std::vector<double>{0, 10, 5}, false);
  m.add_row(std::vector<double>{4, 20, 5}, true);
  const auto scaler = MinMaxScaler::fit(m);
  const auto v = scaler.transform(std::vector<double>{2, 25, 7});
  CHECK(v[0] == 0.5);
  CHECK(v[1] == 1.5);
  CHECK(v[2] == 0.0);
  CHECK_THROWS_AS(scaler.transform(std::vector<double>{1}), SchemaMismatch);
  std::stringstream buf;
  scaler.save(buf);
  CHECK(MinMaxScaler::load(buf) == scaler);
  CHECK(MinMaxScaler::identity(2).transform(std::vector<double>{3, -4}) ==
        std::vector<double>{3, -4});
}

TEST_CASE("worked three-neighbour example") {
  HistoryIndex index(MinMaxScaler::identity(1));
  index.add(4, std::vector<double>{0}, triple(0.9), 1);
  index.add(4, std::vector<double>{1}, triple(0.6), 2);
  index.add(4, std::vector<double>{3}, triple(0.3), 1);
  const auto f = index.future_scores(std::vector<double>{0}, 3, triple(0.1), 3);
  CHECK(f.avg_pred == 0.7);
}

TEST_CASE("single and symmetric neighbours") {
  HistoryIndex one(MinMaxScaler::identity(2));
  one.add(2, std::vector<double>{1, 1}, ScoreTriple{0.8, 0.3, 0.25});
  CHECK(one.future_scores(std::vector<double>{5, 5}, 1, triple(0), 10) ==
        ScoreTriple{0.8, 0.3, 0.25});

  HistoryIndex two(MinMaxScaler::identity(1));
  two.add(2, std::vector<double>{-1}, triple(0.6));
  two.add(2, std::vector<double>{1}, triple(0.8));
  CHECK(two.future_scores(std::vector<double>{0}, 1, triple(0), 2).avg_pred == Approx(0.7));
}

TEST_CASE("an empty next bucket returns the current triple") {
  HistoryIndex index(MinMaxScaler::identity(1));
  index.add(2, std::vector<double>{0}, triple(0.9));
  const ScoreTriple current{0.55, 0.9, 0.05};
  CHECK(index.future_scores(std::vector<double>{0}, 2, current, 5) == current);
  CHECK(index.bucket(7).empty());
  CHECK_THROWS_AS(index.future_scores(std::vector<double>{0}, 1, current, 0),
                  std::invalid_argument);
}

TEST_CASE("identical vectors merge into one entry") {
  HistoryIndex index(MinMaxScaler::identity(2));
  index.add(3, std::vector<double>{1, 2}, triple(0.4));
  index.add(3, std::vector<double>{1, 2}, triple(0.4));
  index.add(4, std::vector<double>{1, 2}, triple(0.4));
  REQUIRE(index.bucket(3).size() == 1);
  CHECK(index.bucket(3)[0].frequency == 2);
  CHECK(index.entry_count() == 2);
}

TEST_CASE("future_scores matches an exhaustive-scan oracle") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int round = 0; round < 50; ++round) {
    const std::size_t dims = 1 + rng() % 5;
    const std::size_t n = 1 + rng() % 100;
    LabeledMatrix fit_data;
    fit_data.cols = dims;
    std::vector<std::vector<double>> raw(n, std::vector<double>(dims));
    for (auto& row : raw) {
      for (double& v : row) v = std::floor(u(rng) * 8) * 1.5;  // coarse grid forces ties
      fit_data.add_row(row, false);
    }
    const auto scaler = MinMaxScaler::fit(fit_data);
    HistoryIndex index(scaler);
    std::vector<OracleEntry> oracle;
    std::map<std::vector<double>, std::size_t> slot;
    for (const auto& row : raw) {
      const ScoreTriple s{u(rng), u(rng), 2 * u(rng) - 1};
      const std::size_t freq = 1 + rng() % 3;
      index.add(5, row, s, freq);
      auto [it, inserted] = slot.try_emplace(row, oracle.size());
      if (inserted) {
        oracle.push_back(OracleEntry{scaler.transform(row), s, static_cast<double>(freq)});
      } else {
        oracle[it->second].frequency += static_cast<double>(freq);
      }
    }
    std::vector<double> query(dims);
    for (double& v : query) v = u(rng) * 12;
    const std::size_t k = 1 + rng() % 12;
    const auto got = index.future_scores(query, 4, triple(0), k);
    const auto want = knn_oracle(oracle, scaler.transform(query), k);
    CHECK(got.avg_pred == Approx(want.avg_pred).epsilon(1e-9));
    CHECK(got.total_uncer == Approx(want.total_uncer).epsilon(1e-9));
    CHECK(got.cate == Approx(want.cate).epsilon(1e-9));

    // outputs stay inside the range of the bucket's scores
    double lo = 1, hi = 0;
    for (const auto& e : oracle) {
      lo = std::min(lo, e.scores.avg_pred);
      hi = std::max(hi, e.scores.avg_pred);
    }
    CHECK(got.avg_pred >= lo - 1e-12);
    CHECK(got.avg_pred <= hi + 1e-12);

    // locality: querying an entry's own coordinates with k = 1 returns it
    const auto& pick = raw[rng() % n];
    const auto own = index.future_scores(pick, 4, triple(0), 1);
    const auto& expected = oracle[slot.at(pick)].scores;
    CHECK(own.avg_pred == Approx(expected.avg_pred).epsilon(1e-12));
    CHECK(own.cate == Approx(expected.cate).epsilon(1e-12));
  }
}

TEST_CASE("frequency is linear in repeated listings") {
  HistoryIndex listed(MinMaxScaler::identity(1)), weighted(MinMaxScaler::identity(1));
  listed.add(2, std::vector<double>{1}, triple(0.2));
  listed.add(2, std::vector<double>{1}, triple(0.2));
  listed.add(2, std::vector<double>{4}, triple(0.9));
  weighted.add(2, std::vector<double>{1}, triple(0.2), 2);
  weighted.add(2, std::vector<double>{4}, triple(0.9));
  const auto a = listed.future_scores(std::vector<double>{2}, 1, triple(0), 5);
  const auto b = weighted.future_scores(std::vector<double>{2}, 1, triple(0), 5);
  CHECK(a == b);
  // oracle over the two listings without merging
  const double w1 = 1.0 / 2.0, w4 = 1.0 / 3.0;
  CHECK(a.avg_pred == Approx((2 * w1 * 0.2 + w4 * 0.9) / (2 * w1 + w4)));
}

TEST_CASE("build_index scores every distinct training prefix") {
  std::vector<PrefixGroup> groups(2);
  groups[0].prefix_len = 1;
  groups[1].prefix_len = 2;
  auto inst = [](std::vector<double> f, std::size_t k) {
    PrefixInstance p;
    p.features = std::move(f);
    p.prefix_len = k;
    return p;
  };
  groups[0].instances = {inst({1, 0}, 1), inst({1, 0}, 1), inst({2, 0}, 1)};
  groups[1].instances = {inst({3, 1}, 2)};
  const Ensemble outcome = constant_ensemble(0.8, 2);
  const UpliftModel uplift(constant_ensemble(0.5, 2), constant_ensemble(0.8, 2));
  const HistoryIndex index = build_index(groups, outcome, uplift);
  REQUIRE(index.bucket(1).size() == 2);
  CHECK(index.bucket(1)[0].frequency == 2);
  CHECK(index.bucket(1)[0].features == std::vector<double>{1, 0});
  CHECK(index.bucket(2).size() == 1);
  CHECK(index.bucket(1)[1].scores.avg_pred == Approx(0.8));
  CHECK(index.bucket(1)[1].scores.cate == Approx(0.3));
  CHECK(index.bucket(1)[1].scores.total_uncer == Approx(binary_entropy(0.8)));

  const HistoryIndex again = build_index(groups, outcome, uplift);
  std::stringstream a, b;
  index.save(a);
  again.save(b);
  CHECK(a.str() == b.str());

  const HistoryIndex back = HistoryIndex::load(a);
  for (double x : {0.0, 1.5, 2.0, 9.0}) {
    const std::vector<double> q{x, 0};
    CHECK(back.future_scores(q, 1, triple(0), 10) == index.future_scores(q, 1, triple(0), 10));
  }
}

TEST_CASE("score_triple combines both models") {
  const Ensemble outcome = constant_ensemble(0.7, 3);
  const UpliftModel uplift(constant_ensemble(0.3, 3), constant_ensemble(0.6, 3));
  const auto s = score_triple(outcome, uplift, std::vector<double>{1, 2, 3});
  CHECK(s.avg_pred == Approx(0.7));
  CHECK(s.cate == Approx(0.3));
  CHECK(s.total_uncer == Approx(binary_entropy(0.7)));
  const UpliftModel wrong(constant_ensemble(0.3, 2), constant_ensemble(0.6, 2));
  CHECK_THROWS_AS(score_triple(outcome, wrong, std::vector<double>{1, 2, 3}), SchemaMismatch);
}

}  // TEST_SUITE
