#include <cmath>
#include <random>

#include "doctest.h"
#include "stg/metrics.hpp"

using namespace stg;

namespace {

// Precision at every rank where recall increases, averaged.
double brute_force_ap(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<std::size_t> idx(s.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  int positives = 0;
  for (int v : y) positives += v;
  double sum = 0.0;
  for (std::size_t k = 1; k <= idx.size(); ++k) {
    if (!y[idx[k - 1]]) continue;
    int tp = 0;
    for (std::size_t j = 0; j < k; ++j) tp += y[idx[j]];
    sum += static_cast<double>(tp) / static_cast<double>(k);
  }
  return sum / positives;
}

}  // namespace

TEST_CASE("average precision") {
  const std::vector<double> s{0.9, 0.8, 0.7};
  const std::vector<int> y{1, 0, 1};
  CHECK(average_precision(s, y) == doctest::Approx(5.0 / 6).epsilon(1e-15));
  const std::vector<int> perfect{1, 1, 0};
  CHECK(average_precision(s, perfect) == 1.0);
  const std::vector<int> all{1, 1, 1};
  const std::vector<double> shuffled{0.1, 0.9, 0.4};
  CHECK(average_precision(shuffled, all) == 1.0);
  const std::vector<int> none{0, 0, 0};
  CHECK_THROWS_AS(average_precision(s, none), std::invalid_argument);
}

TEST_CASE("mean over criteria") {
  nn::Matrix<double> scores(4, 3);
  nn::Matrix<int> targets(4, 3);
  // Column 0: perfect (AP 1). Column 1: positive ranked second of two (AP 0.5).
  // Column 2: positives at ranks 1 and 4 (AP (1 + 2/4)/2 = 0.75).
  const double sc[4][3] = {{0.9, 0.9, 0.9}, {0.1, 0.8, 0.7}, {0.2, 0.2, 0.6}, {0.3, 0.1, 0.5}};
  const int tg[4][3] = {{1, 0, 1}, {0, 1, 0}, {0, 0, 0}, {0, 0, 1}};
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      scores(i, k) = sc[i][k];
      targets(i, k) = tg[i][k];
    }
  }
  const auto r = map_over_criteria(scores, targets, false);
  CHECK(r.per_criterion[0] == 1.0);
  CHECK(r.per_criterion[1] == 0.5);
  CHECK(r.per_criterion[2] == 0.75);
  CHECK(r.map == 0.75);

  SUBCASE("columns without positives are excluded") {
    for (std::size_t i = 0; i < 4; ++i) targets(i, 1) = 0;
    const auto e = map_over_criteria(scores, targets, false);
    CHECK(std::isnan(e.per_criterion[1]));
    CHECK(e.excluded_columns == std::vector<int>{1});
    CHECK(e.map == doctest::Approx(0.875));
  }
  SUBCASE("single criterion") {
    nn::Matrix<double> s1(3, 1);
    nn::Matrix<int> t1(3, 1);
    s1.data = {0.9, 0.8, 0.7};
    t1.data = {1, 0, 1};
    CHECK(map_over_criteria(s1, t1, false).map == doctest::Approx(5.0 / 6));
  }
}

TEST_CASE("mAP columns match a brute-force sweep") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 5 + trial % 20, K = 3;
    nn::Matrix<double> s(n, K);
    nn::Matrix<int> y(n, K);
    for (auto& v : s.data) v = std::round(u(rng) * 10) / 10;  // coarse grid produces ties
    for (auto& v : y.data) v = u(rng) < 0.4;
    for (std::size_t k = 0; k < K; ++k) y(0, k) = 1;
    const auto r = map_over_criteria(s, y, false);
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<double> col;
      std::vector<int> lab;
      for (std::size_t i = 0; i < n; ++i) {
        col.push_back(s(i, k));
        lab.push_back(y(i, k));
      }
      CHECK(std::abs(r.per_criterion[k] - brute_force_ap(col, lab)) <= 1e-9);
    }
  }
}

TEST_CASE("video macro F1") {
  SUBCASE("perfect prediction") {
    const std::vector<std::vector<int>> v{{0, 1, 2, 2}, {3, 3, 1}};
    CHECK(video_macro_f1(v, v).mean_f1 == 1.0);
  }
  SUBCASE("constant prediction over a two-class video") {
    const auto r = video_macro_f1({{0, 0, 0, 0}}, {{0, 0, 1, 1}});
    CHECK(r.mean_f1 == doctest::Approx(1.0 / 3).epsilon(1e-15));
    CHECK(r.per_class[0] == doctest::Approx(2.0 / 3));
    CHECK(r.per_class[1] == 0.0);
  }
  SUBCASE("mean across videos") {
    // Video A: truth {0,0,0,0,1}, pred {0,0,1,1,1}: F1_0 = 2*1*0.5/1.5 = 2/3, F1_1 = 2*(1/3)*1/(4/3) = 0.5.
    // Video B: perfect. Mean = ((2/3 + 1/2)/2 + 1)/2.
    const auto r = video_macro_f1({{0, 0, 1, 1, 1}, {2, 2}}, {{0, 0, 0, 0, 1}, {2, 2}});
    CHECK(r.per_video[0] == doctest::Approx(7.0 / 12));
    CHECK(r.mean_f1 == doctest::Approx((7.0 / 12 + 1.0) / 2));
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(video_macro_f1({{0, 1}}, {{0}}), std::invalid_argument);
  }
}
