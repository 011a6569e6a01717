#include <cmath>
#include <numeric>

#include "doctest.h"
#include "stg/nn/gradcheck.hpp"
#include "stg/nn/matrix.hpp"
#include "stg/nn/params.hpp"
#include "stg/nn/tape.hpp"

using namespace stg::nn;

namespace {

Matrix<double> random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix<double> m(r, c);
  for (auto& v : m.data) v = n(rng);
  return m;
}

Matrix<double> mat(std::size_t r, std::size_t c, std::vector<double> v) {
  Matrix<double> m(r, c);
  m.data = std::move(v);
  return m;
}

// Sum of all entries as a 1x1 loss.
Var total(Tape<double>& t, Var x) {
  const auto& v = t.value(x);
  Var ones_l = t.constant(Matrix<double>(1, v.rows, 1.0));
  Var ones_r = t.constant(Matrix<double>(v.cols, 1, 1.0));
  return t.matmul(t.matmul(ones_l, x), ones_r);
}

}  // namespace

TEST_CASE("matrix kernels") {
  std::mt19937_64 rng(1);
  const auto a = mat(2, 3, {1, 2, 3, 4, 5, 6});
  const auto b = mat(3, 2, {7, 8, 9, 10, 11, 12});
  CHECK(matmul(a, b).data == std::vector<double>{58, 64, 139, 154});
  CHECK_THROWS_AS(matmul(a, a), ShapeError);

  for (auto [m, k, n] : {std::tuple{5, 7, 3}, std::tuple{80, 64, 48}, std::tuple{1, 300, 200}}) {
    const auto x = random_matrix(m, k, rng), y = random_matrix(k, n, rng);
    CHECK(matmul(x, y) == reference::matmul(x, y));
    const auto g = random_matrix(m, n, rng);
    Matrix<double> c1(k, n), c2(k, n);
    matmul_tn_accumulate(x, g, c1);
    reference::matmul_tn_accumulate(x, g, c2);
    CHECK(c1 == c2);
    Matrix<double> d1(m, k), d2(m, k);
    matmul_nt_accumulate(g, y, d1);
    reference::matmul_nt_accumulate(g, y, d2);
    CHECK(d1 == d2);
  }
}

TEST_CASE("elementary ops and their gradients") {
  SUBCASE("relu") {
    Tape<double> t;
    Var x = t.constant(mat(1, 2, {-1, 2}));
    Var y = t.relu(x);
    CHECK(t.value(y).data == std::vector<double>{0, 2});
    t.backward(total(t, y));
    CHECK(t.grad(x).data == std::vector<double>{0, 1});
  }
  SUBCASE("mean rows") {
    Tape<double> t;
    CHECK(t.value(t.mean_rows(t.constant(Matrix<double>(3, 2, 1.0)))).data == std::vector<double>{1, 1});
  }
  SUBCASE("segment mean with an empty segment") {
    Tape<double> t;
    Var x = t.constant(mat(3, 1, {1, 2, 6}));
    const std::vector<int> seg{0, 2, 0};
    Var y = t.segment_mean(x, seg, 3);
    CHECK(t.value(y).data == std::vector<double>{3.5, 0, 2});
    t.backward(total(t, y));
    CHECK(t.grad(x).data == std::vector<double>{0.5, 1, 0.5});
  }
  SUBCASE("shift rows is causal") {
    Tape<double> t;
    Var x = t.constant(mat(4, 1, {1, 2, 3, 4}));
    CHECK(t.value(t.shift_rows(x, 2)).data == std::vector<double>{0, 0, 1, 2});
    CHECK(t.value(t.shift_rows(x, 9)).data == std::vector<double>{0, 0, 0, 0});
  }
  SUBCASE("dropout is the identity outside training") {
    std::mt19937_64 rng(1);
    Tape<double> t(false);
    Var x = t.constant(Matrix<double>(4, 4, 2.0));
    CHECK(t.value(t.dropout(x, 0.5, rng)) == t.value(x));
    Tape<double> tt(true);
    Var xt = tt.constant(Matrix<double>(100, 100, 1.0));
    const auto& d = tt.value(tt.dropout(xt, 0.25, rng));
    const double mean = std::accumulate(d.data.begin(), d.data.end(), 0.0) / d.size();
    CHECK(mean == doctest::Approx(1.0).epsilon(0.05));
  }
  SUBCASE("non-finite values are caught") {
    Tape<double> t;
    Var x = t.constant(mat(1, 1, {1e308}));
    Var y = t.constant(mat(1, 1, {1e10}));
    CHECK_THROWS_AS(t.matmul(x, y), std::runtime_error);
  }
}

TEST_CASE("losses") {
  SUBCASE("bce symmetry point and stability") {
    auto r = bce_with_logits(mat(1, 1, {0}), mat(1, 1, {1}));
    CHECK(r.loss == doctest::Approx(std::log(2.0)));
    r = bce_with_logits(mat(1, 1, {20}), mat(1, 1, {1}));
    CHECK(std::isfinite(r.loss));
    CHECK(r.loss == doctest::Approx(2.0611536e-9).epsilon(1e-6));
    r = bce_with_logits(mat(1, 1, {-800}), mat(1, 1, {1}));
    CHECK(r.loss == doctest::Approx(800));
  }
  SUBCASE("cross entropy") {
    const std::vector<int> cls{3};
    CHECK(softmax_cross_entropy(Matrix<double>(1, 7, 0.0), cls).loss == doctest::Approx(std::log(7.0)));
    Matrix<double> dom(1, 7, 0.0);
    dom(0, 3) = 20;
    CHECK(softmax_cross_entropy(dom, cls).loss == doctest::Approx(std::log1p(6 * std::exp(-20.0))));
    Matrix<double> two(1, 2, 0.0);
    two(0, 1) = 20;
    const std::vector<int> one{1};
    CHECK(softmax_cross_entropy(two, one).loss < 1e-8);
    const std::vector<int> bad{7};
    CHECK_THROWS_AS(softmax_cross_entropy(dom, bad), std::out_of_range);
  }
  SUBCASE("gradients match finite differences") {
    std::mt19937_64 rng(4);
    ParamStore<double> ps;
    ps.add("x", 3, 4).value = random_matrix(3, 4, rng);
    const auto y = mat(3, 4, {1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 0, 0});
    const std::vector<int> cls{0, 3, 2};
    auto bce = gradient_check([&](Tape<double>& t, ParamStore<double>& p) {
      return t.bce_with_logits(t.parameter(p.at("x")), y);
    }, ps);
    CHECK(bce.max_rel_error < 1e-6);
    auto ce = gradient_check([&](Tape<double>& t, ParamStore<double>& p) {
      return t.softmax_cross_entropy(t.parameter(p.at("x")), cls);
    }, ps);
    CHECK(ce.max_rel_error < 1e-6);
    // Analytic CE gradient is (softmax - onehot) / rows.
    const auto lg = softmax_cross_entropy(ps.at("x").value, cls);
    for (std::size_t r = 0; r < 3; ++r) {
      double z = 0;
      for (std::size_t c = 0; c < 4; ++c) z += std::exp(ps.at("x").value(r, c));
      for (std::size_t c = 0; c < 4; ++c) {
        const double want = (std::exp(ps.at("x").value(r, c)) / z - (static_cast<int>(c) == cls[r])) / 3.0;
        CHECK(lg.grad(r, c) == doctest::Approx(want));
      }
    }
  }
}

TEST_CASE("gradient check harness") {
  std::mt19937_64 rng(5);
  ParamStore<double> ps;
  ps.add("a", 4, 5).value = random_matrix(4, 5, rng);
  ps.add("b", 5, 3).value = random_matrix(5, 3, rng);
  ps.add("bias", 1, 3).value = random_matrix(1, 3, rng);
  const auto y = mat(4, 3, {1, 0, 1, 0, 0, 1, 1, 1, 0, 0, 1, 0});

  SUBCASE("matmul") {
    auto r = gradient_check([&](Tape<double>& t, ParamStore<double>& p) {
      return total(t, t.matmul(t.parameter(p.at("a")), t.parameter(p.at("b"))));
    }, ps);
    CHECK(r.max_rel_error < 1e-6);
  }
  SUBCASE("linear layer with bce") {
    auto r = gradient_check([&](Tape<double>& t, ParamStore<double>& p) {
      Var h = t.add_row(t.matmul(t.parameter(p.at("a")), t.parameter(p.at("b"))), t.parameter(p.at("bias")));
      return t.bce_with_logits(h, y);
    }, ps);
    CHECK(r.max_rel_error < 1e-4);
  }
  SUBCASE("composite ops") {
    const std::vector<int> idx{3, 0, 0, 2, 1};
    const std::vector<int> seg{1, 0, 1, 2};
    const std::vector<double> w{0.5, -2.0, 1.5, 3.0};
    auto r = gradient_check([&](Tape<double>& t, ParamStore<double>& p) {
      Var a = t.parameter(p.at("a"));
      Var g = t.gather_rows(a, idx);                      // 5x5
      Var h = t.matmul(g, t.parameter(p.at("b")));        // 5x3
      Var s = t.slice_rows(h, 1, 5);                      // 4x3
      Var m = t.segment_mean(t.scale_rows(s, w), seg, 3);
      Var parts[] = {m, t.shift_rows(m, 1)};
      Var c = t.concat_cols(parts);
      Var rows[] = {t.slice_cols(c, 1, 4), t.slice_cols(t.mean_rows(c), 2, 5)};
      Var stacked = t.concat_rows(rows);
      return total(t, t.relu(t.scale(stacked, 0.7)));
    }, ps);
    CHECK(r.max_rel_error < 1e-6);
  }
  SUBCASE("a corrupted backward is detected") {
    auto r = gradient_check([&](Tape<double>& t, ParamStore<double>& p) {
      Var h = t.matmul(t.parameter(p.at("a")), t.parameter(p.at("b")));
      Var bad = t.elementwise(h, [](double v) { return std::tanh(v); },
                              [](double v) { return -(1.0 - std::tanh(v) * std::tanh(v)); });
      return t.bce_with_logits(bad, y);
    }, ps);
    CHECK(r.max_rel_error > 0.1);
  }
}

TEST_CASE("adam") {
  SUBCASE("first step moves by lr") {
    ParamStore<double> ps;
    auto& p = ps.add("w", 1, 1);
    p.grad(0, 0) = 1.0;
    adam_step(ps, {0.1, 0.9, 0.999, 1e-8}, 1);
    CHECK(p.value(0, 0) == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(p.grad(0, 0) == 0.0);
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    ParamStore<double> ps;
    auto& p = ps.add("w", 2, 2);
    p.value.data = {1, 2, 3, 4};
    for (int s = 1; s <= 5; ++s) adam_step(ps, {}, s);
    CHECK(p.value.data == std::vector<double>{1, 2, 3, 4});
  }
  SUBCASE("deterministic") {
    auto run = [] {
      std::mt19937_64 rng(9);
      ParamStore<float> ps;
      ps.add_glorot("w", 3, 3, rng);
      for (int s = 1; s <= 10; ++s) {
        for (auto& v : ps.at("w").grad.data) v = static_cast<float>(s) * 0.1f;
        adam_step(ps, {}, s);
      }
      return ps.at("w").value;
    };
    CHECK(run() == run());
  }
  SUBCASE("gradient clipping") {
    ParamStore<double> ps;
    auto& p = ps.add("w", 1, 2);
    p.grad.data = {30, 40};
    CHECK(ps.grad_norm() == doctest::Approx(50));
    ps.clip_grad_norm(5.0);
    CHECK(p.grad.data[0] == doctest::Approx(3));
    CHECK(p.grad.data[1] == doctest::Approx(4));
    ps.clip_grad_norm(10.0);
    CHECK(ps.grad_norm() == doctest::Approx(5));
  }
}

TEST_CASE("parameter store") {
  std::mt19937_64 rng(2);
  ParamStore<double> ps;
  ps.add_glorot("w", 10, 20, rng);
  ps.add("b", 1, 20);
  CHECK(ps.num_values() == 220);
  const double limit = std::sqrt(6.0 / 30.0);
  for (double v : ps.at("w").value.data) CHECK(std::abs(v) <= limit);
  CHECK_THROWS(ps.add("w", 1, 1));
  CHECK_THROWS(ps.at("missing"));
  const auto f = ps.converted<float>();
  CHECK(f.at("w").value(3, 4) == static_cast<float>(ps.at("w").value(3, 4)));
}
