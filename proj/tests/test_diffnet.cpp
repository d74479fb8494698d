#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "dhia/errors.hpp"
#include "dhia/mlp.hpp"
#include "dhia/tensor_io.hpp"
#include "test_support.hpp"

using namespace dhia;
using dhia::testing::grad_check;
using dhia::testing::random_matrix;

namespace {

ParamStore single(Matrix m) {
  ParamStore s;
  s.add(std::move(m));
  return s;
}

// Reduce an op's output to a scalar with fixed random weights so every output entry matters.
Var weighted_sum(Tape& t, Var out, const Matrix& w) { return sum(t, hadamard(t, out, t.constant(w))); }

}  // namespace

TEST_CASE("matrix products agree with explicit loops") {
  const Matrix a{{1, 2, 3}, {4, 5, 6}};
  const Matrix b{{1, 0}, {0, 1}, {2, -1}};
  CHECK(matmul(a, b) == Matrix{{7, -1}, {16, -1}});
  CHECK(matmul_nt(a, a) == Matrix{{14, 32}, {32, 77}});
  CHECK(matmul_tn(a, a) == matmul(transpose(a), a));
  CHECK(row_argmax(Matrix{{0.5, 0.5}, {0.1, 0.9}, {2, 2}}) == std::vector<std::size_t>{0, 1, 0});
  CHECK_THROWS_AS(matmul(a, a), DimensionError);
}

TEST_CASE("zero network gives zero output") {
  MlpSpec spec{{3, 5, 2}, Activation::relu, Activation::identity};
  const ParamStore p = zero_params(spec);
  const Matrix out = mlp_forward(spec, p, Matrix{{1, -2, 3}, {0.5, 0.5, 9}});
  CHECK(out == Matrix(2, 2));
}

TEST_CASE("softmax head on zero logits is uniform") {
  MlpSpec spec{{2, 2}, Activation::relu, Activation::softmax};
  const ParamStore p = zero_params(spec);
  const Matrix out = mlp_forward(spec, p, Matrix{{0, 0}});
  CHECK(out(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(out(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("hand-computed relu network") {
  // pre = [1,-1] W0 + b0 = [-1.5, 2.5]; relu -> [0, 2.5]; out = 2.5 * -1 + 0.25
  MlpSpec spec{{2, 2, 1}, Activation::relu, Activation::identity};
  ParamStore p;
  p.add(Matrix{{1, 2}, {3, -1}});
  p.add(Matrix{{0.5, -0.5}});
  p.add(Matrix{{2}, {-1}});
  p.add(Matrix{{0.25}});
  const Matrix out = mlp_forward(spec, p, Matrix{{1, -1}});
  CHECK(out(0, 0) == doctest::Approx(-2.25).epsilon(1e-15));
}

TEST_CASE("width mismatch names the layer") {
  MlpSpec spec{{3, 4, 2}, Activation::relu, Activation::identity};
  const ParamStore p = zero_params(spec);
  try {
    mlp_forward(spec, p, Matrix(1, 5));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
  }
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS((MlpSpec{{3}, Activation::relu, Activation::identity}.validate()), ConfigError);
  CHECK_THROWS_AS((MlpSpec{{3, 0, 1}, Activation::relu, Activation::identity}.validate()), ConfigError);
  CHECK_THROWS_AS(activation_from_string("tanh"), ConfigError);
  CHECK(activation_from_string(to_string(Activation::softplus)) == Activation::softplus);
}

TEST_CASE("initialisation bounds") {
  std::mt19937_64 rng(3);
  MlpSpec spec{{10, 6, 4}, Activation::relu, Activation::softmax};
  const ParamStore p = init_params(spec, rng);
  REQUIRE(p.tensor_count() == 4);
  const double bound0 = std::sqrt(6.0 / 16.0);
  for (double w : p.values[0].data()) CHECK(std::abs(w) <= bound0);
  for (double b : p.values[1].data()) CHECK(b == 0.0);
  CHECK(p.first_moment[2] == Matrix(6, 4));
  CHECK(p.step == 0);
}

TEST_CASE("softmax rows: simplex and shift invariance") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix logits = random_matrix(4, 5, rng, -30, 30);
    Matrix shifted = logits;
    for (std::size_t r = 0; r < shifted.rows(); ++r)
      for (double& x : shifted.row(r)) x += 700.0 * static_cast<double>(r + 1);
    Tape t;
    const Matrix a = t.value(softmax_rows(t, t.constant(logits)));
    const Matrix b = t.value(softmax_rows(t, t.constant(shifted)));
    for (std::size_t r = 0; r < a.rows(); ++r) {
      double s = 0.0;
      for (double x : a.row(r)) {
        CHECK(x >= 0.0);
        s += x;
      }
      CHECK(std::abs(s - 1.0) <= 1e-6);
    }
    CHECK(max_abs_diff(a, b) <= 1e-12);
  }
}

TEST_CASE("softplus is strictly positive") {
  std::mt19937_64 rng(5);
  Tape t;
  const Matrix out = t.value(softplus(t, t.constant(random_matrix(8, 8, rng, -30, 30))));
  for (double x : out.data()) CHECK(x > 0.0);
  const Matrix zero = t.value(softplus(t, t.constant(Matrix(1, 1))));
  CHECK(zero(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("backward on a constant loss gives zero gradients") {
  ParamStore p = single(Matrix{{1, 2}});
  Tape t;
  const Var c = sum(t, t.constant(Matrix{{3, 4}}));
  const Gradients g = t.backward(c);
  CHECK_FALSE(g.touched(p));
  CHECK(g.of(p)[0] == Matrix(1, 2));
}

TEST_CASE("sum of a weight matrix has a gradient of ones") {
  ParamStore a = single(Matrix{{1, 2}, {3, 4}});
  ParamStore b = single(Matrix{{5}});
  Tape t;
  (void)t.parameter(b, 0);
  const Var loss = sum(t, t.parameter(a, 0));
  const Gradients g = t.backward(loss);
  CHECK(g.of(a)[0] == Matrix(2, 2, 1.0));
  CHECK(g.of(b)[0] == Matrix(1, 1));
}

TEST_CASE("backward contract errors") {
  ParamStore a = single(Matrix{{1, 2}});
  {
    Tape t;
    const Var x = t.parameter(a, 0);
    CHECK_THROWS_AS(t.backward(x), ContractError);
  }
  {
    Tape t;
    const Var s = sum(t, t.parameter(a, 0));
    (void)t.constant(Matrix(1, 1));
    CHECK_THROWS_AS(t.backward(s), ContractError);
  }
  {
    Tape t;
    const Var s = sum(t, t.constant(Matrix{{std::numeric_limits<double>::infinity()}}));
    CHECK_THROWS_AS(t.backward(s), NumericError);
  }
}

TEST_CASE("fan-out accumulates gradients") {
  ParamStore a = single(Matrix{{2.0}});
  Tape t;
  const Var x = t.parameter(a, 0);
  const Var loss = sum(t, add(t, hadamard(t, x, x), scale(t, x, 3.0)));  // x^2 + 3x
  const Gradients g = t.backward(loss);
  CHECK(g.of(a)[0](0, 0) == doctest::Approx(7.0));
}

TEST_CASE("every primitive matches finite differences") {
  using Unary = std::function<Var(Tape&, Var)>;
  const std::vector<std::pair<std::string, Unary>> unary = {
      {"relu", [](Tape& t, Var a) { return relu(t, a); }},
      {"softplus", [](Tape& t, Var a) { return softplus(t, a); }},
      {"softmax_rows", [](Tape& t, Var a) { return softmax_rows(t, a); }},
      {"log_softmax_rows", [](Tape& t, Var a) { return log_softmax_rows(t, a); }},
      {"abs", [](Tape& t, Var a) { return abs(t, a); }},
      {"square", [](Tape& t, Var a) { return square(t, a); }},
      {"scale", [](Tape& t, Var a) { return scale(t, a, -1.7); }},
      {"sum", [](Tape& t, Var a) { return sum(t, a); }},
      {"mean", [](Tape& t, Var a) { return mean(t, a); }},
      {"col_mean", [](Tape& t, Var a) { return col_mean(t, a); }},
      {"xlogx", [](Tape& t, Var a) { return xlogx(t, softmax_rows(t, a)); }},
  };
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t r = 1 + rng() % 8;
    const std::size_t c = 1 + rng() % 8;
    for (const auto& [name, op] : unary) {
      ParamStore p = single(random_matrix(r, c, rng, -2, 2));
      Tape probe;
      const Matrix w = random_matrix(probe.value(op(probe, probe.constant(p.values[0]))).rows(),
                                     probe.value(op(probe, probe.constant(p.values[0]))).cols(), rng);
      const auto res = grad_check({&p}, [&](Tape& t) { return weighted_sum(t, op(t, t.parameter(p, 0)), w); });
      INFO(name << " " << res.where);
      CHECK(res.worst <= 1e-3);
    }

    ParamStore a = single(random_matrix(r, c, rng));
    ParamStore b = single(random_matrix(c, 1 + rng() % 8, rng));
    ParamStore b2 = single(random_matrix(r, c, rng));
    ParamStore bias = single(random_matrix(1, c, rng));
    ParamStore s = single(random_matrix(1, 1, rng));
    ParamStore sq = single(random_matrix(r, r, rng));
    const Matrix wmm = random_matrix(r, b.values[0].cols(), rng);
    const Matrix wrc = random_matrix(r, c, rng);
    const Matrix wrr = random_matrix(r, r, rng);
    const Matrix wr1 = random_matrix(r, 1, rng);
    std::vector<double> rw(r);
    for (double& x : rw) x = std::uniform_real_distribution<double>(-2, 2)(rng);

    auto check = [&](const std::string& name, std::vector<ParamStore*> stores, std::function<Var(Tape&)> f) {
      const auto res = grad_check(stores, f);
      INFO(name << " " << res.where);
      CHECK(res.worst <= 1e-3);
    };
    check("matmul", {&a, &b}, [&](Tape& t) { return weighted_sum(t, matmul(t, t.parameter(a, 0), t.parameter(b, 0)), wmm); });
    check("matmul_nt", {&a, &b2},
          [&](Tape& t) { return weighted_sum(t, matmul_nt(t, t.parameter(a, 0), t.parameter(b2, 0)), wrr); });
    check("add_row_bias", {&a, &bias},
          [&](Tape& t) { return weighted_sum(t, add_row_bias(t, t.parameter(a, 0), t.parameter(bias, 0)), wrc); });
    check("add/sub/hadamard", {&a, &b2}, [&](Tape& t) {
      const Var x = t.parameter(a, 0), y = t.parameter(b2, 0);
      return weighted_sum(t, hadamard(t, add(t, x, y), sub(t, x, y)), wrc);
    });
    check("sub_scalar", {&a, &s},
          [&](Tape& t) { return weighted_sum(t, sub_scalar(t, t.parameter(a, 0), t.parameter(s, 0)), wrc); });
    check("diag", {&sq}, [&](Tape& t) { return weighted_sum(t, diag(t, t.parameter(sq, 0)), wr1); });
    check("row_scale", {&a}, [&](Tape& t) { return weighted_sum(t, row_scale(t, t.parameter(a, 0), rw), wrc); });
    check("select_rows", {&a, &b2}, [&](Tape& t) {
      const Var srcs[] = {t.parameter(a, 0), t.parameter(b2, 0)};
      std::vector<RowRef> picks;
      for (std::size_t i = 0; i < r; ++i) picks.push_back(RowRef{i % 2, (i * 3) % r});
      return weighted_sum(t, select_rows(t, srcs, picks), wrc);
    });
    check("group_mean_rows", {&a}, [&](Tape& t) {
      std::vector<std::vector<std::size_t>> groups(r);
      for (std::size_t g = 0; g < r; ++g)
        for (std::size_t i = 0; i <= g; ++i) groups[g].push_back((i * 5 + g) % r);
      return weighted_sum(t, group_mean_rows(t, t.parameter(a, 0), groups), wrc);
    });
  }
}

TEST_CASE("adam: zero gradient leaves parameters and decays moments") {
  ParamStore p = single(Matrix{{1.0, -2.0}});
  p.first_moment[0] = Matrix{{0.5, 0.5}};
  p.second_moment[0] = Matrix{{0.25, 0.25}};
  adam_step(p, {Matrix(1, 2)}, AdamConfig{1e-3});
  CHECK(p.values[0] == Matrix{{1.0, -2.0}});
  CHECK(p.first_moment[0](0, 0) == doctest::Approx(0.45));
  CHECK(p.second_moment[0](0, 0) == doctest::Approx(0.25 * 0.999));
  CHECK(p.step == 1);
}

TEST_CASE("adam: first step moves by lr") {
  // m_hat = 1, v_hat = 1, so the update is lr / (1 + eps).
  ParamStore p = single(Matrix{{0.0}});
  const double lr = 1e-3;
  adam_step(p, {Matrix{{1.0}}}, AdamConfig{lr});
  CHECK(p.values[0](0, 0) == doctest::Approx(-lr / (1.0 + 1e-8)).epsilon(1e-12));
  CHECK(std::abs(p.values[0](0, 0) + lr) <= 1e-10);
}

TEST_CASE("adam: only coordinates with nonzero gradient move") {
  ParamStore p = single(Matrix{{1.0, 1.0, 1.0}});
  adam_step(p, {Matrix{{0.5, 0.0, -0.5}}}, AdamConfig{1e-2});
  CHECK(p.values[0](0, 0) < 1.0);
  CHECK(p.values[0](0, 1) == 1.0);
  CHECK(p.values[0](0, 2) > 1.0);
}

TEST_CASE("adam: determinism and config errors") {
  std::mt19937_64 rng(9);
  ParamStore a = single(random_matrix(3, 3, rng));
  ParamStore b = a;
  const Matrix g = random_matrix(3, 3, rng);
  for (int i = 0; i < 5; ++i) {
    adam_step(a, {g}, AdamConfig{1e-3});
    adam_step(b, {g}, AdamConfig{1e-3});
  }
  CHECK(a.values == b.values);
  CHECK(a.second_moment == b.second_moment);
  CHECK_THROWS_AS(adam_step(a, {g}, AdamConfig{0.0}), ConfigError);
  CHECK_THROWS_AS(adam_step(a, {g}, AdamConfig{-1.0}), ConfigError);
  CHECK_THROWS_AS(adam_step(a, {Matrix(2, 2)}, AdamConfig{1e-3}), DimensionError);
}

TEST_CASE("tensor container round-trips bit for bit") {
  std::mt19937_64 rng(1);
  std::vector<Matrix> tensors = {random_matrix(3, 4, rng), Matrix(0, 0), Matrix{{-0.0, 5e-324, 1e308}}};
  std::stringstream buf;
  write_tensor_container(buf, tensors);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 4) == "DHIA");
  CHECK(bytes.size() == 4 + 4 + 8 + 3 * 16 + 8 * (12 + 0 + 3));
  std::stringstream in(bytes);
  const auto back = read_tensor_container(in);
  REQUIRE(back.size() == tensors.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    REQUIRE(back[i].same_shape(tensors[i]));
    CHECK(std::memcmp(back[i].data().data(), tensors[i].data().data(), 8 * back[i].size()) == 0);
  }

  std::stringstream bad_magic("XXXX" + bytes.substr(4));
  CHECK_THROWS_AS(read_tensor_container(bad_magic), DataError);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_tensor_container(truncated), DataError);
}
