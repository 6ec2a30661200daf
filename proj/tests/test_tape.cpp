#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "biasdet/errors.hpp"
#include "biasdet/tape.hpp"

using namespace biasdet;

namespace {

using T = Tape<double>;
using Mat = T::Mat;
using Var = T::Var;
using Builder = std::function<Var(T&, const std::vector<Var>&)>;

Mat random_mat(std::mt19937& gen, Eigen::Index rows, Eigen::Index cols,
               double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Mat m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(gen);
  }
  return m;
}

// Weighted scalar reduction so any op output can feed backward(): the fixed
// weights keep the reduction sensitive to every entry.
Var reduce(T& t, Var v, const Mat& weights) {
  Var prod = t.hadamard(v, t.constant(weights));
  Var col = t.matmul(prod, t.constant(Mat::Ones(weights.cols(), 1)));
  return t.matmul(t.constant(Mat::Ones(1, weights.rows())), col);
}

double eval_forward(const Builder& build, const std::vector<Mat>& leaves) {
  T t;
  std::vector<Var> vars;
  vars.reserve(leaves.size());
  for (const Mat& m : leaves) vars.push_back(t.leaf(m));
  return t.value(build(t, vars))(0, 0);
}

// Central differences against backward() for every element of every leaf.
void check_gradients(const std::vector<Mat>& leaves, const Builder& build,
                     double tol = 1e-7) {
  T t;
  std::vector<Var> vars;
  vars.reserve(leaves.size());
  for (const Mat& m : leaves) vars.push_back(t.leaf(m));
  Var root = build(t, vars);
  t.backward(root);
  std::vector<Mat> grads;
  grads.reserve(vars.size());
  for (Var v : vars) grads.push_back(t.gradient_or_zero(v));

  const double h = 1e-6;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    for (Eigen::Index j = 0; j < leaves[li].cols(); ++j) {
      for (Eigen::Index i = 0; i < leaves[li].rows(); ++i) {
        std::vector<Mat> plus = leaves;
        std::vector<Mat> minus = leaves;
        plus[li](i, j) += h;
        minus[li](i, j) -= h;
        double fd =
            (eval_forward(build, plus) - eval_forward(build, minus)) / (2 * h);
        double a = grads[li](i, j);
        double rel =
            std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
        CAPTURE(li);
        CAPTURE(i);
        CAPTURE(j);
        CHECK(rel < tol);
      }
    }
  }
}

}  // namespace

TEST_CASE("finite differences agree with backward for each primitive") {
  std::mt19937 gen(2024);
  Mat a34 = random_mat(gen, 3, 4);
  Mat b34 = random_mat(gen, 3, 4);
  Mat b42 = random_mat(gen, 4, 2);
  Mat row14 = random_mat(gen, 1, 4);
  Mat col31 = random_mat(gen, 3, 1);

  SUBCASE("matmul") {
    Mat w = random_mat(gen, 3, 2);
    check_gradients({a34, b42}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.matmul(v[0], v[1]), w);
    });
  }
  SUBCASE("add and sub") {
    Mat w = random_mat(gen, 3, 4);
    check_gradients({a34, b34}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.add(v[0], v[1]), w);
    });
    check_gradients({a34, b34}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.sub(v[0], v[1]), w);
    });
  }
  SUBCASE("hadamard") {
    Mat w = random_mat(gen, 3, 4);
    check_gradients({a34, b34}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.hadamard(v[0], v[1]), w);
    });
  }
  SUBCASE("row and column broadcasts") {
    Mat w = random_mat(gen, 3, 4);
    check_gradients({a34, row14}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.add_row_vec(v[0], v[1]), w);
    });
    check_gradients({a34, col31}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.sub_col_vec(v[0], v[1]), w);
    });
    check_gradients({a34, col31}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.mul_col_vec(v[0], v[1]), w);
    });
    check_gradients({a34, row14}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.mul_row_vec(v[0], v[1]), w);
    });
  }
  SUBCASE("scalar_mul") {
    Mat w = random_mat(gen, 3, 4);
    check_gradients({a34}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.scalar_mul(v[0], -2.5), w);
    });
  }
  SUBCASE("pointwise nonlinearities") {
    Mat w = random_mat(gen, 3, 4);
    check_gradients({a34}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.tanh(v[0]), w);
    });
    check_gradients({a34}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.sigmoid(v[0]), w);
    });
    check_gradients({a34}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.gelu(v[0]), w);
    });
  }
  SUBCASE("softmax_rows") {
    Mat w = random_mat(gen, 3, 4);
    check_gradients({a34}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.softmax_rows(v[0]), w);
    });
  }
  SUBCASE("softmax_xent_mean") {
    std::vector<int32_t> labels = {1, 3, 0};
    check_gradients({a34}, [&](T& t, const std::vector<Var>& v) {
      return t.softmax_xent_mean(v[0], labels);
    });
  }
  SUBCASE("gather_rows with repeated indices") {
    std::vector<int32_t> idx = {2, 0, 2, 1, 2};
    Mat w = random_mat(gen, 5, 4);
    check_gradients({a34}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.gather_rows(v[0], idx), w);
    });
  }
  SUBCASE("bag_mean including an empty bag") {
    std::vector<int32_t> offsets = {0, 2, 2, 5};
    std::vector<int32_t> flat = {0, 2, 1, 1, 2};
    Mat w = random_mat(gen, 3, 4);
    check_gradients({a34}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.bag_mean(v[0], offsets, flat), w);
    });
  }
  SUBCASE("concat and slice") {
    Mat w39 = random_mat(gen, 3, 9);
    Mat w64 = random_mat(gen, 6, 4);
    Mat w32 = random_mat(gen, 3, 2);
    Mat w24 = random_mat(gen, 2, 4);
    check_gradients({a34, col31}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.concat_cols({v[0], v[1], v[0]}), w39);
    });
    check_gradients({a34, b34}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.concat_rows({v[0], v[1]}), w64);
    });
    check_gradients({a34}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.slice_cols(v[0], 1, 2), w32);
    });
    check_gradients({a34}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.slice_rows(v[0], 1, 2), w24);
    });
  }
  SUBCASE("rowwise_mean, transpose, rsqrt") {
    Mat w31 = random_mat(gen, 3, 1);
    Mat w43 = random_mat(gen, 4, 3);
    Mat w34 = random_mat(gen, 3, 4);
    check_gradients({a34}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.rowwise_mean(v[0]), w31);
    });
    check_gradients({a34}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.transpose(v[0]), w43);
    });
    Mat pos = random_mat(gen, 3, 4, 0.5, 2.0);
    check_gradients({pos}, [&](T& t, const std::vector<Var>& v) {
      return reduce(t, t.rsqrt(v[0], 1e-5), w34);
    });
  }
}

TEST_CASE("layer_norm and linear composites check out against differences") {
  std::mt19937 gen(7);
  Mat x = random_mat(gen, 4, 6);
  Mat gamma = random_mat(gen, 1, 6, 0.5, 1.5);
  Mat beta = random_mat(gen, 1, 6);
  Mat w = random_mat(gen, 4, 6);
  check_gradients({x, gamma, beta}, [&](T& t, const std::vector<Var>& v) {
    return reduce(t, layer_norm(t, v[0], v[1], v[2]), w);
  });

  Mat wm = random_mat(gen, 6, 3);
  Mat b = random_mat(gen, 1, 3);
  Mat w2 = random_mat(gen, 4, 3);
  check_gradients({x, wm, b}, [&](T& t, const std::vector<Var>& v) {
    return reduce(t, linear(t, v[0], v[1], v[2]), w2);
  });
}

TEST_CASE("composite network mixing many ops differentiates correctly") {
  std::mt19937 gen(11);
  Mat emb = random_mat(gen, 6, 4);
  Mat w1 = random_mat(gen, 8, 5);
  Mat b1 = random_mat(gen, 1, 5);
  Mat w2 = random_mat(gen, 5, 3);
  std::vector<int32_t> idx = {0, 3, 5, 2};
  std::vector<int32_t> labels = {2, 0, 1, 2};
  check_gradients({emb, w1, b1, w2}, [&](T& t, const std::vector<Var>& v) {
    Var g = t.gather_rows(v[0], idx);
    Var both = t.concat_cols({g, t.tanh(g)});
    Var h = t.gelu(linear(t, both, v[1], v[2]));
    Var logits = t.matmul(h, v[3]);
    return t.softmax_xent_mean(logits, labels);
  });
}

TEST_CASE("forward values are right for a couple of spot checks") {
  T t;
  Mat a(2, 2);
  a << 1, 2, 3, 4;
  CHECK(t.value(t.transpose(t.constant(a)))(0, 1) == 3.0);
  Var s = t.slice_cols(t.constant(a), 1, 1);
  CHECK(t.value(s)(0, 0) == 2.0);
  CHECK(t.value(s)(1, 0) == 4.0);
  Var sm = t.softmax_rows(t.constant(Mat::Zero(1, 4)));
  CHECK(t.value(sm)(0, 2) == doctest::Approx(0.25));
}

TEST_CASE("same leaf used twice accumulates both paths") {
  T t;
  Mat x(1, 1);
  x << 3.0;
  Var v = t.leaf(x);
  Var y = t.add(v, v);
  t.backward(y);
  CHECK(t.gradient(v)(0, 0) == 2.0);
}

TEST_CASE("backward resets between calls instead of accumulating") {
  T t;
  Mat x(1, 1);
  x << 2.0;
  Var v = t.leaf(x);
  Var y = t.scalar_mul(v, 5.0);
  t.backward(y);
  t.backward(y);
  CHECK(t.gradient(v)(0, 0) == 5.0);
}

TEST_CASE("backward contract violations throw") {
  T t;
  Var m = t.leaf(Mat::Ones(2, 2));
  CHECK_THROWS_AS(t.backward(m), ContractError);

  Var c = t.constant(Mat::Ones(1, 1));
  CHECK_THROWS_AS(t.backward(c), ContractError);
}

TEST_CASE("gradient access before backward") {
  T t;
  Var v = t.leaf(Mat::Ones(2, 3));
  CHECK_THROWS_AS(t.gradient(v), ContractError);
  Mat z = t.gradient_or_zero(v);
  CHECK(z.rows() == 2);
  CHECK(z.cols() == 3);
  CHECK(z.isZero());
}

TEST_CASE("unused parameter gets a zero gradient, not an error") {
  T t;
  Var used = t.leaf(Mat::Ones(1, 1));
  Var unused = t.leaf(Mat::Ones(2, 2));
  Var y = t.scalar_mul(used, 2.0);
  t.backward(y);
  CHECK(t.gradient_or_zero(unused).isZero());
  CHECK_THROWS_AS(t.gradient(unused), ContractError);
}

TEST_CASE("shape and index violations throw at build time") {
  T t;
  Var a = t.leaf(Mat::Ones(2, 3));
  Var b = t.leaf(Mat::Ones(2, 2));
  CHECK_THROWS_AS(t.matmul(a, a), ContractError);
  CHECK_THROWS_AS(t.add(a, b), ContractError);
  CHECK_THROWS_AS(t.add_row_vec(a, b), ContractError);
  CHECK_THROWS_AS(t.gather_rows(a, {0, 5}), ContractError);
  CHECK_THROWS_AS(t.gather_rows(a, {-1}), ContractError);
  CHECK_THROWS_AS(t.bag_mean(a, {0, 1}, {0, 1}), ContractError);
  CHECK_THROWS_AS(t.bag_mean(a, {1, 2}, {0, 1}), ContractError);
  CHECK_THROWS_AS(t.slice_cols(a, 2, 2), ContractError);
  CHECK_THROWS_AS(t.slice_rows(a, 0, 3), ContractError);
  Var tall = t.leaf(Mat::Ones(3, 3));
  CHECK_THROWS_AS(t.concat_cols({}), ContractError);
  CHECK_THROWS_AS(t.concat_cols({a, tall}), ContractError);
  CHECK_THROWS_AS(t.concat_rows({a, b}), ContractError);
  CHECK_THROWS_AS(t.softmax_xent_mean(a, {0}), ContractError);
  CHECK_THROWS_AS(t.softmax_xent_mean(a, {0, 3}), ContractError);
  CHECK_THROWS_AS(t.value(-1), ContractError);
  CHECK_THROWS_AS(t.value(999), ContractError);
}
