#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "biasdet/errors.hpp"

namespace biasdet {

// Reverse-mode autodiff over dense dynamic matrices. Nodes are created
// eagerly (forward values computed at build time) and backward() replays the
// tape in reverse. Shapes are validated at build time; a mismatch is a
// ContractError.
template <typename Scalar>
class Tape {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Var = int;

  enum class Op {
    kLeaf,
    kConst,
    kMatMul,
    kAdd,
    kSub,
    kHadamard,
    kAddRowVec,
    kSubColVec,
    kMulColVec,
    kMulRowVec,
    kScalarMul,
    kTanh,
    kSigmoid,
    kGelu,
    kSoftmaxRows,
    kSoftmaxXentMean,
    kGatherRows,
    kBagMean,
    kConcatCols,
    kConcatRows,
    kSliceCols,
    kSliceRows,
    kRowwiseMean,
    kTranspose,
    kRsqrt,
  };

  struct Node {
    Op op;
    std::vector<Var> inputs;
    Mat value;
    Mat grad;
    bool requires_grad = false;
    bool grad_ready = false;
    Mat cache;                      // softmax probabilities and similar
    std::vector<int32_t> indices;   // gather / bag-flat / labels
    std::vector<int32_t> offsets;   // bag boundaries
    Scalar k = Scalar(0);           // scalar multiplier or epsilon
    int begin = 0;
    int count = 0;
  };

  Var leaf(Mat value, bool requires_grad = true) {
    return push(Op::kLeaf, {}, std::move(value), requires_grad);
  }

  Var constant(Mat value) { return push(Op::kConst, {}, std::move(value), false); }

  Var matmul(Var a, Var b) {
    check(a);
    check(b);
    if (val(a).cols() != val(b).rows()) {
      throw ContractError("tape: matmul inner dimensions differ");
    }
    return push(Op::kMatMul, {a, b}, val(a) * val(b), needs(a) || needs(b));
  }

  Var add(Var a, Var b) {
    require_same_shape(a, b, "add");
    return push(Op::kAdd, {a, b}, val(a) + val(b), needs(a) || needs(b));
  }

  Var sub(Var a, Var b) {
    require_same_shape(a, b, "sub");
    return push(Op::kSub, {a, b}, val(a) - val(b), needs(a) || needs(b));
  }

  Var hadamard(Var a, Var b) {
    require_same_shape(a, b, "hadamard");
    return push(Op::kHadamard, {a, b}, val(a).cwiseProduct(val(b)),
                needs(a) || needs(b));
  }

  // a: R x C, row: 1 x C added to every row.
  Var add_row_vec(Var a, Var row) {
    check(a);
    check(row);
    if (val(row).rows() != 1 || val(row).cols() != val(a).cols()) {
      throw ContractError("tape: add_row_vec operand is not a matching row");
    }
    Mat out = val(a);
    out.rowwise() += val(row).row(0);
    return push(Op::kAddRowVec, {a, row}, std::move(out), needs(a) || needs(row));
  }

  // a: R x C, col: R x 1 subtracted from every column.
  Var sub_col_vec(Var a, Var col) {
    check(a);
    check(col);
    if (val(col).cols() != 1 || val(col).rows() != val(a).rows()) {
      throw ContractError("tape: sub_col_vec operand is not a matching column");
    }
    Mat out = val(a);
    out.colwise() -= val(col).col(0);
    return push(Op::kSubColVec, {a, col}, std::move(out), needs(a) || needs(col));
  }

  // a: R x C, col: R x 1, each row of a scaled by its entry of col.
  Var mul_col_vec(Var a, Var col) {
    check(a);
    check(col);
    if (val(col).cols() != 1 || val(col).rows() != val(a).rows()) {
      throw ContractError("tape: mul_col_vec operand is not a matching column");
    }
    Mat out = val(a).array().colwise() * val(col).col(0).array();
    return push(Op::kMulColVec, {a, col}, std::move(out), needs(a) || needs(col));
  }

  // a: R x C, row: 1 x C, each column of a scaled by its entry of row.
  Var mul_row_vec(Var a, Var row) {
    check(a);
    check(row);
    if (val(row).rows() != 1 || val(row).cols() != val(a).cols()) {
      throw ContractError("tape: mul_row_vec operand is not a matching row");
    }
    Mat out = val(a).array().rowwise() * val(row).row(0).array();
    return push(Op::kMulRowVec, {a, row}, std::move(out), needs(a) || needs(row));
  }

  Var scalar_mul(Var a, Scalar k) {
    check(a);
    Var v = push(Op::kScalarMul, {a}, val(a) * k, needs(a));
    node(v).k = k;
    return v;
  }

  Var tanh(Var a) {
    check(a);
    return push(Op::kTanh, {a}, val(a).array().tanh().matrix(), needs(a));
  }

  Var sigmoid(Var a) {
    check(a);
    Mat out = (Scalar(1) / (Scalar(1) + (-val(a).array()).exp())).matrix();
    return push(Op::kSigmoid, {a}, std::move(out), needs(a));
  }

  // Exact erf form: 0.5 * x * (1 + erf(x / sqrt(2))).
  Var gelu(Var a) {
    check(a);
    const Scalar inv_sqrt2 = Scalar(0.7071067811865475244L);
    Mat out = val(a);
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      for (Eigen::Index i = 0; i < out.rows(); ++i) {
        Scalar x = out(i, j);
        out(i, j) = Scalar(0.5) * x * (Scalar(1) + std::erf(x * inv_sqrt2));
      }
    }
    return push(Op::kGelu, {a}, std::move(out), needs(a));
  }

  Var softmax_rows(Var a) {
    check(a);
    Mat out = softmax_of(val(a));
    return push(Op::kSoftmaxRows, {a}, std::move(out), needs(a));
  }

  // Mean cross-entropy of row-wise softmax(logits) against integer labels.
  // Produces a 1x1 value.
  Var softmax_xent_mean(Var logits, const std::vector<int32_t>& labels) {
    check(logits);
    if (static_cast<Eigen::Index>(labels.size()) != val(logits).rows()) {
      throw ContractError("tape: label count differs from logit rows");
    }
    Mat p = softmax_of(val(logits));
    Scalar loss = 0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      int32_t y = labels[static_cast<std::size_t>(i)];
      if (y < 0 || y >= p.cols()) {
        throw ContractError("tape: label out of range");
      }
      loss -= std::log(p(i, y));
    }
    loss /= Scalar(p.rows());
    Mat out(1, 1);
    out(0, 0) = loss;
    Var v = push(Op::kSoftmaxXentMean, {logits}, std::move(out), needs(logits));
    node(v).cache = std::move(p);
    node(v).indices = labels;
    return v;
  }

  // Rows of `a` selected by index; repeated indices allowed.
  Var gather_rows(Var a, const std::vector<int32_t>& idx) {
    check(a);
    Mat out(static_cast<Eigen::Index>(idx.size()), val(a).cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0 || idx[i] >= val(a).rows()) {
        throw ContractError("tape: gather index out of range");
      }
      out.row(static_cast<Eigen::Index>(i)) = val(a).row(idx[i]);
    }
    Var v = push(Op::kGatherRows, {a}, std::move(out), needs(a));
    node(v).indices = idx;
    return v;
  }

  // Row b of the output is the mean of the rows of `a` listed in
  // flat[offsets[b] .. offsets[b+1]); an empty bag yields a zero row.
  Var bag_mean(Var a, const std::vector<int32_t>& offsets,
               const std::vector<int32_t>& flat) {
    check(a);
    if (offsets.empty() || offsets.front() != 0 ||
        offsets.back() != static_cast<int32_t>(flat.size())) {
      throw ContractError("tape: bag offsets malformed");
    }
    Eigen::Index bags = static_cast<Eigen::Index>(offsets.size()) - 1;
    Mat out = Mat::Zero(bags, val(a).cols());
    for (Eigen::Index b = 0; b < bags; ++b) {
      int32_t lo = offsets[static_cast<std::size_t>(b)];
      int32_t hi = offsets[static_cast<std::size_t>(b) + 1];
      if (hi < lo) throw ContractError("tape: bag offsets not monotone");
      for (int32_t i = lo; i < hi; ++i) {
        if (flat[static_cast<std::size_t>(i)] < 0 ||
            flat[static_cast<std::size_t>(i)] >= val(a).rows()) {
          throw ContractError("tape: bag index out of range");
        }
        out.row(b) += val(a).row(flat[static_cast<std::size_t>(i)]);
      }
      if (hi > lo) out.row(b) /= Scalar(hi - lo);
    }
    Var v = push(Op::kBagMean, {a}, std::move(out), needs(a));
    node(v).indices = flat;
    node(v).offsets = offsets;
    return v;
  }

  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("tape: concat of nothing");
    Eigen::Index rows = val(parts[0]).rows();
    Eigen::Index cols = 0;
    bool rg = false;
    for (Var p : parts) {
      check(p);
      if (val(p).rows() != rows) {
        throw ContractError("tape: concat_cols row mismatch");
      }
      cols += val(p).cols();
      rg = rg || needs(p);
    }
    Mat out(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
      out.middleCols(at, val(p).cols()) = val(p);
      at += val(p).cols();
    }
    return push(Op::kConcatCols, parts, std::move(out), rg);
  }

  Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("tape: concat of nothing");
    Eigen::Index cols = val(parts[0]).cols();
    Eigen::Index rows = 0;
    bool rg = false;
    for (Var p : parts) {
      check(p);
      if (val(p).cols() != cols) {
        throw ContractError("tape: concat_rows column mismatch");
      }
      rows += val(p).rows();
      rg = rg || needs(p);
    }
    Mat out(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
      out.middleRows(at, val(p).rows()) = val(p);
      at += val(p).rows();
    }
    return push(Op::kConcatRows, parts, std::move(out), rg);
  }

  Var slice_cols(Var a, int begin, int count) {
    check(a);
    if (begin < 0 || count < 0 || begin + count > val(a).cols()) {
      throw ContractError("tape: slice_cols out of range");
    }
    Var v = push(Op::kSliceCols, {a}, val(a).middleCols(begin, count), needs(a));
    node(v).begin = begin;
    node(v).count = count;
    return v;
  }

  Var slice_rows(Var a, int begin, int count) {
    check(a);
    if (begin < 0 || count < 0 || begin + count > val(a).rows()) {
      throw ContractError("tape: slice_rows out of range");
    }
    Var v = push(Op::kSliceRows, {a}, val(a).middleRows(begin, count), needs(a));
    node(v).begin = begin;
    node(v).count = count;
    return v;
  }

  Var rowwise_mean(Var a) {
    check(a);
    Mat out = val(a).rowwise().mean();
    return push(Op::kRowwiseMean, {a}, std::move(out), needs(a));
  }

  Var transpose(Var a) {
    check(a);
    return push(Op::kTranspose, {a}, val(a).transpose(), needs(a));
  }

  // Elementwise (x + eps)^(-1/2).
  Var rsqrt(Var a, Scalar eps) {
    check(a);
    Mat out = (val(a).array() + eps).rsqrt().matrix();
    Var v = push(Op::kRsqrt, {a}, std::move(out), needs(a));
    node(v).k = eps;
    return v;
  }

  const Mat& value(Var v) const {
    check(v);
    return nodes_[static_cast<std::size_t>(v)].value;
  }

  const Mat& gradient(Var v) const {
    check(v);
    const Node& n = nodes_[static_cast<std::size_t>(v)];
    if (!n.grad_ready) throw ContractError("tape: gradient not computed");
    return n.grad;
  }

  // Zero matrix when no gradient flowed to v (e.g. a parameter unused by
  // this batch).
  Mat gradient_or_zero(Var v) const {
    check(v);
    const Node& n = nodes_[static_cast<std::size_t>(v)];
    if (!n.grad_ready) return Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  std::size_t size() const { return nodes_.size(); }

  // Seeds d(root)/d(root) = 1 and accumulates gradients for every node with
  // requires_grad on the path. The root must be 1x1 (a scalar loss).
  void backward(Var root) {
    check(root);
    if (val(root).rows() != 1 || val(root).cols() != 1) {
      throw ContractError("tape: backward root is not scalar");
    }
    if (!needs(root)) {
      throw ContractError("tape: backward root has no gradient path");
    }
    for (Node& n : nodes_) {
      n.grad_ready = false;
    }
    Node& r = node(root);
    r.grad = Mat::Ones(1, 1);
    r.grad_ready = true;
    for (Var v = root; v >= 0; --v) {
      Node& n = node(v);
      if (!n.grad_ready || !n.requires_grad) continue;
      propagate(n);
    }
  }

 private:
  std::vector<Node> nodes_;

  Node& node(Var v) { return nodes_[static_cast<std::size_t>(v)]; }
  const Mat& val(Var v) const { return nodes_[static_cast<std::size_t>(v)].value; }
  bool needs(Var v) const {
    return nodes_[static_cast<std::size_t>(v)].requires_grad;
  }

  void check(Var v) const {
    if (v < 0 || static_cast<std::size_t>(v) >= nodes_.size()) {
      throw ContractError("tape: variable from another tape or uninitialized");
    }
  }

  void require_same_shape(Var a, Var b, const char* what) const {
    check(a);
    check(b);
    if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols()) {
      throw ContractError(std::string("tape: shape mismatch in ") + what);
    }
  }

  Var push(Op op, std::vector<Var> inputs, Mat value, bool requires_grad) {
    Node n;
    n.op = op;
    n.inputs = std::move(inputs);
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return static_cast<Var>(nodes_.size()) - 1;
  }

  static Mat softmax_of(const Mat& logits) {
    Mat p(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      Scalar m = logits.row(i).maxCoeff();
      Eigen::Array<Scalar, 1, Eigen::Dynamic> e =
          (logits.row(i).array() - m).exp();
      p.row(i) = (e / e.sum()).matrix();
    }
    return p;
  }

  void accumulate(Var v, const Mat& g) {
    Node& n = node(v);
    if (!n.requires_grad) return;
    if (!n.grad_ready) {
      n.grad = Mat::Zero(n.value.rows(), n.value.cols());
      n.grad_ready = true;
    }
    n.grad += g;
  }

  void propagate(Node& n) {
    const Mat& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
      case Op::kConst:
        break;
      case Op::kMatMul: {
        Var a = n.inputs[0], b = n.inputs[1];
        if (needs(a)) accumulate(a, g * val(b).transpose());
        if (needs(b)) accumulate(b, val(a).transpose() * g);
        break;
      }
      case Op::kAdd:
        accumulate(n.inputs[0], g);
        accumulate(n.inputs[1], g);
        break;
      case Op::kSub: {
        accumulate(n.inputs[0], g);
        if (needs(n.inputs[1])) accumulate(n.inputs[1], -g);
        break;
      }
      case Op::kHadamard: {
        Var a = n.inputs[0], b = n.inputs[1];
        if (needs(a)) accumulate(a, g.cwiseProduct(val(b)));
        if (needs(b)) accumulate(b, g.cwiseProduct(val(a)));
        break;
      }
      case Op::kAddRowVec: {
        accumulate(n.inputs[0], g);
        if (needs(n.inputs[1])) accumulate(n.inputs[1], g.colwise().sum());
        break;
      }
      case Op::kSubColVec: {
        accumulate(n.inputs[0], g);
        if (needs(n.inputs[1])) accumulate(n.inputs[1], -g.rowwise().sum());
        break;
      }
      case Op::kMulColVec: {
        Var a = n.inputs[0], c = n.inputs[1];
        if (needs(a)) {
          accumulate(a,
                     (g.array().colwise() * val(c).col(0).array()).matrix());
        }
        if (needs(c)) accumulate(c, g.cwiseProduct(val(a)).rowwise().sum());
        break;
      }
      case Op::kMulRowVec: {
        Var a = n.inputs[0], r = n.inputs[1];
        if (needs(a)) {
          accumulate(a,
                     (g.array().rowwise() * val(r).row(0).array()).matrix());
        }
        if (needs(r)) accumulate(r, g.cwiseProduct(val(a)).colwise().sum());
        break;
      }
      case Op::kScalarMul:
        accumulate(n.inputs[0], g * n.k);
        break;
      case Op::kTanh: {
        Mat d = (Scalar(1) - n.value.array().square()).matrix();
        accumulate(n.inputs[0], g.cwiseProduct(d));
        break;
      }
      case Op::kSigmoid: {
        Mat d = (n.value.array() * (Scalar(1) - n.value.array())).matrix();
        accumulate(n.inputs[0], g.cwiseProduct(d));
        break;
      }
      case Op::kGelu: {
        const Mat& x = val(n.inputs[0]);
        const Scalar inv_sqrt2 = Scalar(0.7071067811865475244L);
        const Scalar inv_sqrt2pi = Scalar(0.3989422804014326779L);
        Mat d(x.rows(), x.cols());
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
          for (Eigen::Index i = 0; i < x.rows(); ++i) {
            Scalar xv = x(i, j);
            Scalar cdf =
                Scalar(0.5) * (Scalar(1) + std::erf(xv * inv_sqrt2));
            Scalar pdf = inv_sqrt2pi * std::exp(Scalar(-0.5) * xv * xv);
            d(i, j) = cdf + xv * pdf;
          }
        }
        accumulate(n.inputs[0], g.cwiseProduct(d));
        break;
      }
      case Op::kSoftmaxRows: {
        const Mat& y = n.value;
        Mat gy = g.cwiseProduct(y);
        Mat dot = gy.rowwise().sum();
        Mat d = gy - (y.array().colwise() * dot.col(0).array()).matrix();
        accumulate(n.inputs[0], d);
        break;
      }
      case Op::kSoftmaxXentMean: {
        const Mat& p = n.cache;
        Mat d = p;
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
          d(i, n.indices[static_cast<std::size_t>(i)]) -= Scalar(1);
        }
        d *= g(0, 0) / Scalar(d.rows());
        accumulate(n.inputs[0], d);
        break;
      }
      case Op::kGatherRows: {
        Var a = n.inputs[0];
        if (!needs(a)) break;
        Mat d = Mat::Zero(val(a).rows(), val(a).cols());
        for (std::size_t i = 0; i < n.indices.size(); ++i) {
          d.row(n.indices[i]) += g.row(static_cast<Eigen::Index>(i));
        }
        accumulate(a, d);
        break;
      }
      case Op::kBagMean: {
        Var a = n.inputs[0];
        if (!needs(a)) break;
        Mat d = Mat::Zero(val(a).rows(), val(a).cols());
        Eigen::Index bags = static_cast<Eigen::Index>(n.offsets.size()) - 1;
        for (Eigen::Index b = 0; b < bags; ++b) {
          int32_t lo = n.offsets[static_cast<std::size_t>(b)];
          int32_t hi = n.offsets[static_cast<std::size_t>(b) + 1];
          if (hi == lo) continue;
          Scalar inv = Scalar(1) / Scalar(hi - lo);
          for (int32_t i = lo; i < hi; ++i) {
            d.row(n.indices[static_cast<std::size_t>(i)]) += g.row(b) * inv;
          }
        }
        accumulate(a, d);
        break;
      }
      case Op::kConcatCols: {
        Eigen::Index at = 0;
        for (Var p : n.inputs) {
          Eigen::Index w = val(p).cols();
          if (needs(p)) accumulate(p, g.middleCols(at, w));
          at += w;
        }
        break;
      }
      case Op::kConcatRows: {
        Eigen::Index at = 0;
        for (Var p : n.inputs) {
          Eigen::Index h = val(p).rows();
          if (needs(p)) accumulate(p, g.middleRows(at, h));
          at += h;
        }
        break;
      }
      case Op::kSliceCols: {
        Var a = n.inputs[0];
        if (!needs(a)) break;
        Mat d = Mat::Zero(val(a).rows(), val(a).cols());
        d.middleCols(n.begin, n.count) = g;
        accumulate(a, d);
        break;
      }
      case Op::kSliceRows: {
        Var a = n.inputs[0];
        if (!needs(a)) break;
        Mat d = Mat::Zero(val(a).rows(), val(a).cols());
        d.middleRows(n.begin, n.count) = g;
        accumulate(a, d);
        break;
      }
      case Op::kRowwiseMean: {
        Var a = n.inputs[0];
        if (!needs(a)) break;
        Scalar inv = Scalar(1) / Scalar(val(a).cols());
        Mat d = (g.col(0) * inv).replicate(1, val(a).cols());
        accumulate(a, d);
        break;
      }
      case Op::kTranspose:
        accumulate(n.inputs[0], g.transpose());
        break;
      case Op::kRsqrt: {
        Mat d = Scalar(-0.5) * n.value.array().cube().matrix();
        accumulate(n.inputs[0], g.cwiseProduct(d));
        break;
      }
    }
  }
};

// Layer normalization over the last dimension, built from tape primitives.
template <typename Scalar>
typename Tape<Scalar>::Var layer_norm(Tape<Scalar>& t,
                                      typename Tape<Scalar>::Var x,
                                      typename Tape<Scalar>::Var gamma,
                                      typename Tape<Scalar>::Var beta,
                                      Scalar eps = Scalar(1e-5)) {
  auto mu = t.rowwise_mean(x);
  auto xc = t.sub_col_vec(x, mu);
  auto var = t.rowwise_mean(t.hadamard(xc, xc));
  auto rstd = t.rsqrt(var, eps);
  auto xn = t.mul_col_vec(xc, rstd);
  return t.add_row_vec(t.mul_row_vec(xn, gamma), beta);
}

// x @ W + b with b broadcast across rows.
template <typename Scalar>
typename Tape<Scalar>::Var linear(Tape<Scalar>& t,
                                  typename Tape<Scalar>::Var x,
                                  typename Tape<Scalar>::Var w,
                                  typename Tape<Scalar>::Var b) {
  return t.add_row_vec(t.matmul(x, w), b);
}

}  // namespace biasdet
