// Copyright 2026 The IPMC Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ipmc/diffmath.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ipmc/errors.h"

namespace ipmc {

Matrix::Matrix(int rows, int cols, double fill)
    : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {
  if (rows < 0 || cols < 0) throw ShapeError("negative matrix dimension");
}

Matrix::Matrix(int rows, int cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows < 0 || cols < 0 || data_.size() != static_cast<size_t>(rows) * cols) {
    throw ShapeError("matrix data size " + std::to_string(data_.size()) +
                     " does not match " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

Matrix Matrix::RowVector(std::span<const double> values) {
  return Matrix(1, static_cast<int>(values.size()),
                std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::ColumnVector(std::span<const double> values) {
  return Matrix(static_cast<int>(values.size()), 1,
                std::vector<double>(values.begin(), values.end()));
}

std::string Matrix::ShapeString() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void WriteMatrix(ByteWriter &out, const Matrix &m) {
  out.PutU32(static_cast<uint32_t>(m.rows()));
  out.PutU32(static_cast<uint32_t>(m.cols()));
  out.PutF64s(m.data());
}

Matrix ReadMatrix(ByteReader &in) {
  uint32_t rows = in.GetU32();
  uint32_t cols = in.GetU32();
  if (static_cast<uint64_t>(rows) * cols * 8 > in.remaining()) {
    throw FormatError("truncated matrix payload");
  }
  Matrix m(static_cast<int>(rows), static_cast<int>(cols));
  in.GetF64s(m.data());
  return m;
}

namespace {

double StableSoftplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sum(exp(v))) with the max shifted out; -inf for an empty range.
double LogSumExpOf(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  double hi = *std::max_element(v.begin(), v.end());
  if (std::isinf(hi)) return hi;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

}  // namespace

const char *Graph::OpName(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kParameter: return "parameter";
    case Op::kAffine: return "affine";
    case Op::kAffineT: return "affine_t";
    case Op::kRelu: return "relu";
    case Op::kSquare: return "square";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSoftplus: return "softplus";
    case Op::kPow: return "pow";
    case Op::kScale: return "scale";
    case Op::kShift: return "shift";
    case Op::kL2Normalize: return "l2_normalize";
    case Op::kRowNorms: return "row_norms";
    case Op::kLogSumExp: return "log_sum_exp";
    case Op::kLogSumExpRows: return "log_sum_exp_rows";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kColMean: return "col_mean";
    case Op::kRowSum: return "row_sum";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kConcatRows: return "concat_rows";
    case Op::kLerp: return "lerp";
    case Op::kGatherRows: return "gather_rows";
    case Op::kGather: return "gather";
  }
  return "unknown";
}

const Graph::Node &Graph::Get(Var v, Op op) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw ShapeError(std::string("node ") + std::to_string(nodes_.size()) +
                     " (" + OpName(op) + "): unbound operand");
  }
  return nodes_[v.id];
}

void Graph::ShapeFail(Op op, const std::string &detail) const {
  throw ShapeError("node " + std::to_string(nodes_.size()) + " (" + OpName(op) +
                   "): " + detail);
}

Var Graph::Push(Op op, std::vector<int> inputs, Matrix value) {
  Node node;
  node.op = op;
  node.needs_grad = op == Op::kParameter;
  for (int in : inputs) node.needs_grad = node.needs_grad || nodes_[in].needs_grad;
  node.inputs = std::move(inputs);
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::Constant(Matrix value) { return Push(Op::kConstant, {}, std::move(value)); }

Var Graph::Parameter(Matrix value) { return Push(Op::kParameter, {}, std::move(value)); }

Var Graph::Affine(Var x, Var w, Var b) {
  const Matrix &xv = Get(x, Op::kAffine).value;
  const Matrix &wv = Get(w, Op::kAffine).value;
  if (xv.cols() != wv.cols()) {
    ShapeFail(Op::kAffine, "input " + xv.ShapeString() + " vs weight " + wv.ShapeString());
  }
  const int batch = xv.rows(), in = xv.cols(), out = wv.rows();
  Matrix y(batch, out);
  std::vector<int> inputs = {x.id, w.id};
  if (b.valid()) {
    const Matrix &bv = Get(b, Op::kAffine).value;
    if (bv.rows() != 1 || bv.cols() != out) {
      ShapeFail(Op::kAffine, "bias " + bv.ShapeString() + " vs output width " +
                                 std::to_string(out));
    }
    for (int r = 0; r < batch; ++r) {
      std::copy(bv.data().begin(), bv.data().end(), y.row(r).begin());
    }
    inputs.push_back(b.id);
  }
  for (int r = 0; r < batch; ++r) {
    const double *xr = xv.data().data() + r * in;
    double *yr = y.data().data() + r * out;
    for (int o = 0; o < out; ++o) {
      const double *wr = wv.data().data() + o * in;
      double acc = 0.0;
      for (int k = 0; k < in; ++k) acc += xr[k] * wr[k];
      yr[o] += acc;
    }
  }
  return Push(Op::kAffine, std::move(inputs), std::move(y));
}

Var Graph::AffineT(Var x, Var w) {
  const Matrix &xv = Get(x, Op::kAffineT).value;
  const Matrix &wv = Get(w, Op::kAffineT).value;
  if (xv.cols() != wv.rows()) {
    ShapeFail(Op::kAffineT, "input " + xv.ShapeString() + " vs weight " + wv.ShapeString());
  }
  const int batch = xv.rows(), inner = xv.cols(), out = wv.cols();
  Matrix y(batch, out);
  for (int r = 0; r < batch; ++r) {
    double *yr = y.data().data() + r * out;
    for (int k = 0; k < inner; ++k) {
      double xk = xv(r, k);
      if (xk == 0.0) continue;
      const double *wr = wv.data().data() + k * out;
      for (int c = 0; c < out; ++c) yr[c] += xk * wr[c];
    }
  }
  return Push(Op::kAffineT, {x.id, w.id}, std::move(y));
}

namespace {

template <typename F>
Matrix Map(const Matrix &x, F f) {
  Matrix y(x.rows(), x.cols());
  for (size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return y;
}

}  // namespace

Var Graph::Relu(Var x) {
  return Push(Op::kRelu, {x.id}, Map(Get(x, Op::kRelu).value, [](double v) { return v > 0 ? v : 0.0; }));
}

Var Graph::Square(Var x) {
  return Push(Op::kSquare, {x.id}, Map(Get(x, Op::kSquare).value, [](double v) { return v * v; }));
}

Var Graph::Exp(Var x) {
  return Push(Op::kExp, {x.id}, Map(Get(x, Op::kExp).value, [](double v) { return std::exp(v); }));
}

Var Graph::Log(Var x) {
  const Matrix &xv = Get(x, Op::kLog).value;
  for (double v : xv.data()) {
    if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
  }
  return Push(Op::kLog, {x.id}, Map(xv, [](double v) { return std::log(v); }));
}

Var Graph::Softplus(Var x) {
  return Push(Op::kSoftplus, {x.id}, Map(Get(x, Op::kSoftplus).value, StableSoftplus));
}

Var Graph::Pow(Var x, double p) {
  const Matrix &xv = Get(x, Op::kPow).value;
  for (double v : xv.data()) {
    if (v < 0.0 || (v == 0.0 && p < 1.0)) {
      throw DomainError("pow: base " + std::to_string(v) + " outside domain for exponent " +
                        std::to_string(p));
    }
  }
  Var out = Push(Op::kPow, {x.id}, Map(xv, [p](double v) { return std::pow(v, p); }));
  nodes_[out.id].scalar = p;
  return out;
}

Var Graph::Scale(Var x, double c) {
  Var out = Push(Op::kScale, {x.id}, Map(Get(x, Op::kScale).value, [c](double v) { return c * v; }));
  nodes_[out.id].scalar = c;
  return out;
}

Var Graph::Shift(Var x, double c) {
  return Push(Op::kShift, {x.id}, Map(Get(x, Op::kShift).value, [c](double v) { return v + c; }));
}

Var Graph::L2NormalizeRows(Var x) {
  const Matrix &xv = Get(x, Op::kL2Normalize).value;
  Matrix y(xv.rows(), xv.cols());
  Matrix norms(xv.rows(), 1);
  for (int r = 0; r < xv.rows(); ++r) {
    double ss = 0.0;
    for (double v : xv.row(r)) ss += v * v;
    double n = std::sqrt(ss);
    if (!(n > 0.0)) {
      throw DomainError("node " + std::to_string(nodes_.size()) +
                        " (l2_normalize): zero-norm row " + std::to_string(r));
    }
    norms(r, 0) = n;
    for (int c = 0; c < xv.cols(); ++c) y(r, c) = xv(r, c) / n;
  }
  Var out = Push(Op::kL2Normalize, {x.id}, std::move(y));
  nodes_[out.id].aux = std::move(norms);
  return out;
}

Var Graph::RowNorms(Var x) {
  const Matrix &xv = Get(x, Op::kRowNorms).value;
  Matrix y(xv.rows(), 1);
  for (int r = 0; r < xv.rows(); ++r) {
    double ss = 0.0;
    for (double v : xv.row(r)) ss += v * v;
    y(r, 0) = std::sqrt(ss);
  }
  return Push(Op::kRowNorms, {x.id}, std::move(y));
}

Var Graph::LogSumExp(Var x) {
  const Matrix &xv = Get(x, Op::kLogSumExp).value;
  return Push(Op::kLogSumExp, {x.id}, Matrix::Scalar(LogSumExpOf(xv.data())));
}

Var Graph::LogSumExpRows(Var x) {
  const Matrix &xv = Get(x, Op::kLogSumExpRows).value;
  Matrix y(xv.rows(), 1);
  for (int r = 0; r < xv.rows(); ++r) y(r, 0) = LogSumExpOf(xv.row(r));
  return Push(Op::kLogSumExpRows, {x.id}, std::move(y));
}

Var Graph::Sum(Var x) {
  const Matrix &xv = Get(x, Op::kSum).value;
  double acc = 0.0;
  for (double v : xv.data()) acc += v;
  return Push(Op::kSum, {x.id}, Matrix::Scalar(acc));
}

Var Graph::Mean(Var x) {
  const Matrix &xv = Get(x, Op::kMean).value;
  if (xv.empty()) ShapeFail(Op::kMean, "mean of empty matrix");
  double acc = 0.0;
  for (double v : xv.data()) acc += v;
  return Push(Op::kMean, {x.id}, Matrix::Scalar(acc / static_cast<double>(xv.size())));
}

Var Graph::ColMean(Var x) {
  const Matrix &xv = Get(x, Op::kColMean).value;
  if (xv.rows() == 0) ShapeFail(Op::kColMean, "column mean of zero rows");
  Matrix y(1, xv.cols());
  for (int r = 0; r < xv.rows(); ++r) {
    for (int c = 0; c < xv.cols(); ++c) y(0, c) += xv(r, c);
  }
  for (double &v : y.data()) v /= xv.rows();
  return Push(Op::kColMean, {x.id}, std::move(y));
}

Var Graph::RowSum(Var x) {
  const Matrix &xv = Get(x, Op::kRowSum).value;
  Matrix y(xv.rows(), 1);
  for (int r = 0; r < xv.rows(); ++r) {
    double acc = 0.0;
    for (double v : xv.row(r)) acc += v;
    y(r, 0) = acc;
  }
  return Push(Op::kRowSum, {x.id}, std::move(y));
}

Var Graph::Add(Var a, Var b) {
  const Matrix &av = Get(a, Op::kAdd).value;
  const Matrix &bv = Get(b, Op::kAdd).value;
  if (!av.SameShape(bv)) ShapeFail(Op::kAdd, av.ShapeString() + " vs " + bv.ShapeString());
  Matrix y(av.rows(), av.cols());
  for (size_t i = 0; i < av.size(); ++i) y[i] = av[i] + bv[i];
  return Push(Op::kAdd, {a.id, b.id}, std::move(y));
}

Var Graph::Sub(Var a, Var b) {
  const Matrix &av = Get(a, Op::kSub).value;
  const Matrix &bv = Get(b, Op::kSub).value;
  if (!av.SameShape(bv)) ShapeFail(Op::kSub, av.ShapeString() + " vs " + bv.ShapeString());
  Matrix y(av.rows(), av.cols());
  for (size_t i = 0; i < av.size(); ++i) y[i] = av[i] - bv[i];
  return Push(Op::kSub, {a.id, b.id}, std::move(y));
}

Var Graph::Mul(Var a, Var b) {
  const Matrix &av = Get(a, Op::kMul).value;
  const Matrix &bv = Get(b, Op::kMul).value;
  if (!av.SameShape(bv)) ShapeFail(Op::kMul, av.ShapeString() + " vs " + bv.ShapeString());
  Matrix y(av.rows(), av.cols());
  for (size_t i = 0; i < av.size(); ++i) y[i] = av[i] * bv[i];
  return Push(Op::kMul, {a.id, b.id}, std::move(y));
}

Var Graph::ConcatRows(std::span<const Var> parts) {
  if (parts.empty()) ShapeFail(Op::kConcatRows, "no parts");
  int cols = Get(parts[0], Op::kConcatRows).value.cols();
  int rows = 0;
  std::vector<int> inputs;
  for (Var p : parts) {
    const Matrix &pv = Get(p, Op::kConcatRows).value;
    if (pv.cols() != cols) {
      ShapeFail(Op::kConcatRows, "part width " + std::to_string(pv.cols()) + " vs " +
                                     std::to_string(cols));
    }
    rows += pv.rows();
    inputs.push_back(p.id);
  }
  Matrix y(rows, cols);
  size_t offset = 0;
  for (Var p : parts) {
    const auto &d = nodes_[p.id].value.data();
    std::copy(d.begin(), d.end(), y.data().begin() + offset);
    offset += d.size();
  }
  return Push(Op::kConcatRows, std::move(inputs), std::move(y));
}

Var Graph::Lerp(Var a, Var b, const Matrix &t) {
  const Matrix &av = Get(a, Op::kLerp).value;
  const Matrix &bv = Get(b, Op::kLerp).value;
  if (!av.SameShape(bv) || t.rows() != av.rows() || t.cols() != 1) {
    ShapeFail(Op::kLerp, av.ShapeString() + " / " + bv.ShapeString() + " with weights " +
                             t.ShapeString());
  }
  Matrix y(av.rows(), av.cols());
  for (int r = 0; r < av.rows(); ++r) {
    double w = t(r, 0);
    for (int c = 0; c < av.cols(); ++c) y(r, c) = w * av(r, c) + (1.0 - w) * bv(r, c);
  }
  Var out = Push(Op::kLerp, {a.id, b.id}, std::move(y));
  nodes_[out.id].aux = t;
  return out;
}

Var Graph::GatherRows(Var x, std::span<const int> rows) {
  const Matrix &xv = Get(x, Op::kGatherRows).value;
  Matrix y(static_cast<int>(rows.size()), xv.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= xv.rows()) {
      ShapeFail(Op::kGatherRows, "row " + std::to_string(rows[i]) + " out of " +
                                     std::to_string(xv.rows()));
    }
    auto src = xv.row(rows[i]);
    std::copy(src.begin(), src.end(), y.row(static_cast<int>(i)).begin());
  }
  Var out = Push(Op::kGatherRows, {x.id}, std::move(y));
  nodes_[out.id].index.assign(rows.begin(), rows.end());
  return out;
}

Var Graph::Gather(Var x, std::span<const int> indices) {
  const Matrix &xv = Get(x, Op::kGather).value;
  Matrix y(1, static_cast<int>(indices.size()));
  for (size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || static_cast<size_t>(indices[i]) >= xv.size()) {
      ShapeFail(Op::kGather, "entry " + std::to_string(indices[i]) + " out of " +
                                 std::to_string(xv.size()));
    }
    y[i] = xv[indices[i]];
  }
  Var out = Push(Op::kGather, {x.id}, std::move(y));
  nodes_[out.id].index.assign(indices.begin(), indices.end());
  return out;
}

const Matrix &Graph::value(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) throw ShapeError("unknown node");
  return nodes_[v.id].value;
}

const Matrix &Graph::grad(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) throw ShapeError("unknown node");
  return nodes_[v.id].grad;
}

bool Graph::requires_grad(Var v) const { return nodes_.at(v.id).needs_grad; }

Matrix &Graph::GradOf(int id) {
  Node &n = nodes_[id];
  if (n.grad.size() != n.value.size() || !n.grad.SameShape(n.value)) {
    n.grad = Matrix(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

void Graph::Backward(Var out) {
  const Node &root = Get(out, Op::kSum);
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw ShapeError("backward requires a 1x1 output, got " + root.value.ShapeString());
  }
  for (Node &n : nodes_) n.grad = Matrix();
  GradOf(out.id)[0] = 1.0;
  for (int id = out.id; id >= 0; --id) {
    if (nodes_[id].needs_grad && !nodes_[id].grad.empty()) Propagate(id);
  }
}

void Graph::Propagate(int id) {
  // References into nodes_ stay valid: no nodes are added during backward.
  Node &n = nodes_[id];
  const Matrix &dy = n.grad;
  auto wants = [&](int k) { return nodes_[n.inputs[k]].needs_grad; };
  auto in = [&](int k) -> const Matrix & { return nodes_[n.inputs[k]].value; };

  switch (n.op) {
    case Op::kConstant:
    case Op::kParameter:
      break;
    case Op::kAffine: {
      const Matrix &x = in(0), &w = in(1);
      const int batch = x.rows(), nin = x.cols(), nout = w.rows();
      if (wants(0)) {
        Matrix &dx = GradOf(n.inputs[0]);
        for (int r = 0; r < batch; ++r) {
          double *dxr = dx.data().data() + r * nin;
          for (int o = 0; o < nout; ++o) {
            double g = dy(r, o);
            if (g == 0.0) continue;
            const double *wr = w.data().data() + o * nin;
            for (int k = 0; k < nin; ++k) dxr[k] += g * wr[k];
          }
        }
      }
      if (wants(1)) {
        Matrix &dw = GradOf(n.inputs[1]);
        for (int r = 0; r < batch; ++r) {
          const double *xr = x.data().data() + r * nin;
          for (int o = 0; o < nout; ++o) {
            double g = dy(r, o);
            if (g == 0.0) continue;
            double *dwr = dw.data().data() + o * nin;
            for (int k = 0; k < nin; ++k) dwr[k] += g * xr[k];
          }
        }
      }
      if (n.inputs.size() > 2 && wants(2)) {
        Matrix &db = GradOf(n.inputs[2]);
        for (int r = 0; r < batch; ++r) {
          for (int o = 0; o < nout; ++o) db(0, o) += dy(r, o);
        }
      }
      break;
    }
    case Op::kAffineT: {
      const Matrix &x = in(0), &w = in(1);
      const int batch = x.rows(), inner = x.cols(), nout = w.cols();
      if (wants(0)) {
        Matrix &dx = GradOf(n.inputs[0]);
        for (int r = 0; r < batch; ++r) {
          const double *dyr = dy.data().data() + r * nout;
          for (int k = 0; k < inner; ++k) {
            const double *wr = w.data().data() + k * nout;
            double acc = 0.0;
            for (int c = 0; c < nout; ++c) acc += dyr[c] * wr[c];
            dx(r, k) += acc;
          }
        }
      }
      if (wants(1)) {
        Matrix &dw = GradOf(n.inputs[1]);
        for (int r = 0; r < batch; ++r) {
          const double *dyr = dy.data().data() + r * nout;
          for (int k = 0; k < inner; ++k) {
            double xk = x(r, k);
            if (xk == 0.0) continue;
            double *dwr = dw.data().data() + k * nout;
            for (int c = 0; c < nout; ++c) dwr[c] += xk * dyr[c];
          }
        }
      }
      break;
    }
    case Op::kRelu: {
      Matrix &dx = GradOf(n.inputs[0]);
      const Matrix &x = in(0);
      for (size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0) dx[i] += dy[i];
      }
      break;
    }
    case Op::kSquare: {
      Matrix &dx = GradOf(n.inputs[0]);
      const Matrix &x = in(0);
      for (size_t i = 0; i < x.size(); ++i) dx[i] += 2.0 * x[i] * dy[i];
      break;
    }
    case Op::kExp: {
      Matrix &dx = GradOf(n.inputs[0]);
      for (size_t i = 0; i < n.value.size(); ++i) dx[i] += n.value[i] * dy[i];
      break;
    }
    case Op::kLog: {
      Matrix &dx = GradOf(n.inputs[0]);
      const Matrix &x = in(0);
      for (size_t i = 0; i < x.size(); ++i) dx[i] += dy[i] / x[i];
      break;
    }
    case Op::kSoftplus: {
      Matrix &dx = GradOf(n.inputs[0]);
      const Matrix &x = in(0);
      for (size_t i = 0; i < x.size(); ++i) dx[i] += Sigmoid(x[i]) * dy[i];
      break;
    }
    case Op::kPow: {
      Matrix &dx = GradOf(n.inputs[0]);
      const Matrix &x = in(0);
      const double p = n.scalar;
      for (size_t i = 0; i < x.size(); ++i) {
        double d = p == 1.0 ? 1.0 : p * std::pow(x[i], p - 1.0);
        dx[i] += d * dy[i];
      }
      break;
    }
    case Op::kScale: {
      Matrix &dx = GradOf(n.inputs[0]);
      for (size_t i = 0; i < dy.size(); ++i) dx[i] += n.scalar * dy[i];
      break;
    }
    case Op::kShift: {
      Matrix &dx = GradOf(n.inputs[0]);
      for (size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
      break;
    }
    case Op::kL2Normalize: {
      Matrix &dx = GradOf(n.inputs[0]);
      const Matrix &y = n.value;
      for (int r = 0; r < y.rows(); ++r) {
        double dot = 0.0;
        for (int c = 0; c < y.cols(); ++c) dot += y(r, c) * dy(r, c);
        double inv = 1.0 / n.aux(r, 0);
        for (int c = 0; c < y.cols(); ++c) dx(r, c) += (dy(r, c) - y(r, c) * dot) * inv;
      }
      break;
    }
    case Op::kRowNorms: {
      Matrix &dx = GradOf(n.inputs[0]);
      const Matrix &x = in(0);
      for (int r = 0; r < x.rows(); ++r) {
        double norm = n.value(r, 0);
        if (norm == 0.0) continue;
        double g = dy(r, 0) / norm;
        for (int c = 0; c < x.cols(); ++c) dx(r, c) += g * x(r, c);
      }
      break;
    }
    case Op::kLogSumExp: {
      Matrix &dx = GradOf(n.inputs[0]);
      const Matrix &x = in(0);
      const double lse = n.value[0];
      if (std::isinf(lse)) break;
      for (size_t i = 0; i < x.size(); ++i) dx[i] += std::exp(x[i] - lse) * dy[0];
      break;
    }
    case Op::kLogSumExpRows: {
      Matrix &dx = GradOf(n.inputs[0]);
      const Matrix &x = in(0);
      for (int r = 0; r < x.rows(); ++r) {
        const double lse = n.value(r, 0);
        if (std::isinf(lse)) continue;
        for (int c = 0; c < x.cols(); ++c) dx(r, c) += std::exp(x(r, c) - lse) * dy(r, 0);
      }
      break;
    }
    case Op::kSum: {
      Matrix &dx = GradOf(n.inputs[0]);
      for (double &v : dx.data()) v += dy[0];
      break;
    }
    case Op::kMean: {
      Matrix &dx = GradOf(n.inputs[0]);
      double g = dy[0] / static_cast<double>(dx.size());
      for (double &v : dx.data()) v += g;
      break;
    }
    case Op::kColMean: {
      Matrix &dx = GradOf(n.inputs[0]);
      const double inv = 1.0 / dx.rows();
      for (int r = 0; r < dx.rows(); ++r) {
        for (int c = 0; c < dx.cols(); ++c) dx(r, c) += dy(0, c) * inv;
      }
      break;
    }
    case Op::kRowSum: {
      Matrix &dx = GradOf(n.inputs[0]);
      for (int r = 0; r < dx.rows(); ++r) {
        for (int c = 0; c < dx.cols(); ++c) dx(r, c) += dy(r, 0);
      }
      break;
    }
    case Op::kAdd:
    case Op::kSub: {
      const double sign = n.op == Op::kAdd ? 1.0 : -1.0;
      if (wants(0)) {
        Matrix &da = GradOf(n.inputs[0]);
        for (size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
      }
      if (wants(1)) {
        Matrix &db = GradOf(n.inputs[1]);
        for (size_t i = 0; i < dy.size(); ++i) db[i] += sign * dy[i];
      }
      break;
    }
    case Op::kMul: {
      if (wants(0)) {
        Matrix &da = GradOf(n.inputs[0]);
        const Matrix &b = in(1);
        for (size_t i = 0; i < dy.size(); ++i) da[i] += b[i] * dy[i];
      }
      if (wants(1)) {
        Matrix &db = GradOf(n.inputs[1]);
        const Matrix &a = in(0);
        for (size_t i = 0; i < dy.size(); ++i) db[i] += a[i] * dy[i];
      }
      break;
    }
    case Op::kConcatRows: {
      size_t offset = 0;
      for (size_t k = 0; k < n.inputs.size(); ++k) {
        size_t len = nodes_[n.inputs[k]].value.size();
        if (wants(static_cast<int>(k))) {
          Matrix &dp = GradOf(n.inputs[k]);
          for (size_t i = 0; i < len; ++i) dp[i] += dy[offset + i];
        }
        offset += len;
      }
      break;
    }
    case Op::kLerp: {
      const Matrix &t = n.aux;
      for (int k = 0; k < 2; ++k) {
        if (!wants(k)) continue;
        Matrix &d = GradOf(n.inputs[k]);
        for (int r = 0; r < dy.rows(); ++r) {
          double w = k == 0 ? t(r, 0) : 1.0 - t(r, 0);
          for (int c = 0; c < dy.cols(); ++c) d(r, c) += w * dy(r, c);
        }
      }
      break;
    }
    case Op::kGatherRows: {
      Matrix &dx = GradOf(n.inputs[0]);
      for (size_t i = 0; i < n.index.size(); ++i) {
        auto src = dy.row(static_cast<int>(i));
        auto dst = dx.row(n.index[i]);
        for (size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
      }
      break;
    }
    case Op::kGather: {
      Matrix &dx = GradOf(n.inputs[0]);
      for (size_t i = 0; i < n.index.size(); ++i) dx[n.index[i]] += dy[i];
      break;
    }
  }
}

namespace {

double EvaluateScalar(const Expression &expr, const Bindings &inputs) {
  Graph g;
  std::map<std::string, Var> vars;
  for (const auto &[name, value] : inputs) vars[name] = g.Constant(value);
  const Matrix &out = g.value(expr(g, vars));
  if (out.size() != 1) throw ShapeError("expression output is " + out.ShapeString());
  return out[0];
}

}  // namespace

Evaluation EvaluateWithGradients(const Expression &expr, const Bindings &inputs,
                                 const std::vector<std::string> &wrt) {
  for (const auto &name : wrt) {
    if (!inputs.contains(name)) throw ConfigError("unbound gradient input '" + name + "'");
  }
  Graph g;
  std::map<std::string, Var> vars;
  for (const auto &[name, value] : inputs) {
    bool param = std::find(wrt.begin(), wrt.end(), name) != wrt.end();
    vars[name] = param ? g.Parameter(value) : g.Constant(value);
  }
  Var out = expr(g, vars);
  Evaluation result;
  result.value = g.value(out);
  if (wrt.empty()) return result;
  g.Backward(out);
  for (const auto &name : wrt) {
    const Matrix &grad = g.grad(vars[name]);
    const Matrix &value = g.value(vars[name]);
    result.gradients[name] = grad.empty() ? Matrix(value.rows(), value.cols()) : grad;
  }
  return result;
}

double FiniteDifferenceCheck(const Expression &expr, const Bindings &point,
                             const std::vector<std::string> &wrt, double step) {
  if (!(step > 0.0 && step <= 1e-2)) {
    throw ConfigError("finite-difference step must lie in (0, 1e-2]");
  }
  Evaluation analytic = EvaluateWithGradients(expr, point, wrt);
  double worst = 0.0;
  Bindings probe = point;
  for (const auto &name : wrt) {
    Matrix &slot = probe[name];
    const Matrix &grad = analytic.gradients[name];
    for (size_t i = 0; i < slot.size(); ++i) {
      const double saved = slot[i];
      slot[i] = saved + step;
      double up = EvaluateScalar(expr, probe);
      slot[i] = saved - step;
      double down = EvaluateScalar(expr, probe);
      slot[i] = saved;
      double numeric = (up - down) / (2.0 * step);
      double err = std::abs(grad[i] - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace ipmc
