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

#ifndef IPMC_DIFFMATH_H_
#define IPMC_DIFFMATH_H_

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ipmc/binary_io.h"

namespace ipmc {

// Dense row-major matrix of 64-bit reals. Vectors are 1 x n matrices and
// scalars are 1 x 1.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0);
  Matrix(int rows, int cols, std::vector<double> data);

  static Matrix Scalar(double v) { return Matrix(1, 1, v); }
  static Matrix RowVector(std::span<const double> values);
  static Matrix ColumnVector(std::span<const double> values);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double operator()(int r, int c) const { return data_[r * cols_ + c]; }
  double &operator()(int r, int c) { return data_[r * cols_ + c]; }
  double operator[](size_t i) const { return data_[i]; }
  double &operator[](size_t i) { return data_[i]; }

  std::span<double> row(int r) { return {data_.data() + r * cols_, static_cast<size_t>(cols_)}; }
  std::span<const double> row(int r) const {
    return {data_.data() + r * cols_, static_cast<size_t>(cols_)};
  }
  std::vector<double> &data() { return data_; }
  const std::vector<double> &data() const { return data_; }

  bool SameShape(const Matrix &other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string ShapeString() const;

  bool operator==(const Matrix &other) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// u32 rows, u32 cols, then rows*cols little-endian reals.
void WriteMatrix(ByteWriter &out, const Matrix &m);
Matrix ReadMatrix(ByteReader &in);

// Handle to a node of a Graph. Only meaningful for the graph that made it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Define-by-run reverse-mode graph. Every method evaluates its node
// eagerly and records it; Backward() then accumulates d(output)/d(node) for
// every node that depends on a parameter.
//
// Shapes are strict: no implicit broadcasting. The only broadcasting
// primitive is the bias of Affine.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph &) = delete;
  Graph &operator=(const Graph &) = delete;

  // Leaf without gradient.
  Var Constant(Matrix value);
  // Leaf whose gradient is accumulated by Backward().
  Var Parameter(Matrix value);

  // x: B x in, w: out x in, b: 1 x out (optional) -> x w^T + b.
  Var Affine(Var x, Var w, Var b = {});
  // x: B x k, w: k x c -> x w. Transposed companion of Affine.
  Var AffineT(Var x, Var w);

  Var Relu(Var x);
  Var Square(Var x);
  Var Exp(Var x);
  Var Log(Var x);
  Var Softplus(Var x);
  // Elementwise x^p for x >= 0.
  Var Pow(Var x, double p);
  Var Scale(Var x, double c);
  Var Shift(Var x, double c);

  // Row-wise x / ||x||_2. Zero rows raise DomainError.
  Var L2NormalizeRows(Var x);
  // B x 1 column of row norms; the gradient at a zero row is zero.
  Var RowNorms(Var x);

  // Reductions. LogSumExp and Sum/Mean reduce all entries to 1 x 1.
  Var LogSumExp(Var x);
  Var LogSumExpRows(Var x);
  Var Sum(Var x);
  Var Mean(Var x);
  Var ColMean(Var x);
  Var RowSum(Var x);

  Var Add(Var a, Var b);
  Var Sub(Var a, Var b);
  Var Mul(Var a, Var b);

  Var ConcatRows(std::span<const Var> parts);
  // t: B x 1 constant weights -> t * a + (1 - t) * b row-wise.
  Var Lerp(Var a, Var b, const Matrix &t);
  Var GatherRows(Var x, std::span<const int> rows);
  // Flat (row-major) entry selection -> 1 x indices.size().
  Var Gather(Var x, std::span<const int> indices);

  // Seeds d(out)/d(out) = 1 and propagates. `out` must be 1 x 1.
  void Backward(Var out);

  const Matrix &value(Var v) const;
  // Zero-shaped matrix if no gradient reached the node.
  const Matrix &grad(Var v) const;
  bool requires_grad(Var v) const;
  size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    kConstant, kParameter, kAffine, kAffineT, kRelu, kSquare, kExp, kLog,
    kSoftplus, kPow, kScale, kShift, kL2Normalize, kRowNorms, kLogSumExp,
    kLogSumExpRows, kSum, kMean, kColMean, kRowSum, kAdd, kSub, kMul,
    kConcatRows, kLerp, kGatherRows, kGather,
  };

  struct Node {
    Op op;
    std::vector<int> inputs;
    Matrix value;
    Matrix grad;
    Matrix aux;
    std::vector<int> index;
    double scalar = 0.0;
    bool needs_grad = false;
  };

  static const char *OpName(Op op);
  const Node &Get(Var v, Op op) const;
  Var Push(Op op, std::vector<int> inputs, Matrix value);
  [[noreturn]] void ShapeFail(Op op, const std::string &detail) const;
  Matrix &GradOf(int id);
  void Propagate(int id);

  std::vector<Node> nodes_;
};

// Named dense inputs of an expression.
using Bindings = std::map<std::string, Matrix>;
// Builds a scalar-valued expression from bound inputs. Inputs listed in
// `wrt` arrive as Parameter nodes, all others as Constant nodes.
using Expression = std::function<Var(Graph &, const std::map<std::string, Var> &)>;

struct Evaluation {
  Matrix value;
  std::map<std::string, Matrix> gradients;
};

// Evaluates `expr` at `inputs` and returns d(output)/d(input) for every name
// in `wrt`. Unknown names in `wrt` raise ConfigError.
Evaluation EvaluateWithGradients(const Expression &expr, const Bindings &inputs,
                                 const std::vector<std::string> &wrt);

// Max over all entries of the `wrt` inputs of
// |analytic - central difference| / max(1, |central difference|).
double FiniteDifferenceCheck(const Expression &expr, const Bindings &point,
                             const std::vector<std::string> &wrt, double step);

}  // namespace ipmc

#endif  // IPMC_DIFFMATH_H_
