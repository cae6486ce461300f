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

#include "ipmc/eval.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>
#include <set>

#include "ipmc/adam.h"
#include "ipmc/csv.h"
#include "ipmc/errors.h"

namespace ipmc {

namespace {

struct Standardizer {
  std::vector<double> mean, inv_std;

  explicit Standardizer(const Matrix &x) : mean(x.cols(), 0.0), inv_std(x.cols(), 0.0) {
    for (int r = 0; r < x.rows(); ++r) {
      for (int c = 0; c < x.cols(); ++c) mean[c] += x(r, c);
    }
    for (double &m : mean) m /= x.rows();
    std::vector<double> var(x.cols(), 0.0);
    for (int r = 0; r < x.rows(); ++r) {
      for (int c = 0; c < x.cols(); ++c) var[c] += (x(r, c) - mean[c]) * (x(r, c) - mean[c]);
    }
    for (int c = 0; c < x.cols(); ++c) {
      const double sd = std::sqrt(var[c] / x.rows());
      inv_std[c] = sd > 1e-12 ? 1.0 / sd : 0.0;
    }
  }

  Matrix Apply(const Matrix &x) const {
    Matrix out(x.rows(), x.cols());
    for (int r = 0; r < x.rows(); ++r) {
      for (int c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - mean[c]) * inv_std[c];
    }
    return out;
  }
};

}  // namespace

double LinearProbe(const Matrix &train_x, std::span<const int> train_y, const Matrix &test_x,
                   std::span<const int> test_y, const ProbeConfig &config) {
  if (train_x.rows() != static_cast<int>(train_y.size()) ||
      test_x.rows() != static_cast<int>(test_y.size())) {
    throw ShapeError("probe features and labels differ in length");
  }
  if (train_x.rows() == 0 || test_x.rows() == 0) throw ShapeError("probe needs both splits");
  if (train_x.cols() != test_x.cols()) throw ShapeError("probe splits differ in width");
  std::set<int> seen(train_y.begin(), train_y.end());
  if (*seen.begin() < 0) throw ConfigError("negative class label");
  int classes = 0;
  for (int y : train_y) classes = std::max(classes, y + 1);
  for (int y : test_y) {
    if (y < 0 || !seen.count(y)) {
      throw ConfigError("class " + std::to_string(y) + " absent from the probe training labels");
    }
  }

  Standardizer standardizer(train_x);
  const Matrix xs = standardizer.Apply(train_x);
  const Matrix xt = standardizer.Apply(test_x);
  const int d = xs.cols();
  Matrix weight(classes, d), bias(1, classes);
  AdamState adam;
  AdamConfig adam_config{config.lr, 0.9, 0.999, 1e-8};
  std::mt19937_64 rng(config.seed);
  std::vector<int> order(xs.rows());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t begin = 0; begin < order.size(); begin += config.batch) {
      const size_t end = std::min(order.size(), begin + config.batch);
      std::span<const int> rows(order.data() + begin, end - begin);
      std::vector<int> picks;
      for (size_t i = 0; i < rows.size(); ++i) {
        picks.push_back(static_cast<int>(i) * classes + train_y[rows[i]]);
      }
      Graph g;
      Var w = g.Parameter(weight);
      Var b = g.Parameter(bias);
      Var logits = g.Affine(g.Constant(SelectRows(xs, rows)), w, b);
      // Mean cross-entropy: logsumexp of each row minus the picked logit.
      Var loss = g.Scale(g.Sub(g.Sum(g.LogSumExpRows(logits)), g.Sum(g.Gather(logits, picks))),
                         1.0 / rows.size());
      g.Backward(loss);
      std::vector<Matrix> grads = {g.grad(w), g.grad(b)};
      ParamRef refs[] = {{"probe.weight", &weight}, {"probe.bias", &bias}};
      AdaptiveMomentUpdate(refs, grads, adam, adam_config);
    }
  }
  int correct = 0;
  for (int r = 0; r < xt.rows(); ++r) {
    int best = 0;
    double best_score = -INFINITY;
    for (int c = 0; c < classes; ++c) {
      double s = bias(0, c);
      for (int k = 0; k < d; ++k) s += weight(c, k) * xt(r, k);
      if (s > best_score) {
        best_score = s;
        best = c;
      }
    }
    correct += best == test_y[r];
  }
  return static_cast<double>(correct) / xt.rows();
}

std::vector<int> KnnRetrieve(std::span<const double> query, const Matrix &gallery, int k) {
  if (gallery.rows() == 0) throw ShapeError("empty gallery");
  if (static_cast<int>(query.size()) != gallery.cols()) {
    throw ShapeError("query width differs from the gallery");
  }
  if (k < 0 || k > gallery.rows()) throw ConfigError("k exceeds the gallery size");
  std::vector<std::pair<double, int>> dist(gallery.rows());
  for (int r = 0; r < gallery.rows(); ++r) {
    double acc = 0.0;
    for (int c = 0; c < gallery.cols(); ++c) acc += std::abs(gallery(r, c) - query[c]);
    dist[r] = {acc, r};
  }
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
  std::vector<int> out(k);
  for (int i = 0; i < k; ++i) out[i] = dist[i].second;
  return out;
}

double ViewDiscriminability(std::span<const Matrix> per_view, const ProbeConfig &config) {
  if (per_view.size() < 2) throw ConfigError("view discriminability needs at least two views");
  const int n = per_view.front().rows();
  const int d = per_view.front().cols();
  for (const auto &v : per_view) {
    if (v.rows() != n || v.cols() != d) throw ShapeError("views must share shape");
  }
  if (n < 2) throw ShapeError("need at least two samples per view");
  const int m = static_cast<int>(per_view.size());
  const int train_n = (n + 1) / 2;
  Matrix train(train_n * m, d), test((n - train_n) * m, d);
  std::vector<int> train_y, test_y;
  int tr = 0, te = 0;
  for (int i = 0; i < n; ++i) {
    for (int v = 0; v < m; ++v) {
      auto src = per_view[v].row(i);
      if (i % 2 == 0) {
        std::copy(src.begin(), src.end(), train.row(tr++).begin());
        train_y.push_back(v);
      } else {
        std::copy(src.begin(), src.end(), test.row(te++).begin());
        test_y.push_back(v);
      }
    }
  }
  return LinearProbe(train, train_y, test, test_y, config);
}

Embedding2d ExportEmbedding2d(const Matrix &features) {
  const int n = features.rows();
  const int d = features.cols();
  if (n < 3) throw ShapeError("2-D export needs at least 3 points");
  Eigen::MatrixXd x(n, d);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < d; ++c) x(r, c) = features(r, c);
  }
  x.rowwise() -= x.colwise().mean();
  Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  // Eigenvalues come in ascending order.
  Embedding2d out{Matrix(n, 2), {0.0, 0.0}};
  const double scale = std::max(1.0, solver.eigenvalues().cwiseAbs().maxCoeff());
  for (int axis = 0; axis < 2; ++axis) {
    const int idx = d - 1 - axis;
    if (idx < 0 || solver.eigenvalues()(idx) <= 1e-12 * scale) {
      if (axis == 1 && !(x.cwiseAbs().maxCoeff() == 0.0)) {
        std::cerr << "warning: rank-deficient data; second component zeroed\n";
      }
      continue;
    }
    Eigen::VectorXd proj = x * solver.eigenvectors().col(idx);
    Eigen::Index arg;
    proj.cwiseAbs().maxCoeff(&arg);
    if (proj(arg) < 0) proj = -proj;
    for (int r = 0; r < n; ++r) out.coords(r, axis) = proj(r);
    out.explained[axis] = solver.eigenvalues()(idx);
  }
  return out;
}

std::string Embedding2dCsv(const Embedding2d &e, std::span<const int> labels) {
  if (static_cast<int>(labels.size()) != e.coords.rows()) {
    throw ShapeError("one label per point expected");
  }
  CsvWriter csv;
  csv.Row({"index", "x", "y", "label"});
  for (int r = 0; r < e.coords.rows(); ++r) {
    csv.Row({std::to_string(r), FormatReal(e.coords(r, 0)), FormatReal(e.coords(r, 1)),
             std::to_string(labels[r])});
  }
  return csv.text();
}

std::vector<Matrix> EmbedViews(const EncoderParams &params, const MultiViewDataset &data,
                               std::span<const int> rows) {
  if (params.view_count() != data.view_count()) {
    throw ConfigError("encoder has " + std::to_string(params.view_count()) +
                      " views, dataset " + std::to_string(data.view_count()));
  }
  std::vector<Matrix> out;
  for (int v = 0; v < data.view_count(); ++v) {
    if (params.views[v].input_dim() != data.views[v].cols()) {
      throw ConfigError("encoder view " + std::to_string(v) + " takes " +
                        std::to_string(params.views[v].input_dim()) + " features, dataset has " +
                        std::to_string(data.views[v].cols()));
    }
    out.push_back(Encode(params, v, SelectRows(data.views[v], rows)));
  }
  return out;
}

double ProbeEncoder(const EncoderParams &params, const MultiViewDataset &data,
                    const ProbeConfig &config) {
  data.Validate();
  auto train_rows = SplitIndices(data, false);
  auto test_rows = SplitIndices(data, true);
  Matrix train_x = ConcatRepresentations(EmbedViews(params, data, train_rows));
  Matrix test_x = ConcatRepresentations(EmbedViews(params, data, test_rows));
  std::vector<int> train_y, test_y;
  for (int r : train_rows) train_y.push_back(data.labels[r]);
  for (int r : test_rows) test_y.push_back(data.labels[r]);
  return LinearProbe(train_x, train_y, test_x, test_y, config);
}

}  // namespace ipmc
