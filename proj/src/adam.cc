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

#include "ipmc/adam.h"

#include <cmath>

#include "ipmc/errors.h"

namespace ipmc {

void AdamState::Serialize(ByteWriter &out) const {
  out.PutU64(static_cast<uint64_t>(step));
  out.PutU32(static_cast<uint32_t>(first.size()));
  for (size_t i = 0; i < first.size(); ++i) {
    WriteMatrix(out, first[i]);
    WriteMatrix(out, second[i]);
  }
}

AdamState AdamState::Deserialize(ByteReader &in) {
  AdamState s;
  s.step = static_cast<int64_t>(in.GetU64());
  uint32_t n = in.GetU32();
  for (uint32_t i = 0; i < n; ++i) {
    s.first.push_back(ReadMatrix(in));
    s.second.push_back(ReadMatrix(in));
  }
  return s;
}

void AdaptiveMomentUpdate(std::span<const ParamRef> params, std::span<const Matrix> grads,
                          AdamState &state, const AdamConfig &config) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    if (!grads[i].SameShape(*params[i].value)) {
      throw ShapeError("adam: gradient shape " + grads[i].ShapeString() + " for parameter " +
                       params[i].name + " of shape " + params[i].value->ShapeString());
    }
    for (double g : grads[i].data()) {
      if (!std::isfinite(g)) {
        throw DivergenceError("non-finite gradient for parameter " + params[i].name);
      }
    }
  }
  if (state.first.empty()) {
    for (const auto &p : params) {
      state.first.emplace_back(p.value->rows(), p.value->cols());
      state.second.emplace_back(p.value->rows(), p.value->cols());
    }
  } else if (state.first.size() != params.size()) {
    throw ShapeError("adam: moment count does not match parameter count");
  }

  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Matrix &p = *params[i].value;
    Matrix &m = state.first[i];
    Matrix &v = state.second[i];
    const Matrix &g = grads[i];
    for (size_t k = 0; k < p.size(); ++k) {
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      double mhat = m[k] / c1;
      double vhat = v[k] / c2;
      p[k] -= config.lr * mhat / (std::sqrt(vhat) + config.epsilon);
    }
  }
}

}  // namespace ipmc
