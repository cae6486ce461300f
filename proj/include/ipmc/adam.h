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

#ifndef IPMC_ADAM_H_
#define IPMC_ADAM_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ipmc/binary_io.h"
#include "ipmc/diffmath.h"

namespace ipmc {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First and second moment estimates, one pair per parameter tensor.
struct AdamState {
  std::vector<Matrix> first;
  std::vector<Matrix> second;
  int64_t step = 0;

  void Serialize(ByteWriter &out) const;
  static AdamState Deserialize(ByteReader &in);
  bool operator==(const AdamState &) const = default;
};

// A parameter tensor together with a stable name for diagnostics.
struct ParamRef {
  std::string name;
  Matrix *value;
};

// One bias-corrected adaptive-moment step. Moments are lazily shaped on
// the first call. A non-finite gradient raises DivergenceError naming the
// offending parameter and leaves everything untouched.
void AdaptiveMomentUpdate(std::span<const ParamRef> params, std::span<const Matrix> grads,
                          AdamState &state, const AdamConfig &config);

}  // namespace ipmc

#endif  // IPMC_ADAM_H_
