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

#ifndef IPMC_SELFCHECK_H_
#define IPMC_SELFCHECK_H_

#include <string>
#include <vector>

namespace ipmc {

struct CheckResult {
  std::string name;
  bool pass = false;
  // Worst deviation observed and the tolerance it was held to.
  double worst = 0.0;
  double tolerance = 0.0;
};

// Gradient and identity suites run by `ipmc check`: finite-difference
// checks of every graph op and of the loss, the gamma limit, the
// leveraged/closed-form equivalence, the KL identity and the XOR fixture.
// The gradient suites draw `points` random inputs per op and loss mode.
std::vector<CheckResult> RunSelfChecks(unsigned seed = 1, int points = 100);

}  // namespace ipmc

#endif  // IPMC_SELFCHECK_H_
