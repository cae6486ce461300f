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

#ifndef IPMC_INFO_H_
#define IPMC_INFO_H_

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ipmc {

// Probability table over the product of finite alphabets. Entries are
// stored with the last variable varying fastest.
class DiscreteJoint {
 public:
  static constexpr double kMaxEntries = 1e7;

  // Requires non-negative entries summing to 1 +- 1e-12 and a product
  // space of at most 1e7 entries.
  DiscreteJoint(std::vector<std::string> names, std::vector<int> cards, std::vector<double> probs);

  // Tabulates fn over every assignment. The result must already be a
  // distribution.
  static DiscreteJoint Enumerate(std::vector<std::string> names, std::vector<int> cards,
                                 const std::function<double(std::span<const int>)> &fn);

  // Appends a variable that is a deterministic function of the others.
  DiscreteJoint WithDerived(const std::string &name, int card,
                            const std::function<int(std::span<const int>)> &fn) const;
  // Appends a variable independent of the others with the given marginal.
  DiscreteJoint WithIndependent(const std::string &name, std::span<const double> marginal) const;

  const std::vector<std::string> &names() const { return names_; }
  const std::vector<int> &cards() const { return cards_; }
  const std::vector<double> &probs() const { return probs_; }
  // Position of a variable; unknown names raise ConfigError.
  int Index(std::string_view name) const;

  // Marginal table over the listed variables (in the given order).
  std::vector<double> Marginal(std::span<const int> vars) const;
  // Joint entropy in bits of the listed variables; empty set yields 0.
  double Entropy(std::span<const int> vars) const;

 private:
  std::vector<std::string> names_;
  std::vector<int> cards_;
  std::vector<double> probs_;
};

using VarSet = std::vector<std::string>;

double Entropy(const DiscreteJoint &joint, const VarSet &vars);
// I(A;B) in bits; each side may name several variables.
double MutualInformation(const DiscreteJoint &joint, const VarSet &a, const VarSet &b);
// I(A;B|C) in bits.
double ConditionalMutualInformation(const DiscreteJoint &joint, const VarSet &a, const VarSet &b,
                                    const VarSet &c);
// I(A;B;C) = I(A;B) - I(A;B|C); may be negative.
double InteractionInformation(const DiscreteJoint &joint, const VarSet &a, const VarSet &b,
                              const VarSet &c);

enum class InfoKind { kH, kI, kCMI, kCMI2, kINT };
InfoKind ParseInfoKind(const std::string &name);

// H(v...), I(a;b), CMI: I(a;b|c), CMI2: I(a;b|c,d), INT: I(a;b;c).
double InfoMeasure(const DiscreteJoint &joint, InfoKind kind, const VarSet &vars);

// D_KL(P_AB || P_A P_B) in bits, summed directly over the joint table.
double KlFromProduct(const DiscreteJoint &joint, const VarSet &a, const VarSet &b);
// |I(A;B) - D_KL(P_AB || P_A P_B)|.
double KlIdentityDeviation(const DiscreteJoint &joint, const VarSet &a, const VarSet &b);

struct ViewAudit {
  std::string view;
  double residual = 0.0;  // I(X;T|V_i)
  double bound = 0.0;
  bool pass = false;
};

struct Assumption1Report {
  std::vector<ViewAudit> views;
  double residual_all = 0.0;  // I(X;T|V_1, ..., V_m)
  double task_information = 0.0;  // I(X;T)
};

Assumption1Report Assumption1Audit(const DiscreteJoint &joint, const std::string &x,
                                   const std::string &t, const VarSet &views,
                                   std::span<const double> epsilons);

struct Definition1Report {
  double y_x_given_views = 0.0;   // I(Y;X|V1,V2)
  double y_v1_given_rest = 0.0;   // I(Y;V1|X,V2)
  double y_v2_given_rest = 0.0;   // I(Y;V2|X,V1)
  double shared = 0.0;            // I(Y;V1;V2)
  double entropy_y = 0.0;         // H(Y)
  double residual_y = 0.0;        // H(Y|X,V1,V2)
  // H(Y) - H(Y|X,V1,V2) minus the three view-specific terms: the part of
  // I(Y;X,V1,V2) held by at least two of the sources.
  double common = 0.0;
};

Definition1Report Definition1(const DiscreteJoint &joint, const std::string &y,
                              const std::string &x, const std::string &v1, const std::string &v2);

// Rows: one column per variable holding a non-negative integer state and a
// final probability column. Alphabet sizes are max state + 1; absent
// assignments have probability 0.
DiscreteJoint ParseJointCsv(std::string_view text);

}  // namespace ipmc

#endif  // IPMC_INFO_H_
