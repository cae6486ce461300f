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

#include "ipmc/info.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>

#include "ipmc/csv.h"
#include "ipmc/errors.h"

namespace ipmc {

namespace {

double ProductSize(std::span<const int> cards) {
  double size = 1.0;
  for (int c : cards) size *= c;
  return size;
}

// Decodes flat index `i` into per-variable states.
void Decode(size_t i, std::span<const int> cards, std::span<int> states) {
  for (int v = static_cast<int>(cards.size()) - 1; v >= 0; --v) {
    states[v] = static_cast<int>(i % cards[v]);
    i /= cards[v];
  }
}

double EntropyOf(std::span<const double> table) {
  double h = 0.0;
  for (double p : table) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

std::vector<int> Indices(const DiscreteJoint &joint, const VarSet &vars) {
  std::vector<int> out;
  for (const auto &v : vars) out.push_back(joint.Index(v));
  return out;
}

std::vector<int> Union(std::vector<int> a, std::span<const int> b) {
  for (int v : b) {
    if (std::find(a.begin(), a.end(), v) == a.end()) a.push_back(v);
  }
  return a;
}

}  // namespace

DiscreteJoint::DiscreteJoint(std::vector<std::string> names, std::vector<int> cards,
                             std::vector<double> probs)
    : names_(std::move(names)), cards_(std::move(cards)), probs_(std::move(probs)) {
  if (names_.size() != cards_.size()) throw ShapeError("one cardinality per variable expected");
  std::set<std::string> unique(names_.begin(), names_.end());
  if (unique.size() != names_.size()) throw ConfigError("duplicate variable name");
  for (int c : cards_) {
    if (c < 1) throw ConfigError("alphabet sizes must be positive");
  }
  const double size = ProductSize(cards_);
  if (size > kMaxEntries) {
    throw ConfigError("product space of " + std::to_string(size) + " entries exceeds 1e7");
  }
  if (probs_.size() != static_cast<size_t>(size)) {
    throw ShapeError("probability table has " + std::to_string(probs_.size()) +
                     " entries, expected " + std::to_string(static_cast<size_t>(size)));
  }
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0)) throw DomainError("negative or NaN probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw DomainError("probabilities sum to " + std::to_string(total));
  }
}

DiscreteJoint DiscreteJoint::Enumerate(std::vector<std::string> names, std::vector<int> cards,
                                       const std::function<double(std::span<const int>)> &fn) {
  const double size = ProductSize(cards);
  if (size > kMaxEntries) throw ConfigError("product space exceeds 1e7 entries");
  std::vector<double> probs(static_cast<size_t>(size));
  std::vector<int> states(cards.size());
  for (size_t i = 0; i < probs.size(); ++i) {
    Decode(i, cards, states);
    probs[i] = fn(states);
  }
  return DiscreteJoint(std::move(names), std::move(cards), std::move(probs));
}

DiscreteJoint DiscreteJoint::WithDerived(const std::string &name, int card,
                                         const std::function<int(std::span<const int>)> &fn) const {
  auto names = names_;
  auto cards = cards_;
  names.push_back(name);
  cards.push_back(card);
  std::vector<double> probs(probs_.size() * card, 0.0);
  std::vector<int> states(cards_.size());
  for (size_t i = 0; i < probs_.size(); ++i) {
    Decode(i, cards_, states);
    const int value = fn(states);
    if (value < 0 || value >= card) throw DomainError("derived value outside its alphabet");
    probs[i * card + value] = probs_[i];
  }
  return DiscreteJoint(std::move(names), std::move(cards), std::move(probs));
}

DiscreteJoint DiscreteJoint::WithIndependent(const std::string &name,
                                             std::span<const double> marginal) const {
  auto names = names_;
  auto cards = cards_;
  names.push_back(name);
  const int card = static_cast<int>(marginal.size());
  cards.push_back(card);
  std::vector<double> probs(probs_.size() * card);
  for (size_t i = 0; i < probs_.size(); ++i) {
    for (int k = 0; k < card; ++k) probs[i * card + k] = probs_[i] * marginal[k];
  }
  return DiscreteJoint(std::move(names), std::move(cards), std::move(probs));
}

int DiscreteJoint::Index(std::string_view name) const {
  for (size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  throw ConfigError("unknown variable '" + std::string(name) + "'");
}

std::vector<double> DiscreteJoint::Marginal(std::span<const int> vars) const {
  std::vector<int> sub_cards;
  for (int v : vars) {
    if (v < 0 || v >= static_cast<int>(cards_.size())) throw IndexError("variable index");
    sub_cards.push_back(cards_[v]);
  }
  std::vector<double> out(static_cast<size_t>(ProductSize(sub_cards)), 0.0);
  std::vector<int> states(cards_.size());
  for (size_t i = 0; i < probs_.size(); ++i) {
    if (probs_[i] == 0.0) continue;
    Decode(i, cards_, states);
    size_t j = 0;
    for (size_t k = 0; k < vars.size(); ++k) j = j * sub_cards[k] + states[vars[k]];
    out[j] += probs_[i];
  }
  return out;
}

double DiscreteJoint::Entropy(std::span<const int> vars) const {
  if (vars.empty()) return 0.0;
  return EntropyOf(Marginal(vars));
}

double Entropy(const DiscreteJoint &joint, const VarSet &vars) {
  return joint.Entropy(Indices(joint, vars));
}

double MutualInformation(const DiscreteJoint &joint, const VarSet &a, const VarSet &b) {
  return ConditionalMutualInformation(joint, a, b, {});
}

double ConditionalMutualInformation(const DiscreteJoint &joint, const VarSet &a, const VarSet &b,
                                    const VarSet &c) {
  auto ia = Indices(joint, a);
  auto ib = Indices(joint, b);
  auto ic = Indices(joint, c);
  // I(A;B|C) = H(A,C) + H(B,C) - H(A,B,C) - H(C)
  const double value = joint.Entropy(Union(ia, ic)) + joint.Entropy(Union(ib, ic)) -
                       joint.Entropy(Union(Union(ia, ib), ic)) - joint.Entropy(ic);
  // Clamp rounding noise below zero; the true value is non-negative.
  return std::max(0.0, value);
}

double InteractionInformation(const DiscreteJoint &joint, const VarSet &a, const VarSet &b,
                              const VarSet &c) {
  return MutualInformation(joint, a, b) - ConditionalMutualInformation(joint, a, b, c);
}

InfoKind ParseInfoKind(const std::string &name) {
  if (name == "H") return InfoKind::kH;
  if (name == "I") return InfoKind::kI;
  if (name == "CMI") return InfoKind::kCMI;
  if (name == "CMI2") return InfoKind::kCMI2;
  if (name == "INT") return InfoKind::kINT;
  throw ConfigError("unknown measure '" + name + "'");
}

double InfoMeasure(const DiscreteJoint &joint, InfoKind kind, const VarSet &vars) {
  auto need = [&](size_t n) {
    if (vars.size() != n) {
      throw ConfigError("measure expects " + std::to_string(n) + " variables, got " +
                        std::to_string(vars.size()));
    }
  };
  switch (kind) {
    case InfoKind::kH:
      if (vars.empty()) throw ConfigError("H needs at least one variable");
      return Entropy(joint, vars);
    case InfoKind::kI:
      need(2);
      return MutualInformation(joint, {vars[0]}, {vars[1]});
    case InfoKind::kCMI:
      need(3);
      return ConditionalMutualInformation(joint, {vars[0]}, {vars[1]}, {vars[2]});
    case InfoKind::kCMI2:
      need(4);
      return ConditionalMutualInformation(joint, {vars[0]}, {vars[1]}, {vars[2], vars[3]});
    case InfoKind::kINT:
      need(3);
      return InteractionInformation(joint, {vars[0]}, {vars[1]}, {vars[2]});
  }
  return 0.0;
}

double KlFromProduct(const DiscreteJoint &joint, const VarSet &a, const VarSet &b) {
  auto ia = Indices(joint, a);
  auto ib = Indices(joint, b);
  std::vector<int> ab = ia;
  ab.insert(ab.end(), ib.begin(), ib.end());
  const auto pab = joint.Marginal(ab);
  const auto pa = joint.Marginal(ia);
  const auto pb = joint.Marginal(ib);
  const size_t nb = pb.size();
  double kl = 0.0;
  for (size_t i = 0; i < pa.size(); ++i) {
    for (size_t j = 0; j < nb; ++j) {
      const double p = pab[i * nb + j];
      if (p > 0.0) kl += p * std::log2(p / (pa[i] * pb[j]));
    }
  }
  return kl;
}

double KlIdentityDeviation(const DiscreteJoint &joint, const VarSet &a, const VarSet &b) {
  return std::abs(MutualInformation(joint, a, b) - KlFromProduct(joint, a, b));
}

Assumption1Report Assumption1Audit(const DiscreteJoint &joint, const std::string &x,
                                   const std::string &t, const VarSet &views,
                                   std::span<const double> epsilons) {
  if (epsilons.size() != views.size()) throw ConfigError("one bound per view expected");
  Assumption1Report report;
  for (size_t i = 0; i < views.size(); ++i) {
    ViewAudit audit;
    audit.view = views[i];
    audit.residual = ConditionalMutualInformation(joint, {x}, {t}, {views[i]});
    audit.bound = epsilons[i];
    audit.pass = audit.residual <= epsilons[i];
    report.views.push_back(audit);
  }
  report.residual_all = ConditionalMutualInformation(joint, {x}, {t}, views);
  report.task_information = MutualInformation(joint, {x}, {t});
  return report;
}

Definition1Report Definition1(const DiscreteJoint &joint, const std::string &y,
                              const std::string &x, const std::string &v1, const std::string &v2) {
  Definition1Report r;
  r.y_x_given_views = ConditionalMutualInformation(joint, {y}, {x}, {v1, v2});
  r.y_v1_given_rest = ConditionalMutualInformation(joint, {y}, {v1}, {x, v2});
  r.y_v2_given_rest = ConditionalMutualInformation(joint, {y}, {v2}, {x, v1});
  r.shared = InteractionInformation(joint, {y}, {v1}, {v2});
  r.entropy_y = Entropy(joint, {y});
  r.residual_y = Entropy(joint, {y, x, v1, v2}) - Entropy(joint, {x, v1, v2});
  r.common = r.entropy_y - r.residual_y - r.y_x_given_views - r.y_v1_given_rest -
             r.y_v2_given_rest;
  return r;
}

DiscreteJoint ParseJointCsv(std::string_view text) {
  auto rows = ParseCsv(text);
  if (rows.size() < 2) throw FormatError("joint CSV needs a header and at least one row");
  const auto &header = rows.front();
  if (header.size() < 2) throw FormatError("joint CSV needs variables and a probability column");
  const size_t vars = header.size() - 1;
  std::vector<std::string> names(header.begin(), header.begin() + vars);
  std::vector<std::vector<int>> states;
  std::vector<double> probs;
  std::vector<int> cards(vars, 1);
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto &row = rows[r];
    if (row.size() != header.size()) {
      throw FormatError("joint CSV row " + std::to_string(r) + " has " +
                        std::to_string(row.size()) + " fields");
    }
    std::vector<int> s(vars);
    for (size_t v = 0; v < vars; ++v) {
      const auto &f = row[v];
      auto res = std::from_chars(f.data(), f.data() + f.size(), s[v]);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size() || s[v] < 0) {
        throw FormatError("bad state '" + f + "' in joint CSV row " + std::to_string(r));
      }
      cards[v] = std::max(cards[v], s[v] + 1);
    }
    double p = 0.0;
    try {
      size_t used = 0;
      p = std::stod(row.back(), &used);
      if (used != row.back().size()) throw std::invalid_argument("trailing");
    } catch (const std::exception &) {
      throw FormatError("bad probability '" + row.back() + "' in joint CSV row " +
                        std::to_string(r));
    }
    states.push_back(std::move(s));
    probs.push_back(p);
  }
  if (ProductSize(cards) > DiscreteJoint::kMaxEntries) {
    throw ConfigError("product space exceeds 1e7 entries");
  }
  std::vector<double> table(static_cast<size_t>(ProductSize(cards)), 0.0);
  std::vector<bool> filled(table.size(), false);
  for (size_t r = 0; r < states.size(); ++r) {
    size_t j = 0;
    for (size_t v = 0; v < vars; ++v) j = j * cards[v] + states[r][v];
    if (filled[j]) throw FormatError("duplicate assignment in joint CSV");
    filled[j] = true;
    table[j] = probs[r];
  }
  return DiscreteJoint(std::move(names), std::move(cards), std::move(table));
}

}  // namespace ipmc
