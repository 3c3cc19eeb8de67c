// SPDX-License-Identifier: Apache-2.0
#include "qnnv/ilp_model.hpp"

#include <gmpxx.h>

#include <cmath>
#include <stdexcept>

namespace qnnv {

const char* cmp_symbol(Cmp c) {
  switch (c) {
    case Cmp::kLe: return "<=";
    case Cmp::kGe: return ">=";
    default: return "=";
  }
}

double LinConstraint::lhs(const std::vector<double>& x) const {
  double v = 0.0;
  for (const LinTerm& t : terms) v += t.coeff * x[t.var];
  return v;
}

int ILPModel::add_var(std::string name, VarKind kind, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("variable " + name + ": empty bounds");
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw std::invalid_argument("variable " + name + ": infinite bounds");
  if (kind == VarKind::kBinary) {
    lo = std::max(lo, 0.0);
    hi = std::min(hi, 1.0);
  }
  const int id = static_cast<int>(vars_.size());
  if (!by_name_.emplace(name, id).second) throw std::invalid_argument("duplicate variable name " + name);
  vars_.push_back({id, kind, std::ceil(lo), std::floor(hi), std::move(name)});
  return id;
}

void ILPModel::add_constraint(LinConstraint c) {
  for (const LinTerm& t : c.terms) {
    if (t.var < 0 || static_cast<size_t>(t.var) >= vars_.size())
      throw std::invalid_argument("constraint references undeclared variable");
    if (!std::isfinite(t.coeff)) throw std::invalid_argument("non-finite coefficient");
  }
  if (!std::isfinite(c.rhs)) throw std::invalid_argument("non-finite right-hand side");
  constraints_.push_back(std::move(c));
}

std::optional<int> ILPModel::find(const std::string& name) const {
  const auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

bool ILPModel::check_exact(const std::vector<int64_t>& x) const {
  if (x.size() != vars_.size()) return false;
  for (size_t i = 0; i < vars_.size(); ++i) {
    const double v = static_cast<double>(x[i]);
    if (v < vars_[i].lo || v > vars_[i].hi) return false;
  }
  return !violated_constraint(x).has_value();
}

std::optional<size_t> ILPModel::violated_constraint(const std::vector<int64_t>& x) const {
  mpq_class lhs, term;
  for (size_t k = 0; k < constraints_.size(); ++k) {
    const LinConstraint& c = constraints_[k];
    lhs = 0;
    for (const LinTerm& t : c.terms) {
      term = mpq_class(t.coeff);
      term *= mpz_class(static_cast<long>(x[t.var]));
      lhs += term;
    }
    const int s = cmp(lhs, mpq_class(c.rhs));
    if ((c.cmp == Cmp::kLe && s > 0) || (c.cmp == Cmp::kGe && s < 0) || (c.cmp == Cmp::kEq && s != 0)) return k;
  }
  return std::nullopt;
}

}  // namespace qnnv
