// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace qnnv {

enum class VarKind { kInteger, kBinary };

struct Var {
  int id = 0;
  VarKind kind = VarKind::kInteger;
  double lo = 0.0;
  double hi = 0.0;
  std::string name;
};

enum class Cmp { kLe, kEq, kGe };
const char* cmp_symbol(Cmp c);

struct LinTerm {
  int var;
  double coeff;
};

struct LinConstraint {
  std::vector<LinTerm> terms;
  Cmp cmp = Cmp::kLe;
  double rhs = 0.0;

  double lhs(const std::vector<double>& x) const;
};

/// Pure feasibility ILP: every variable is integral and finitely bounded.
class ILPModel {
 public:
  int add_var(std::string name, VarKind kind, double lo, double hi);
  void add_constraint(LinConstraint c);
  void add_constraint(std::vector<LinTerm> terms, Cmp cmp, double rhs) {
    add_constraint(LinConstraint{std::move(terms), cmp, rhs});
  }

  const std::vector<Var>& vars() const { return vars_; }
  std::vector<Var>& vars() { return vars_; }
  const std::vector<LinConstraint>& constraints() const { return constraints_; }
  const Var& var(int id) const { return vars_[id]; }
  size_t num_vars() const { return vars_.size(); }
  size_t num_constraints() const { return constraints_.size(); }

  std::optional<int> find(const std::string& name) const;

  /// Exact rational check of an integer assignment against every bound and
  /// constraint (coefficients taken as the exact values of their doubles).
  bool check_exact(const std::vector<int64_t>& x) const;
  /// First constraint the assignment violates under exact arithmetic.
  std::optional<size_t> violated_constraint(const std::vector<int64_t>& x) const;

 private:
  std::vector<Var> vars_;
  std::vector<LinConstraint> constraints_;
  std::unordered_map<std::string, int> by_name_;
};

/// A gadget argument: either a variable or an integer constant.
struct Operand {
  int var = -1;
  int64_t value = 0;

  static Operand variable(int id) { return {id, 0}; }
  static Operand constant(int64_t v) { return {-1, v}; }
  bool is_const() const { return var < 0; }
};

}  // namespace qnnv
