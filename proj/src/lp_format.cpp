// SPDX-License-Identifier: Apache-2.0
#include "qnnv/lp_format.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <unordered_map>
#include <vector>

namespace qnnv {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_terms(std::ostringstream& os, const std::vector<LinTerm>& terms, const ILPModel& model) {
  if (terms.empty()) {
    os << " 0 " << model.var(0).name;
    return;
  }
  for (size_t i = 0; i < terms.size(); ++i) {
    const double c = terms[i].coeff;
    if (i > 0 && i % 8 == 0) os << "\n   ";
    if (c < 0) os << " - " << num(-c);
    else if (i > 0) os << " + " << num(c);
    else os << ' ' << num(c);
    os << ' ' << model.var(terms[i].var).name;
  }
}

void write_name_list(std::ostringstream& os, const ILPModel& model, VarKind kind) {
  size_t n = 0;
  for (const Var& v : model.vars()) {
    if (v.kind != kind) continue;
    os << (n % 8 == 0 ? "\n " : " ") << v.name;
    ++n;
  }
  os << '\n';
}

// --- parsing --------------------------------------------------------------

enum class Tok { kName, kNumber, kCmp, kPlus, kMinus, kColon, kEnd };

struct Token {
  Tok kind = Tok::kEnd;
  std::string text;
  double value = 0.0;
  Cmp cmp = Cmp::kLe;
  int line = 0;
};

bool name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || std::string_view("!\"#$%&()/,.;?@_`'{}|~[]^").find(c) != std::string_view::npos;
}

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  int line = 1;
  size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '\\') {
      while (i < s.size() && s[i] != '\n') ++i;
    } else if (c == '<' || c == '>' || c == '=') {
      Token t{Tok::kCmp, "", 0.0, Cmp::kEq, line};
      const char next = i + 1 < s.size() ? s[i + 1] : '\0';
      if (c == '<') t.cmp = Cmp::kLe;
      else if (c == '>') t.cmp = Cmp::kGe;
      else if (next == '<') t.cmp = Cmp::kLe;
      else if (next == '>') t.cmp = Cmp::kGe;
      i += (next == '=' || (c == '=' && (next == '<' || next == '>'))) ? 2 : 1;
      out.push_back(t);
    } else if (c == '+' || c == '-') {
      out.push_back({c == '+' ? Tok::kPlus : Tok::kMinus, std::string(1, c), 0.0, Cmp::kLe, line});
      ++i;
    } else if (c == ':') {
      out.push_back({Tok::kColon, ":", 0.0, Cmp::kLe, line});
      ++i;
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      size_t j = i;
      while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.')) ++j;
      if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
        size_t k = j + 1;
        if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
        if (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) {
          j = k;
          while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
        }
      }
      Token t{Tok::kNumber, std::string(s.substr(i, j - i)), 0.0, Cmp::kLe, line};
      const auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.value);
      if (ec != std::errc() || p != t.text.data() + t.text.size())
        throw LpParseError("line " + std::to_string(line) + ": bad number '" + t.text + "'");
      out.push_back(std::move(t));
      i = j;
    } else if (name_char(c)) {
      size_t j = i;
      while (j < s.size() && name_char(s[j])) ++j;
      out.push_back({Tok::kName, std::string(s.substr(i, j - i)), 0.0, Cmp::kLe, line});
      i = j;
    } else {
      throw LpParseError("line " + std::to_string(line) + ": unexpected character '" + std::string(1, c) + "'");
    }
  }
  out.push_back({Tok::kEnd, "", 0.0, Cmp::kLe, line});
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

enum class Section { kNone, kObjective, kConstraints, kBounds, kGeneral, kBinary, kEnd };

struct ProtoVar {
  std::string name;
  double lo = 0.0;
  double hi = INFINITY;
  std::optional<VarKind> kind;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(tokenize(text)) {}

  ILPModel run() {
    Section sec = Section::kNone;
    while (peek().kind != Tok::kEnd) {
      if (auto s = section_keyword()) {
        sec = *s;
        if (sec == Section::kEnd) break;
        continue;
      }
      switch (sec) {
        case Section::kObjective: parse_objective(); break;
        case Section::kConstraints: parse_constraint(); break;
        case Section::kBounds: parse_bound(); break;
        case Section::kGeneral: declare_kind(VarKind::kInteger); break;
        case Section::kBinary: declare_kind(VarKind::kBinary); break;
        default: fail("expected a section keyword");
      }
    }
    ILPModel m;
    for (const ProtoVar& v : vars_) {
      if (!v.kind) throw LpParseError("variable " + v.name + " is continuous; only integer models are supported");
      double lo = v.lo, hi = v.hi;
      if (*v.kind == VarKind::kBinary) {
        lo = std::max(lo, 0.0);
        hi = std::min(hi, 1.0);
      }
      if (!std::isfinite(lo) || !std::isfinite(hi)) throw LpParseError("variable " + v.name + " is unbounded");
      m.add_var(v.name, *v.kind, lo, hi);
    }
    for (LinConstraint& c : rows_) m.add_constraint(std::move(c));
    return m;
  }

 private:
  const Token& peek(size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  const Token& take() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
  [[noreturn]] void fail(const std::string& what) const {
    throw LpParseError("line " + std::to_string(peek().line) + ": " + what +
                       (peek().text.empty() ? "" : " near '" + peek().text + "'"));
  }

  std::optional<Section> section_keyword() {
    if (peek().kind != Tok::kName) return std::nullopt;
    const std::string w = lower(peek().text);
    const auto one = [&](Section s) {
      ++pos_;
      return s;
    };
    if (w == "minimize" || w == "maximize" || w == "minimum" || w == "maximum" || w == "min" || w == "max")
      return one(Section::kObjective);
    if ((w == "subject" || w == "such") && peek(1).kind == Tok::kName) {
      const std::string w2 = lower(peek(1).text);
      if (w2 == "to" || w2 == "that") {
        pos_ += 2;
        return Section::kConstraints;
      }
    }
    if (w == "st" || w == "s.t.") return one(Section::kConstraints);
    if (w == "bounds" || w == "bound") return one(Section::kBounds);
    if (w == "general" || w == "generals" || w == "gen" || w == "integer" || w == "integers")
      return one(Section::kGeneral);
    if (w == "binary" || w == "binaries" || w == "bin") return one(Section::kBinary);
    if (w == "end") return one(Section::kEnd);
    return std::nullopt;
  }

  bool at_keyword() {
    const size_t save = pos_;
    const bool kw = section_keyword().has_value();
    pos_ = save;
    return kw;
  }

  int var_id(const std::string& name) {
    const auto it = ids_.find(name);
    if (it != ids_.end()) return it->second;
    const int id = static_cast<int>(vars_.size());
    ids_.emplace(name, id);
    vars_.push_back(ProtoVar{name, 0.0, INFINITY, std::nullopt});
    return id;
  }

  void skip_label() {
    if (peek().kind == Tok::kName && peek(1).kind == Tok::kColon) pos_ += 2;
  }

  // [sign] [number] name, repeated; stops at a comparator, keyword or end.
  std::vector<LinTerm> parse_terms() {
    std::vector<LinTerm> terms;
    while (true) {
      double sign = 1.0;
      bool had_sign = false;
      while (peek().kind == Tok::kPlus || peek().kind == Tok::kMinus) {
        if (take().kind == Tok::kMinus) sign = -sign;
        had_sign = true;
      }
      double coeff = 1.0;
      if (peek().kind == Tok::kNumber) {
        coeff = take().value;
        if (peek().kind != Tok::kName || at_keyword()) fail("constant terms are not supported on the left-hand side");
      }
      if (peek().kind != Tok::kName || at_keyword() || peek(1).kind == Tok::kColon) {
        if (had_sign) fail("dangling sign");
        return terms;
      }
      terms.push_back({var_id(take().text), sign * coeff});
    }
  }

  double parse_signed_number() {
    double sign = 1.0;
    while (peek().kind == Tok::kPlus || peek().kind == Tok::kMinus)
      if (take().kind == Tok::kMinus) sign = -sign;
    if (peek().kind == Tok::kNumber) return sign * take().value;
    if (peek().kind == Tok::kName) {
      const std::string w = lower(peek().text);
      if (w == "inf" || w == "infinity") {
        ++pos_;
        return sign * INFINITY;
      }
    }
    fail("expected a number");
  }

  void parse_objective() {
    skip_label();
    parse_terms();
    if (!at_keyword() && peek().kind != Tok::kEnd) fail("unexpected token in objective");
  }

  void parse_constraint() {
    skip_label();
    LinConstraint c;
    c.terms = parse_terms();
    if (peek().kind != Tok::kCmp) fail("expected a comparison operator");
    c.cmp = take().cmp;
    c.rhs = parse_signed_number();
    // Merge repeated variables.
    std::vector<LinTerm> merged;
    std::unordered_map<int, size_t> at;
    for (const LinTerm& t : c.terms) {
      const auto [it, fresh] = at.emplace(t.var, merged.size());
      if (fresh) merged.push_back(t);
      else merged[it->second].coeff += t.coeff;
    }
    c.terms = std::move(merged);
    rows_.push_back(std::move(c));
  }

  bool is_inf_name() const {
    if (peek().kind != Tok::kName) return false;
    const std::string w = lower(peek().text);
    return w == "inf" || w == "infinity";
  }

  static void apply(ProtoVar& v, Cmp cmp, double value, bool var_on_left) {
    if (cmp == Cmp::kEq) {
      v.lo = v.hi = value;
    } else if ((cmp == Cmp::kLe) == var_on_left) {
      v.hi = value;
    } else {
      v.lo = value;
    }
  }

  void parse_bound() {
    const bool starts_with_number =
        peek().kind == Tok::kNumber || peek().kind == Tok::kPlus || peek().kind == Tok::kMinus || is_inf_name();
    if (starts_with_number) {
      const double a = parse_signed_number();
      if (peek().kind != Tok::kCmp) fail("expected a comparison operator in bound");
      const Cmp c1 = take().cmp;
      if (peek().kind != Tok::kName) fail("expected a variable in bound");
      ProtoVar& v = vars_[var_id(take().text)];
      apply(v, c1, a, false);
      if (peek().kind == Tok::kCmp) {
        const Cmp c2 = take().cmp;
        apply(v, c2, parse_signed_number(), true);
      }
      return;
    }
    if (peek().kind != Tok::kName) fail("expected a bound");
    const int id = var_id(take().text);
    if (peek().kind == Tok::kName && lower(peek().text) == "free") {
      ++pos_;
      vars_[id].lo = -INFINITY;
      vars_[id].hi = INFINITY;
      return;
    }
    if (peek().kind != Tok::kCmp) fail("expected a comparison operator in bound");
    const Cmp c = take().cmp;
    apply(vars_[id], c, parse_signed_number(), true);
  }

  void declare_kind(VarKind kind) {
    if (peek().kind != Tok::kName) fail("expected a variable name");
    vars_[var_id(take().text)].kind = kind;
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
  std::vector<ProtoVar> vars_;
  std::unordered_map<std::string, int> ids_;
  std::vector<LinConstraint> rows_;
};

}  // namespace

std::string write_lp(const ILPModel& model, const std::string& comment) {
  if (model.num_vars() == 0) throw std::invalid_argument("write_lp: model has no variables");
  std::ostringstream os;
  if (!comment.empty()) {
    std::istringstream lines(comment);
    for (std::string l; std::getline(lines, l);) os << "\\ " << l << '\n';
  }
  os << "Minimize\n obj:";
  std::vector<LinTerm> zero;
  for (const Var& v : model.vars()) zero.push_back({v.id, 0.0});
  write_terms(os, zero, model);
  os << "\nSubject To\n";
  for (size_t i = 0; i < model.num_constraints(); ++i) {
    const LinConstraint& c = model.constraints()[i];
    os << " c" << i << ':';
    write_terms(os, c.terms, model);
    os << ' ' << cmp_symbol(c.cmp) << ' ' << num(c.rhs) << '\n';
  }
  os << "Bounds\n";
  for (const Var& v : model.vars()) {
    if (v.lo == v.hi) os << ' ' << v.name << " = " << num(v.lo) << '\n';
    else os << ' ' << num(v.lo) << " <= " << v.name << " <= " << num(v.hi) << '\n';
  }
  os << "General";
  write_name_list(os, model, VarKind::kInteger);
  os << "Binary";
  write_name_list(os, model, VarKind::kBinary);
  os << "End\n";
  return os.str();
}

void write_lp_file(const ILPModel& model, const std::filesystem::path& path, const std::string& comment) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << write_lp(model, comment);
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

ILPModel parse_lp(std::string_view text) { return Parser(text).run(); }

ILPModel parse_lp_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_lp(ss.str());
}

}  // namespace qnnv
