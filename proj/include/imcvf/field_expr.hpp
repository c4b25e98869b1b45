#pragma once

// Symbolic scalar fields over the chart coordinates (t, r, th, ph).
// Nodes are immutable and shared; derivatives are exact.  Large derivative
// DAGs are evaluated through a compiled, CSE'd tape (see Tape below).

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace imcvf {

enum Coord : int { T = 0, R = 1, TH = 2, PH = 3 };
inline constexpr std::array<const char*, 4> coord_names{"t", "r", "th", "ph"};

struct CoordinatePoint {
  double t = 0, r = 1, th = std::numbers::pi / 2, ph = 0;
  double operator[](int i) const {
    switch (i) {
      case T: return t;
      case R: return r;
      case TH: return th;
      default: return ph;
    }
  }
};

struct ParseError : std::runtime_error {
  std::size_t offset;
  std::vector<std::string> expected;
  ParseError(const std::string& msg, std::size_t off, std::vector<std::string> exp)
      : std::runtime_error(msg + " at offset " + std::to_string(off)), offset(off),
        expected(std::move(exp)) {}
};

struct EvalError : std::domain_error {
  using std::domain_error::domain_error;
};

enum class Op : std::uint8_t {
  Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Tan, Exp, Log, Sqrt
};

namespace detail {

struct Node {
  Op op;
  double value = 0;  // Const: literal; Pow: exponent
  int var = 0;
  std::shared_ptr<const Node> a, b;
};
using NodeP = std::shared_ptr<const Node>;

inline double apply_unary(Op op, double x) {
  switch (op) {
    case Op::Neg: return -x;
    case Op::Sin: return std::sin(x);
    case Op::Cos: return std::cos(x);
    case Op::Tan: return std::tan(x);
    case Op::Exp: return std::exp(x);
    case Op::Log:
      if (!(x > 0)) throw EvalError("log of non-positive value");
      return std::log(x);
    case Op::Sqrt:
      if (x < 0) throw EvalError("sqrt of negative value");
      return std::sqrt(x);
    default: return x;
  }
}

inline double ipow(double x, long n) {
  bool inv = n < 0;
  unsigned long k = inv ? -static_cast<unsigned long>(n) : n;
  double acc = 1;
  while (k) {
    if (k & 1) acc *= x;
    x *= x;
    k >>= 1;
  }
  return inv ? 1 / acc : acc;
}

inline double apply_pow(double x, double p) {
  if (x == 0 && p < 0) throw EvalError("0 raised to a negative power");
  double ip;
  if (std::modf(p, &ip) == 0 && std::fabs(p) <= 64) return ipow(x, static_cast<long>(p));
  if (x < 0) throw EvalError("negative base with non-integer exponent");
  return std::pow(x, p);
}

inline double apply_binary(Op op, double x, double y) {
  switch (op) {
    case Op::Add: return x + y;
    case Op::Sub: return x - y;
    case Op::Mul: return x * y;
    case Op::Div:
      if (y == 0) throw EvalError("division by zero");
      return x / y;
    default: return 0;
  }
}

}  // namespace detail

class FieldExpr {
 public:
  FieldExpr() : FieldExpr(0.0) {}
  FieldExpr(double c) : n_(make_const(c)) {}  // NOLINT: literals convert
  explicit FieldExpr(detail::NodeP n) : n_(std::move(n)) {}

  static FieldExpr var(int c) {
    auto n = std::make_shared<detail::Node>();
    n->op = Op::Var;
    n->var = c;
    return FieldExpr(n);
  }
  static FieldExpr t() { return var(T); }
  static FieldExpr r() { return var(R); }
  static FieldExpr th() { return var(TH); }
  static FieldExpr ph() { return var(PH); }

  const detail::Node& node() const { return *n_; }
  const detail::NodeP& ptr() const { return n_; }
  Op op() const { return n_->op; }
  bool is_const() const { return n_->op == Op::Const; }
  bool is_const(double c) const { return is_const() && n_->value == c; }
  double const_value() const { return n_->value; }

  friend FieldExpr operator+(const FieldExpr& x, const FieldExpr& y) {
    if (x.is_const() && y.is_const()) return x.const_value() + y.const_value();
    if (x.is_const(0)) return y;
    if (y.is_const(0)) return x;
    return binary(Op::Add, x, y);
  }
  friend FieldExpr operator-(const FieldExpr& x, const FieldExpr& y) {
    if (x.is_const() && y.is_const()) return x.const_value() - y.const_value();
    if (y.is_const(0)) return x;
    if (x.is_const(0)) return -y;
    return binary(Op::Sub, x, y);
  }
  friend FieldExpr operator*(const FieldExpr& x, const FieldExpr& y) {
    if (x.is_const() && y.is_const()) return x.const_value() * y.const_value();
    if (x.is_const(0) || y.is_const(0)) return 0.0;
    if (x.is_const(1)) return y;
    if (y.is_const(1)) return x;
    if (x.is_const(-1)) return -y;
    if (y.is_const(-1)) return -x;
    return binary(Op::Mul, x, y);
  }
  friend FieldExpr operator/(const FieldExpr& x, const FieldExpr& y) {
    if (x.is_const() && y.is_const() && y.const_value() != 0)
      return x.const_value() / y.const_value();
    if (x.is_const(0) && !y.is_const(0)) return 0.0;
    if (y.is_const(1)) return x;
    return binary(Op::Div, x, y);
  }
  FieldExpr operator-() const {
    if (is_const()) return -const_value();
    if (op() == Op::Neg) return FieldExpr(n_->a);
    return unary(Op::Neg, *this);
  }
  FieldExpr& operator+=(const FieldExpr& o) { return *this = *this + o; }
  FieldExpr& operator-=(const FieldExpr& o) { return *this = *this - o; }
  FieldExpr& operator*=(const FieldExpr& o) { return *this = *this * o; }

  friend FieldExpr pow(const FieldExpr& x, double p) {
    if (p == 0) return 1.0;
    if (p == 1) return x;
    if (x.is_const()) {
      if (x.const_value() != 0 || p > 0) return detail::apply_pow(x.const_value(), p);
    }
    auto n = std::make_shared<detail::Node>();
    n->op = Op::Pow;
    n->value = p;
    n->a = x.n_;
    return FieldExpr(n);
  }
  friend FieldExpr sin(const FieldExpr& x) { return fold1(Op::Sin, x); }
  friend FieldExpr cos(const FieldExpr& x) { return fold1(Op::Cos, x); }
  friend FieldExpr tan(const FieldExpr& x) { return fold1(Op::Tan, x); }
  friend FieldExpr exp(const FieldExpr& x) { return fold1(Op::Exp, x); }
  friend FieldExpr log(const FieldExpr& x) { return fold1(Op::Log, x); }
  friend FieldExpr sqrt(const FieldExpr& x) { return fold1(Op::Sqrt, x); }

  // Direct recursive evaluation.  Fine for small expressions; use Tape for
  // derivative-heavy work.
  double eval(const CoordinatePoint& p) const { return eval_node(*n_, p); }

  // Exact partial derivative; DAG sharing is preserved via a per-call memo.
  FieldExpr diff(int var) const {
    std::unordered_map<const detail::Node*, FieldExpr> memo;
    return diff_node(n_, var, memo);
  }

  // Depends on coordinate `var` at all?
  bool depends_on(int var) const {
    std::unordered_map<const detail::Node*, bool> memo;
    return depends(n_.get(), var, memo);
  }

  std::string str() const {
    std::string out;
    print(*n_, out);
    return out;
  }

 private:
  detail::NodeP n_;

  static detail::NodeP make_const(double c) {
    auto n = std::make_shared<detail::Node>();
    n->op = Op::Const;
    n->value = c;
    return n;
  }
  static FieldExpr binary(Op op, const FieldExpr& x, const FieldExpr& y) {
    auto n = std::make_shared<detail::Node>();
    n->op = op;
    n->a = x.n_;
    n->b = y.n_;
    return FieldExpr(n);
  }
  static FieldExpr unary(Op op, const FieldExpr& x) {
    auto n = std::make_shared<detail::Node>();
    n->op = op;
    n->a = x.n_;
    return FieldExpr(n);
  }
  static FieldExpr fold1(Op op, const FieldExpr& x) {
    if (x.is_const()) {
      double c = x.const_value();
      if ((op != Op::Log || c > 0) && (op != Op::Sqrt || c >= 0)) return detail::apply_unary(op, c);
    }
    return unary(op, x);
  }

  static double eval_node(const detail::Node& n, const CoordinatePoint& p) {
    switch (n.op) {
      case Op::Const: return n.value;
      case Op::Var: return p[n.var];
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div:
        return detail::apply_binary(n.op, eval_node(*n.a, p), eval_node(*n.b, p));
      case Op::Pow: return detail::apply_pow(eval_node(*n.a, p), n.value);
      default: return detail::apply_unary(n.op, eval_node(*n.a, p));
    }
  }

  static bool depends(const detail::Node* n, int var,
                      std::unordered_map<const detail::Node*, bool>& memo) {
    if (n->op == Op::Const) return false;
    if (n->op == Op::Var) return n->var == var;
    if (auto it = memo.find(n); it != memo.end()) return it->second;
    bool d = depends(n->a.get(), var, memo) || (n->b && depends(n->b.get(), var, memo));
    memo.emplace(n, d);
    return d;
  }

  static FieldExpr diff_node(const detail::NodeP& np, int var,
                             std::unordered_map<const detail::Node*, FieldExpr>& memo) {
    const detail::Node& n = *np;
    if (n.op == Op::Const) return 0.0;
    if (n.op == Op::Var) return n.var == var ? 1.0 : 0.0;
    if (auto it = memo.find(&n); it != memo.end()) return it->second;
    FieldExpr A(n.a), dA = diff_node(n.a, var, memo);
    FieldExpr out;
    switch (n.op) {
      case Op::Add: out = dA + diff_node(n.b, var, memo); break;
      case Op::Sub: out = dA - diff_node(n.b, var, memo); break;
      case Op::Mul: {
        FieldExpr B(n.b);
        out = dA * B + A * diff_node(n.b, var, memo);
        break;
      }
      case Op::Div: {
        FieldExpr B(n.b), dB = diff_node(n.b, var, memo);
        if (dB.is_const(0))
          out = dA / B;
        else
          out = (dA * B - A * dB) / (B * B);
        break;
      }
      case Op::Pow:
        if (dA.is_const(0)) {
          out = 0.0;
        } else if (n.value == 2) {
          out = 2.0 * A * dA;
        } else {
          out = n.value * pow(A, n.value - 1) * dA;
        }
        break;
      case Op::Neg: out = -dA; break;
      case Op::Sin: out = cos(A) * dA; break;
      case Op::Cos: out = -(sin(A) * dA); break;
      case Op::Tan: out = dA / pow(cos(A), 2); break;
      case Op::Exp: out = FieldExpr(np) * dA; break;
      case Op::Log: out = dA / A; break;
      case Op::Sqrt: out = dA / (2.0 * FieldExpr(np)); break;
      default: break;
    }
    memo.emplace(&n, out);
    return out;
  }

  static int prec(const detail::Node& n) {
    switch (n.op) {
      case Op::Add:
      case Op::Sub: return 1;
      case Op::Mul:
      case Op::Div: return 2;
      case Op::Neg: return 3;
      case Op::Pow: return 4;
      case Op::Const: return n.value < 0 ? 3 : 5;
      default: return 5;
    }
  }

  static void print_num(double v, std::string& out) {
    char buf[40];
    if (v == std::numbers::pi) {
      out += "pi";
      return;
    }
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
  }

  static void print_wrapped(const detail::Node& n, int min_prec, std::string& out) {
    if (prec(n) < min_prec) {
      out += '(';
      print(n, out);
      out += ')';
    } else {
      print(n, out);
    }
  }

  static void print(const detail::Node& n, std::string& out) {
    switch (n.op) {
      case Op::Const: print_num(n.value, out); return;
      case Op::Var: out += coord_names[n.var]; return;
      case Op::Add:
      case Op::Sub:
        print_wrapped(*n.a, 1, out);
        out += n.op == Op::Add ? "+" : "-";
        print_wrapped(*n.b, 2, out);  // left-assoc: right operand needs higher prec
        return;
      case Op::Mul:
      case Op::Div:
        print_wrapped(*n.a, 2, out);
        out += n.op == Op::Mul ? "*" : "/";
        print_wrapped(*n.b, 3, out);
        return;
      case Op::Neg:
        out += '-';
        print_wrapped(*n.a, 3, out);
        return;
      case Op::Pow:
        print_wrapped(*n.a, 5, out);
        out += '^';
        if (n.value < 0) {
          out += '(';
          print_num(n.value, out);
          out += ')';
        } else {
          print_num(n.value, out);
        }
        return;
      default: {
        static constexpr std::array<const char*, 14> fn{
            "", "", "", "", "", "", "", "", "sin", "cos", "tan", "exp", "log", "sqrt"};
        out += fn[static_cast<int>(n.op)];
        out += '(';
        print(*n.a, out);
        out += ')';
      }
    }
  }
};

inline FieldExpr sqr(const FieldExpr& x) { return pow(x, 2); }

// ---------------------------------------------------------------------------
// Parser.  Precedence: ^ (right-assoc) > unary minus > * / > + -.

class Parser {
 public:
  Parser(std::string_view src, const std::map<std::string, double>* params)
      : s_(src), params_(params) {}

  FieldExpr run() {
    FieldExpr e = expr();
    skip_ws();
    if (i_ != s_.size()) fail("unexpected character", {"operator", "end of input"});
    return e;
  }

 private:
  std::string_view s_;
  const std::map<std::string, double>* params_;
  std::size_t i_ = 0;

  [[noreturn]] void fail(const std::string& what, std::vector<std::string> expected) {
    throw ParseError(what, i_, std::move(expected));
  }
  void skip_ws() {
    while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t' || s_[i_] == '\n' || s_[i_] == '\r'))
      ++i_;
  }
  bool eat(char c) {
    skip_ws();
    if (i_ < s_.size() && s_[i_] == c) {
      ++i_;
      return true;
    }
    return false;
  }

  FieldExpr expr() {
    FieldExpr lhs = term();
    for (;;) {
      if (eat('+'))
        lhs = lhs + term();
      else if (eat('-'))
        lhs = lhs - term();
      else
        return lhs;
    }
  }
  FieldExpr term() {
    FieldExpr lhs = factor();
    for (;;) {
      if (eat('*')) {
        lhs = lhs * factor();
      } else if (eat('/')) {
        FieldExpr rhs = factor();
        lhs = lhs / rhs;
      } else {
        return lhs;
      }
    }
  }
  FieldExpr factor() {
    if (eat('-')) return -factor();
    return power();
  }
  FieldExpr power() {
    FieldExpr b = primary();
    if (eat('^')) {
      std::size_t at = i_;
      FieldExpr ex = exponent();
      if (!ex.is_const()) {
        i_ = at;
        fail("exponent must be a constant", {"number", "pi", "parameter"});
      }
      return pow(b, ex.const_value());
    }
    return b;
  }
  FieldExpr exponent() {
    if (eat('-')) return -exponent();
    return power();
  }
  FieldExpr primary() {
    skip_ws();
    if (i_ >= s_.size()) fail("unexpected end of input", {"number", "identifier", "(", "-"});
    char ch = s_[i_];
    if (ch == '(') {
      ++i_;
      FieldExpr e = expr();
      if (!eat(')')) fail("unbalanced parenthesis", {")"});
      return e;
    }
    if ((ch >= '0' && ch <= '9') || ch == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') return ident();
    fail("unexpected character", {"number", "identifier", "(", "-"});
  }
  FieldExpr number() {
    std::size_t start = i_;
    while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
    if (i_ < s_.size() && s_[i_] == '.') {
      ++i_;
      while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
    }
    if (i_ < s_.size() && (s_[i_] == 'e' || s_[i_] == 'E')) {
      std::size_t save = i_++;
      if (i_ < s_.size() && (s_[i_] == '+' || s_[i_] == '-')) ++i_;
      if (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) {
        while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
      } else {
        i_ = save;
      }
    }
    std::string lit(s_.substr(start, i_ - start));
    if (lit == ".") {
      i_ = start;
      fail("malformed number", {"digit"});
    }
    return std::stod(lit);
  }
  FieldExpr ident() {
    std::size_t start = i_;
    while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_')) ++i_;
    std::string name(s_.substr(start, i_ - start));
    static const std::map<std::string, Op> fns{{"sin", Op::Sin}, {"cos", Op::Cos},
                                               {"tan", Op::Tan}, {"exp", Op::Exp},
                                               {"log", Op::Log}, {"sqrt", Op::Sqrt}};
    if (auto it = fns.find(name); it != fns.end()) {
      if (!eat('(')) fail("expected '(' after function name", {"("});
      FieldExpr arg = expr();
      if (!eat(')')) fail("unbalanced parenthesis", {")"});
      switch (it->second) {
        case Op::Sin: return sin(arg);
        case Op::Cos: return cos(arg);
        case Op::Tan: return tan(arg);
        case Op::Exp: return exp(arg);
        case Op::Log: return log(arg);
        default: return sqrt(arg);
      }
    }
    for (int c = 0; c < 4; ++c)
      if (name == coord_names[c]) return FieldExpr::var(c);
    if (name == "pi") return std::numbers::pi;
    if (params_) {
      if (auto it = params_->find(name); it != params_->end()) return it->second;
    }
    i_ = start;
    throw ParseError("unknown identifier '" + name + "'", start,
                     {"t", "r", "th", "ph", "pi", "sin", "cos", "tan", "exp", "log", "sqrt"});
  }
};

inline FieldExpr parse(std::string_view src, const std::map<std::string, double>& params = {}) {
  return Parser(src, &params).run();
}

// ---------------------------------------------------------------------------
// Tape: a flat, common-subexpression-eliminated program evaluating many
// expressions at once.  Immutable after construction; eval is reentrant when
// each caller supplies its own scratch buffer.

class Tape {
 public:
  Tape() = default;
  explicit Tape(const std::vector<FieldExpr>& outputs) {
    std::unordered_map<const detail::Node*, int> seen;
    for (const auto& e : outputs) outputs_.push_back(emit(e.ptr().get(), seen));
  }

  std::size_t size() const { return code_.size(); }
  std::size_t num_outputs() const { return outputs_.size(); }

  void eval(const CoordinatePoint& p, std::vector<double>& scratch, std::span<double> out) const {
    scratch.resize(code_.size());
    double* s = scratch.data();
    for (std::size_t k = 0; k < code_.size(); ++k) {
      const Instr& in = code_[k];
      switch (in.op) {
        case Op::Const: s[k] = in.c; break;
        case Op::Var: s[k] = p[in.a]; break;
        case Op::Add: s[k] = s[in.a] + s[in.b]; break;
        case Op::Sub: s[k] = s[in.a] - s[in.b]; break;
        case Op::Mul: s[k] = s[in.a] * s[in.b]; break;
        case Op::Div:
          if (s[in.b] == 0) throw EvalError("division by zero");
          s[k] = s[in.a] / s[in.b];
          break;
        case Op::Pow: s[k] = detail::apply_pow(s[in.a], in.c); break;
        default: s[k] = detail::apply_unary(in.op, s[in.a]);
      }
    }
    for (std::size_t j = 0; j < outputs_.size(); ++j) out[j] = s[outputs_[j]];
  }

  std::vector<double> eval(const CoordinatePoint& p) const {
    std::vector<double> scratch, out(outputs_.size());
    eval(p, scratch, out);
    return out;
  }

 private:
  struct Instr {
    Op op;
    int a = -1, b = -1;
    double c = 0;
  };
  struct Key {
    Op op;
    int a, b;
    double c;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::size_t h = std::hash<double>{}(k.c);
      h ^= (static_cast<std::size_t>(k.op) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
      h ^= (static_cast<std::size_t>(k.a) * 0x100000001b3ULL + (h << 6) + (h >> 2));
      h ^= (static_cast<std::size_t>(k.b) * 0xc2b2ae3d27d4eb4fULL + (h << 6) + (h >> 2));
      return h;
    }
  };
  std::vector<Instr> code_;
  std::vector<int> outputs_;
  std::unordered_map<Key, int, KeyHash> cse_;

  int push(Key k) {
    if (auto it = cse_.find(k); it != cse_.end()) return it->second;
    int id = static_cast<int>(code_.size());
    code_.push_back({k.op, k.a, k.b, k.c});
    cse_.emplace(k, id);
    return id;
  }

  // Iterative post-order so deep ASTs cannot blow the stack.
  int emit(const detail::Node* root, std::unordered_map<const detail::Node*, int>& seen) {
    if (auto it = seen.find(root); it != seen.end()) return it->second;
    std::vector<std::pair<const detail::Node*, bool>> stack{{root, false}};
    while (!stack.empty()) {
      auto [n, expanded] = stack.back();
      stack.pop_back();
      if (seen.count(n)) continue;
      if (n->op == Op::Const) {
        seen[n] = push({Op::Const, -1, -1, n->value});
        continue;
      }
      if (n->op == Op::Var) {
        seen[n] = push({Op::Var, n->var, -1, 0});
        continue;
      }
      if (!expanded) {
        stack.push_back({n, true});
        stack.push_back({n->a.get(), false});
        if (n->b) stack.push_back({n->b.get(), false});
        continue;
      }
      int a = seen.at(n->a.get());
      int b = n->b ? seen.at(n->b.get()) : -1;
      // commutative ops: canonical operand order improves CSE hits
      if ((n->op == Op::Add || n->op == Op::Mul) && b < a) std::swap(a, b);
      double c = n->op == Op::Pow ? n->value : 0.0;
      seen[n] = push({n->op, a, b, c});
    }
    return seen.at(root);
  }
};

}  // namespace imcvf
