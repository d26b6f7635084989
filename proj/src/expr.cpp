#include "dma/expr.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

#include "dma/error.hpp"

namespace dma {

enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Tan, Exp, Log, Sqrt, Sinh, Cosh, Tanh };

struct Expr::Node {
    Op op;
    double value = 0;
    int var = -1;
    NodePtr a, b;
};

namespace {

using NodePtr = Expr::NodePtr;

NodePtr mk(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
    auto n = std::make_shared<Expr::Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}
NodePtr cst(double c) {
    auto n = std::make_shared<Expr::Node>();
    n->op = Op::Const;
    n->value = c;
    return n;
}
NodePtr var(int k) {
    auto n = std::make_shared<Expr::Node>();
    n->op = Op::Var;
    n->var = k;
    return n;
}
bool is_c(const NodePtr& n, double c) { return n->op == Op::Const && n->value == c; }
bool is_const(const NodePtr& n) { return n->op == Op::Const; }

double apply(Op op, double x, double y = 0) {
    switch (op) {
        case Op::Add: return x + y;
        case Op::Sub: return x - y;
        case Op::Mul: return x * y;
        case Op::Div: return x / y;
        case Op::Pow: return std::pow(x, y);
        case Op::Neg: return -x;
        case Op::Sin: return std::sin(x);
        case Op::Cos: return std::cos(x);
        case Op::Tan: return std::tan(x);
        case Op::Exp: return std::exp(x);
        case Op::Log: return std::log(x);
        case Op::Sqrt: return std::sqrt(x);
        case Op::Sinh: return std::sinh(x);
        case Op::Cosh: return std::cosh(x);
        case Op::Tanh: return std::tanh(x);
        default: return 0;
    }
}

NodePtr add(NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b)) return cst(a->value + b->value);
    if (is_c(a, 0)) return b;
    if (is_c(b, 0)) return a;
    return mk(Op::Add, a, b);
}
NodePtr neg(NodePtr a) {
    if (is_const(a)) return cst(-a->value);
    if (a->op == Op::Neg) return a->a;
    return mk(Op::Neg, a);
}
NodePtr sub(NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b)) return cst(a->value - b->value);
    if (is_c(b, 0)) return a;
    if (is_c(a, 0)) return neg(b);
    return mk(Op::Sub, a, b);
}
NodePtr mul(NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b)) return cst(a->value * b->value);
    if (is_c(a, 0) || is_c(b, 0)) return cst(0);
    if (is_c(a, 1)) return b;
    if (is_c(b, 1)) return a;
    if (is_c(a, -1)) return neg(b);
    if (is_c(b, -1)) return neg(a);
    return mk(Op::Mul, a, b);
}
NodePtr div(NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b)) return cst(a->value / b->value);
    if (is_c(a, 0)) return cst(0);
    if (is_c(b, 1)) return a;
    return mk(Op::Div, a, b);
}
NodePtr pw(NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b)) return cst(std::pow(a->value, b->value));
    if (is_c(b, 0)) return cst(1);
    if (is_c(b, 1)) return a;
    return mk(Op::Pow, a, b);
}
NodePtr fn(Op op, NodePtr a) {
    if (is_const(a)) return cst(apply(op, a->value));
    return mk(op, a);
}

double eval_node(const Expr::Node& n, const double* x) {
    switch (n.op) {
        case Op::Const: return n.value;
        case Op::Var: return x[n.var];
        case Op::Add: return eval_node(*n.a, x) + eval_node(*n.b, x);
        case Op::Sub: return eval_node(*n.a, x) - eval_node(*n.b, x);
        case Op::Mul: return eval_node(*n.a, x) * eval_node(*n.b, x);
        case Op::Div: return eval_node(*n.a, x) / eval_node(*n.b, x);
        case Op::Pow: {
            double base = eval_node(*n.a, x);
            if (n.b->op == Op::Const) {
                double e = n.b->value;
                if (e == 2) return base * base;
                if (e == 3) return base * base * base;
                return std::pow(base, e);
            }
            return std::pow(base, eval_node(*n.b, x));
        }
        default: return apply(n.op, eval_node(*n.a, x));
    }
}

NodePtr diff_node(const NodePtr& n, int k) {
    const NodePtr& a = n->a;
    const NodePtr& b = n->b;
    switch (n->op) {
        case Op::Const: return cst(0);
        case Op::Var: return cst(n->var == k ? 1 : 0);
        case Op::Add: return add(diff_node(a, k), diff_node(b, k));
        case Op::Sub: return sub(diff_node(a, k), diff_node(b, k));
        case Op::Neg: return neg(diff_node(a, k));
        case Op::Mul: return add(mul(diff_node(a, k), b), mul(a, diff_node(b, k)));
        case Op::Div:
            return div(sub(mul(diff_node(a, k), b), mul(a, diff_node(b, k))), mul(b, b));
        case Op::Pow: {
            if (is_const(b)) {
                double e = b->value;
                return mul(mul(cst(e), pw(a, cst(e - 1))), diff_node(a, k));
            }
            // d(a^b) = a^b (b' log a + b a'/a)
            NodePtr t = add(mul(diff_node(b, k), fn(Op::Log, a)), div(mul(b, diff_node(a, k)), a));
            return mul(n, t);
        }
        case Op::Sin: return mul(fn(Op::Cos, a), diff_node(a, k));
        case Op::Cos: return neg(mul(fn(Op::Sin, a), diff_node(a, k)));
        case Op::Tan: {
            NodePtr c = fn(Op::Cos, a);
            return div(diff_node(a, k), mul(c, c));
        }
        case Op::Exp: return mul(n, diff_node(a, k));
        case Op::Log: return div(diff_node(a, k), a);
        case Op::Sqrt: return div(diff_node(a, k), mul(cst(2), n));
        case Op::Sinh: return mul(fn(Op::Cosh, a), diff_node(a, k));
        case Op::Cosh: return mul(fn(Op::Sinh, a), diff_node(a, k));
        case Op::Tanh: {
            NodePtr c = fn(Op::Cosh, a);
            return div(diff_node(a, k), mul(c, c));
        }
    }
    return cst(0);
}

const char* fn_name(Op op) {
    switch (op) {
        case Op::Sin: return "sin";
        case Op::Cos: return "cos";
        case Op::Tan: return "tan";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Sqrt: return "sqrt";
        case Op::Sinh: return "sinh";
        case Op::Cosh: return "cosh";
        case Op::Tanh: return "tanh";
        default: return "?";
    }
}

void print(std::ostream& os, const NodePtr& n, const std::vector<std::string>& vars) {
    switch (n->op) {
        case Op::Const: {
            std::ostringstream s;
            s.precision(17);
            s << n->value;
            if (n->value < 0)
                os << "(" << s.str() << ")";
            else
                os << s.str();
            return;
        }
        case Op::Var: os << vars[n->var]; return;
        case Op::Neg: os << "(-"; print(os, n->a, vars); os << ")"; return;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div:
        case Op::Pow: {
            const char* sym = n->op == Op::Add ? "+" : n->op == Op::Sub ? "-" : n->op == Op::Mul ? "*"
                             : n->op == Op::Div ? "/" : "^";
            os << "(";
            print(os, n->a, vars);
            os << sym;
            print(os, n->b, vars);
            os << ")";
            return;
        }
        default:
            os << fn_name(n->op) << "(";
            print(os, n->a, vars);
            os << ")";
    }
}

class Parser {
public:
    Parser(const std::string& s, const std::vector<std::string>& vars, const std::map<std::string, double>& c)
        : s_(s), vars_(vars), consts_(c) {}

    NodePtr parse() {
        NodePtr n = expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
        return n;
    }

private:
    const std::string& s_;
    const std::vector<std::string>& vars_;
    const std::map<std::string, double>& consts_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) {
        throw Error("parse-error", msg + " at position " + std::to_string(pos_) + " in '" + s_ + "'");
    }
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    NodePtr expr() {
        NodePtr n = term();
        for (;;) {
            if (eat('+'))
                n = add(n, term());
            else if (eat('-'))
                n = sub(n, term());
            else
                return n;
        }
    }
    NodePtr term() {
        NodePtr n = unary();
        for (;;) {
            if (eat('*'))
                n = mul(n, unary());
            else if (eat('/'))
                n = div(n, unary());
            else
                return n;
        }
    }
    NodePtr unary() {
        if (eat('-')) return neg(unary());
        if (eat('+')) return unary();
        return power();
    }
    NodePtr power() {
        NodePtr base = atom();
        if (eat('^')) return pw(base, unary());
        return base;
    }
    NodePtr atom() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end");
        char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr n = expr();
            if (!eat(')')) fail("missing ')'");
            return n;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = s_.c_str() + pos_;
            char* end = nullptr;
            double v = std::strtod(begin, &end);
            pos_ += std::size_t(end - begin);
            return cst(v);
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
            std::string id = s_.substr(start, pos_ - start);
            static const std::map<std::string, Op> fns = {
                {"sin", Op::Sin},   {"cos", Op::Cos},   {"tan", Op::Tan},   {"exp", Op::Exp},
                {"log", Op::Log},   {"sqrt", Op::Sqrt}, {"sinh", Op::Sinh}, {"cosh", Op::Cosh},
                {"tanh", Op::Tanh}};
            if (auto f = fns.find(id); f != fns.end()) {
                if (!eat('(')) fail("expected '(' after " + id);
                NodePtr a = expr();
                if (!eat(')')) fail("missing ')'");
                return fn(f->second, a);
            }
            for (std::size_t k = 0; k < vars_.size(); ++k)
                if (vars_[k] == id) return var(int(k));
            if (auto it = consts_.find(id); it != consts_.end()) return cst(it->second);
            if (id == "pi") return cst(M_PI);
            fail("unknown identifier '" + id + "'");
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }
};

}  // namespace

Expr Expr::parse(const std::string& text, const std::vector<std::string>& vars,
                 const std::map<std::string, double>& constants) {
    Parser p(text, vars, constants);
    return Expr(p.parse(), vars);
}

Expr Expr::constant(double c, const std::vector<std::string>& vars) { return Expr(cst(c), vars); }

double Expr::eval(const double* values) const { return eval_node(*root_, values); }

Expr Expr::diff(int k) const { return Expr(diff_node(root_, k), vars_); }

Expr Expr::diff(const std::string& v) const {
    for (std::size_t k = 0; k < vars_.size(); ++k)
        if (vars_[k] == v) return diff(int(k));
    return Expr(cst(0), vars_);
}

bool Expr::is_zero() const { return is_c(root_, 0); }
bool Expr::is_constant() const { return is_const(root_); }

std::string Expr::str() const {
    std::ostringstream os;
    print(os, root_, vars_);
    return os.str();
}

static void same_vars(const Expr& a, const Expr& b) {
    require(a.vars() == b.vars(), "expr-vars", "expressions use different variable lists");
}

Expr operator+(const Expr& a, const Expr& b) { same_vars(a, b); return Expr(add(a.root_, b.root_), a.vars_); }
Expr operator-(const Expr& a, const Expr& b) { same_vars(a, b); return Expr(sub(a.root_, b.root_), a.vars_); }
Expr operator*(const Expr& a, const Expr& b) { same_vars(a, b); return Expr(mul(a.root_, b.root_), a.vars_); }
Expr operator/(const Expr& a, const Expr& b) { same_vars(a, b); return Expr(div(a.root_, b.root_), a.vars_); }
Expr operator-(const Expr& a) { return Expr(neg(a.root_), a.vars_); }
Expr Expr::pow(double e) const { return Expr(pw(root_, cst(e)), vars_); }
Expr Expr::sqrt() const { return Expr(fn(Op::Sqrt, root_), vars_); }

}  // namespace dma
