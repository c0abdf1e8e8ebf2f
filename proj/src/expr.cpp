#include "imstab/expr.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace imstab {

namespace {

enum class Op { constant, var, add, sub, mul, div, pow, neg, fn };

double stable_logcosh(double x) {
    double a = std::abs(x);
    return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

}  // namespace

struct Expr::Node {
    Op op = Op::constant;
    double c = 0.0;          // constant value / pow exponent
    std::string fn_name;
    std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

struct Parser {
    const std::string& s;
    std::size_t pos = 0;

    explicit Parser(const std::string& text) : s(text) {}

    void skip() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool eat(char c) {
        skip();
        if (pos < s.size() && s[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }
    [[noreturn]] void fail(const std::string& what) {
        throw std::invalid_argument("expression parse error at position " + std::to_string(pos) +
                                    ": " + what);
    }

    NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr, double c = 0.0,
                 std::string fn = {}) {
        auto n = std::make_shared<Expr::Node>();
        n->op = op;
        n->a = std::move(a);
        n->b = std::move(b);
        n->c = c;
        n->fn_name = std::move(fn);
        return n;
    }

    NodePtr parse_expr() {
        NodePtr lhs = parse_term();
        for (;;) {
            skip();
            if (eat('+'))
                lhs = make(Op::add, lhs, parse_term());
            else if (eat('-'))
                lhs = make(Op::sub, lhs, parse_term());
            else
                return lhs;
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_factor();
        for (;;) {
            skip();
            if (eat('*'))
                lhs = make(Op::mul, lhs, parse_factor());
            else if (eat('/'))
                lhs = make(Op::div, lhs, parse_factor());
            else
                return lhs;
        }
    }

    NodePtr parse_factor() {
        NodePtr base = parse_unary();
        skip();
        if (eat('^')) {
            NodePtr exp = parse_factor();  // right associative
            double cexp;
            if (!try_fold(exp, cexp)) fail("exponent must be a constant");
            return make(Op::pow, base, nullptr, cexp);
        }
        return base;
    }

    NodePtr parse_unary() {
        skip();
        if (eat('-')) return make(Op::neg, parse_unary());
        eat('+');
        return parse_primary();
    }

    NodePtr parse_primary() {
        skip();
        if (pos >= s.size()) fail("unexpected end of input");
        char c = s[pos];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t used = 0;
            double val = std::stod(s.substr(pos), &used);
            pos += used;
            return make(Op::constant, nullptr, nullptr, val);
        }
        if (c == '(') {
            ++pos;
            NodePtr inner = parse_expr();
            if (!eat(')')) fail("missing closing parenthesis");
            return inner;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t start = pos;
            while (pos < s.size() &&
                   (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
                ++pos;
            std::string name = s.substr(start, pos - start);
            if (name == "x") return make(Op::var);
            if (name == "pi") return make(Op::constant, nullptr, nullptr, M_PI);
            if (name == "e") return make(Op::constant, nullptr, nullptr, M_E);
            if (!eat('(')) fail("unknown identifier '" + name + "'");
            NodePtr arg = parse_expr();
            if (!eat(')')) fail("missing closing parenthesis after " + name);
            static const char* known[] = {"exp",  "log",  "sqrt",    "sin", "cos",
                                          "sinh", "cosh", "logcosh", "tanh"};
            bool ok = false;
            for (const char* k : known) ok = ok || name == k;
            if (!ok) fail("unknown function '" + name + "'");
            return make(Op::fn, arg, nullptr, 0.0, name);
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    bool try_fold(const NodePtr& n, double& out) {
        switch (n->op) {
            case Op::constant: out = n->c; return true;
            case Op::neg: {
                double v;
                if (!try_fold(n->a, v)) return false;
                out = -v;
                return true;
            }
            default: return false;
        }
    }
};

Deriv2 eval_node(const Expr::Node& n, double x) {
    switch (n.op) {
        case Op::constant: return {n.c, 0.0, 0.0};
        case Op::var: return {x, 1.0, 0.0};
        case Op::neg: {
            Deriv2 a = eval_node(*n.a, x);
            return {-a.v, -a.d1, -a.d2};
        }
        case Op::add: {
            Deriv2 a = eval_node(*n.a, x), b = eval_node(*n.b, x);
            return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2};
        }
        case Op::sub: {
            Deriv2 a = eval_node(*n.a, x), b = eval_node(*n.b, x);
            return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2};
        }
        case Op::mul: {
            Deriv2 a = eval_node(*n.a, x), b = eval_node(*n.b, x);
            return {a.v * b.v, a.d1 * b.v + a.v * b.d1,
                    a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2};
        }
        case Op::div: {
            Deriv2 a = eval_node(*n.a, x), b = eval_node(*n.b, x);
            double q = a.v / b.v;
            double d1 = (a.d1 - q * b.d1) / b.v;
            double d2 = (a.d2 - 2.0 * d1 * b.d1 - q * b.d2) / b.v;
            return {q, d1, d2};
        }
        case Op::pow: {
            Deriv2 a = eval_node(*n.a, x);
            double p = n.c;
            double v = std::pow(a.v, p);
            double vp = p * std::pow(a.v, p - 1.0);
            double vpp = p * (p - 1.0) * std::pow(a.v, p - 2.0);
            return {v, vp * a.d1, vpp * a.d1 * a.d1 + vp * a.d2};
        }
        case Op::fn: {
            Deriv2 a = eval_node(*n.a, x);
            double f, fp, fpp;
            if (n.fn_name == "exp") {
                f = std::exp(a.v);
                fp = f;
                fpp = f;
            } else if (n.fn_name == "log") {
                f = std::log(a.v);
                fp = 1.0 / a.v;
                fpp = -1.0 / (a.v * a.v);
            } else if (n.fn_name == "sqrt") {
                f = std::sqrt(a.v);
                fp = 0.5 / f;
                fpp = -0.25 / (f * a.v);
            } else if (n.fn_name == "sin") {
                f = std::sin(a.v);
                fp = std::cos(a.v);
                fpp = -f;
            } else if (n.fn_name == "cos") {
                f = std::cos(a.v);
                fp = -std::sin(a.v);
                fpp = -f;
            } else if (n.fn_name == "sinh") {
                f = std::sinh(a.v);
                fp = std::cosh(a.v);
                fpp = f;
            } else if (n.fn_name == "cosh") {
                f = std::cosh(a.v);
                fp = std::sinh(a.v);
                fpp = f;
            } else if (n.fn_name == "tanh") {
                f = std::tanh(a.v);
                fp = 1.0 - f * f;
                fpp = -2.0 * f * fp;
            } else {  // logcosh
                double t = std::tanh(a.v);
                f = stable_logcosh(a.v);
                fp = t;
                fpp = 1.0 - t * t;
            }
            return {f, fp * a.d1, fpp * a.d1 * a.d1 + fp * a.d2};
        }
    }
    throw std::logic_error("expression: bad node");
}

}  // namespace

Expr Expr::parse(const std::string& text) {
    Parser p(text);
    Expr e;
    e.root_ = p.parse_expr();
    p.skip();
    if (p.pos != text.size()) p.fail("trailing input");
    e.text_ = text;
    return e;
}

double Expr::value(double x) const { return eval_node(*root_, x).v; }

Deriv2 Expr::eval2(double x) const { return eval_node(*root_, x); }

}  // namespace imstab
