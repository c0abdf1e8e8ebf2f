#pragma once

#include <memory>
#include <string>

namespace imstab {

struct Deriv2 {
    double v = 0.0, d1 = 0.0, d2 = 0.0;
};

// One-variable expression (variable `x`) with exact first and second
// derivatives by forward-mode propagation. Grammar: + - * / ^ (constant
// exponent), parentheses, functions exp, log, sqrt, sin, cos, sinh, cosh,
// tanh, logcosh.
class Expr {
public:
    static Expr parse(const std::string& text);

    double value(double x) const;
    Deriv2 eval2(double x) const;
    const std::string& text() const { return text_; }

    struct Node;  // exposed for the parser implementation

private:
    std::shared_ptr<const Node> root_;
    std::string text_;
};

}  // namespace imstab
