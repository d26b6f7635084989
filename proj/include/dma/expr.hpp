#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace dma {

// Closed-form scalar expression over a fixed list of named variables.
// Supports + - * / ^, unary minus and the usual elementary functions.
class Expr {
public:
    struct Node;
    using NodePtr = std::shared_ptr<const Node>;

    Expr() = default;
    // Named constants are substituted while parsing.
    static Expr parse(const std::string& text, const std::vector<std::string>& vars,
                      const std::map<std::string, double>& constants = {});
    static Expr constant(double c, const std::vector<std::string>& vars);

    double eval(const double* values) const;
    double eval(std::initializer_list<double> values) const { return eval(values.begin()); }
    Expr diff(const std::string& var) const;
    Expr diff(int var_index) const;
    bool is_zero() const;
    bool is_constant() const;
    std::string str() const;
    const std::vector<std::string>& vars() const { return vars_; }
    bool valid() const { return root_ != nullptr; }

    // Combinators for building expressions programmatically.
    friend Expr operator+(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a, const Expr& b);
    friend Expr operator*(const Expr& a, const Expr& b);
    friend Expr operator/(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a);
    Expr pow(double exponent) const;
    Expr sqrt() const;

private:
    Expr(NodePtr root, std::vector<std::string> vars) : root_(std::move(root)), vars_(std::move(vars)) {}
    NodePtr root_;
    std::vector<std::string> vars_;
};

}  // namespace dma
