#ifndef REGIONSOLVE_EXPR_HPP
#define REGIONSOLVE_EXPR_HPP

#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace regionsolve {

/// Error raised while parsing an expression. `offset` is the byte offset
/// into the input where the problem was detected.
class parse_error : public std::runtime_error {
public:
    parse_error(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at offset " + std::to_string(offset) + ")"),
          offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Error raised during evaluation (log of non-positive, division by zero,
/// non-finite result). Carries the offset of the offending node.
class eval_error : public std::runtime_error {
public:
    eval_error(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (node at offset " + std::to_string(offset) + ")"),
          offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Immutable scalar expression in the time variable and x1..xn.
///
/// Grammar (whitespace-insensitive):
///   expr    := term (('+'|'-') term)*
///   term    := unary (('*'|'/') unary)*
///   unary   := '-' unary | power
///   power   := primary ('^' signed)*          -- left-associative
///   signed  := '-' signed | primary           -- exponent may carry a sign
///   primary := number | var | fn '(' expr ')' | '(' expr ')'
///   fn      := exp | log | sin | cos | sqrt | abs
///
/// '^' binds tighter than unary minus, so "-x1^2" is -(x1^2).
/// Evaluation is pure; an Expression is safe to evaluate concurrently.
class Expression {
public:
    struct Node;
    using NodePtr = std::shared_ptr<const Node>;

    enum class Op {
        constant,
        variable,  // index 0 = time variable, 1..n = x1..xn
        neg,
        exp,
        log,
        sin,
        cos,
        sqrt,
        abs,
        add,
        sub,
        mul,
        div,
        pow
    };

    struct Node {
        Op op;
        double value = 0.0;   // constant
        int var_index = -1;   // variable
        NodePtr lhs, rhs;     // rhs only for binary ops
        std::size_t offset = 0;
    };

    Expression() = default;
    explicit Expression(NodePtr root, int dim, std::string time_var)
        : root_(std::move(root)), dim_(dim), time_var_(std::move(time_var)) {}

    bool empty() const noexcept { return root_ == nullptr; }
    int dimension() const noexcept { return dim_; }
    const std::string& time_var() const noexcept { return time_var_; }
    const NodePtr& root() const noexcept { return root_; }

    /// env[0] = time variable, env[1..n] = x1..xn.
    double eval(std::span<const double> env) const;
    /// Convenience form taking named bindings ("t"/"s", "x1", ...).
    double eval(const std::map<std::string, double>& env) const;

    /// Canonical text form; parse(print(e)).print() == print(e).
    std::string print() const;

    /// Returns -this by wrapping the root in a negation node.
    Expression negated() const;

private:
    NodePtr root_;
    int dim_ = 0;
    std::string time_var_ = "t";
};

/// Parses `text` over the variables {t, x1..xn}. Throws parse_error on
/// syntax errors (with byte offset), unknown variables and arity mistakes.
Expression parse_expression(const std::string& text, int n);

/// Parses a measure-density expression over the single variable `s`.
Expression parse_density(const std::string& text);

/// Same as Expression::eval; kept as a free function mirroring parse_expression.
double eval_expression(const Expression& e, std::span<const double> env);
double eval_expression(const Expression& e, const std::map<std::string, double>& env);

}  // namespace regionsolve

#endif
