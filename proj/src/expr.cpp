#include "regionsolve/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace regionsolve {

namespace {

struct Parser {
    const std::string& text;
    std::size_t pos = 0;
    int dim;           // number of x-variables; 0 for densities
    std::string tvar;  // "t" or "s"

    Parser(const std::string& s, int n, std::string tv) : text(s), dim(n), tvar(std::move(tv)) {}

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    bool eof() {
        skip_ws();
        return pos >= text.size();
    }

    char peek() {
        skip_ws();
        return pos < text.size() ? text[pos] : '\0';
    }

    bool accept(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    void expect(char c) {
        skip_ws();
        if (pos >= text.size() || text[pos] != c)
            throw parse_error(std::string("expected '") + c + "'", pos);
        ++pos;
    }

    static Expression::NodePtr make(Expression::Node n) {
        return std::make_shared<const Expression::Node>(std::move(n));
    }

    Expression::NodePtr parse_expr() {
        auto lhs = parse_term();
        for (;;) {
            skip_ws();
            std::size_t at = pos;
            if (accept('+'))
                lhs = make({Expression::Op::add, 0, -1, lhs, parse_term(), at});
            else if (accept('-'))
                lhs = make({Expression::Op::sub, 0, -1, lhs, parse_term(), at});
            else
                return lhs;
        }
    }

    Expression::NodePtr parse_term() {
        auto lhs = parse_unary();
        for (;;) {
            skip_ws();
            std::size_t at = pos;
            if (accept('*'))
                lhs = make({Expression::Op::mul, 0, -1, lhs, parse_unary(), at});
            else if (accept('/'))
                lhs = make({Expression::Op::div, 0, -1, lhs, parse_unary(), at});
            else
                return lhs;
        }
    }

    Expression::NodePtr parse_unary() {
        skip_ws();
        std::size_t at = pos;
        if (accept('-')) return make({Expression::Op::neg, 0, -1, parse_unary(), nullptr, at});
        return parse_power();
    }

    Expression::NodePtr parse_power() {
        auto lhs = parse_primary();
        for (;;) {
            skip_ws();
            std::size_t at = pos;
            if (accept('^'))
                lhs = make({Expression::Op::pow, 0, -1, lhs, parse_signed_primary(), at});
            else
                return lhs;
        }
    }

    // Exponents may carry a sign: "2^-3" is 2^(-3). "-x^2" is still -(x^2)
    // because unary minus sits below '^' on the left.
    Expression::NodePtr parse_signed_primary() {
        skip_ws();
        std::size_t at = pos;
        if (accept('-'))
            return make({Expression::Op::neg, 0, -1, parse_signed_primary(), nullptr, at});
        return parse_primary();
    }

    Expression::NodePtr parse_primary() {
        skip_ws();
        if (pos >= text.size()) throw parse_error("unexpected end of expression", pos);
        std::size_t at = pos;
        char c = text[pos];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_name();
        if (accept('(')) {
            auto e = parse_expr();
            expect(')');
            return e;
        }
        throw parse_error(std::string("unexpected character '") + c + "'", at);
    }

    Expression::NodePtr parse_number() {
        std::size_t at = pos;
        const char* begin = text.c_str() + pos;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin) throw parse_error("malformed number", at);
        pos += static_cast<std::size_t>(end - begin);
        return make({Expression::Op::constant, v, -1, nullptr, nullptr, at});
    }

    Expression::NodePtr parse_name() {
        std::size_t at = pos;
        std::string name;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
            name += text[pos++];

        static const std::pair<const char*, Expression::Op> fns[] = {
            {"exp", Expression::Op::exp}, {"log", Expression::Op::log},
            {"sin", Expression::Op::sin}, {"cos", Expression::Op::cos},
            {"sqrt", Expression::Op::sqrt}, {"abs", Expression::Op::abs}};
        for (const auto& [fname, op] : fns) {
            if (name == fname) {
                skip_ws();
                if (pos >= text.size() || text[pos] != '(')
                    throw parse_error("arity error: function '" + name +
                                          "' takes one parenthesized argument",
                                      pos);
                ++pos;
                auto arg = parse_expr();
                skip_ws();
                if (accept(','))
                    throw parse_error("arity error: function '" + name + "' takes one argument",
                                      pos - 1);
                expect(')');
                return make({op, 0, -1, arg, nullptr, at});
            }
        }

        if (name == tvar) return make({Expression::Op::variable, 0, 0, nullptr, nullptr, at});
        if (name.size() >= 2 && name[0] == 'x') {
            bool digits = true;
            for (std::size_t i = 1; i < name.size(); ++i)
                if (!std::isdigit(static_cast<unsigned char>(name[i]))) digits = false;
            if (digits) {
                int k = std::atoi(name.c_str() + 1);
                if (k < 1 || k > dim)
                    throw parse_error("unknown variable '" + name + "' (dimension is " +
                                          std::to_string(dim) + ")",
                                      at);
                return make({Expression::Op::variable, 0, k, nullptr, nullptr, at});
            }
        }
        throw parse_error("unknown variable or function '" + name + "'", at);
    }
};

double eval_node(const Expression::Node& n, std::span<const double> env) {
    using Op = Expression::Op;
    switch (n.op) {
        case Op::constant: return n.value;
        case Op::variable: return env[static_cast<std::size_t>(n.var_index)];
        case Op::neg: return -eval_node(*n.lhs, env);
        case Op::exp: {
            double v = std::exp(eval_node(*n.lhs, env));
            if (!std::isfinite(v)) throw eval_error("exp overflow", n.offset);
            return v;
        }
        case Op::log: {
            double a = eval_node(*n.lhs, env);
            if (a <= 0.0) throw eval_error("log of non-positive value", n.offset);
            return std::log(a);
        }
        case Op::sin: return std::sin(eval_node(*n.lhs, env));
        case Op::cos: return std::cos(eval_node(*n.lhs, env));
        case Op::sqrt: {
            double a = eval_node(*n.lhs, env);
            if (a < 0.0) throw eval_error("sqrt of negative value", n.offset);
            return std::sqrt(a);
        }
        case Op::abs: return std::fabs(eval_node(*n.lhs, env));
        case Op::add: return eval_node(*n.lhs, env) + eval_node(*n.rhs, env);
        case Op::sub: return eval_node(*n.lhs, env) - eval_node(*n.rhs, env);
        case Op::mul: return eval_node(*n.lhs, env) * eval_node(*n.rhs, env);
        case Op::div: {
            double d = eval_node(*n.rhs, env);
            if (d == 0.0) throw eval_error("division by zero", n.offset);
            return eval_node(*n.lhs, env) / d;
        }
        case Op::pow: {
            double base = eval_node(*n.lhs, env);
            double ex = eval_node(*n.rhs, env);
            double v = std::pow(base, ex);
            if (!std::isfinite(v)) throw eval_error("non-finite power result", n.offset);
            return v;
        }
    }
    throw eval_error("corrupt expression node", n.offset);
}

int precedence(Expression::Op op) {
    using Op = Expression::Op;
    switch (op) {
        case Op::add:
        case Op::sub: return 1;
        case Op::mul:
        case Op::div: return 2;
        case Op::neg: return 3;
        case Op::pow: return 4;
        default: return 5;
    }
}

void print_node(const Expression::Node& n, const std::string& tvar, std::ostream& os,
                int parent_prec, bool right_operand) {
    using Op = Expression::Op;
    int prec = precedence(n.op);
    bool parens = prec < parent_prec || (prec == parent_prec && right_operand);
    auto binary = [&](const char* sym) {
        if (parens) os << '(';
        print_node(*n.lhs, tvar, os, prec, false);
        os << sym;
        print_node(*n.rhs, tvar, os, prec, true);
        if (parens) os << ')';
    };
    switch (n.op) {
        case Op::constant: {
            // Negative literals print as unary minus so reparsing yields the
            // same tree shape (the parser never produces negative constants).
            std::ostringstream tmp;
            tmp.precision(17);
            tmp << std::fabs(n.value);
            if (std::signbit(n.value)) {
                int neg_prec = precedence(Op::neg);
                bool par = neg_prec < parent_prec || (neg_prec == parent_prec && right_operand);
                if (par) os << '(';
                os << '-' << tmp.str();
                if (par) os << ')';
            } else {
                os << tmp.str();
            }
            break;
        }
        case Op::variable:
            if (n.var_index == 0) os << tvar;
            else os << 'x' << n.var_index;
            break;
        case Op::neg:
            if (parens) os << '(';
            os << '-';
            print_node(*n.lhs, tvar, os, prec, true);
            if (parens) os << ')';
            break;
        case Op::exp:
        case Op::log:
        case Op::sin:
        case Op::cos:
        case Op::sqrt:
        case Op::abs: {
            const char* name = n.op == Op::exp    ? "exp"
                               : n.op == Op::log  ? "log"
                               : n.op == Op::sin  ? "sin"
                               : n.op == Op::cos  ? "cos"
                               : n.op == Op::sqrt ? "sqrt"
                                                  : "abs";
            os << name << '(';
            print_node(*n.lhs, tvar, os, 0, false);
            os << ')';
            break;
        }
        case Op::add: binary("+"); break;
        case Op::sub: binary("-"); break;
        case Op::mul: binary("*"); break;
        case Op::div: binary("/"); break;
        case Op::pow: binary("^"); break;
    }
}

}  // namespace

double Expression::eval(std::span<const double> env) const {
    if (!root_) throw eval_error("empty expression", 0);
    if (env.size() < static_cast<std::size_t>(dim_) + 1)
        throw eval_error("environment too small for expression", 0);
    return eval_node(*root_, env);
}

double Expression::eval(const std::map<std::string, double>& env) const {
    std::vector<double> flat(static_cast<std::size_t>(dim_) + 1, 0.0);
    auto it = env.find(time_var_);
    if (it == env.end()) throw eval_error("environment missing variable '" + time_var_ + "'", 0);
    flat[0] = it->second;
    for (int k = 1; k <= dim_; ++k) {
        auto jt = env.find("x" + std::to_string(k));
        if (jt == env.end())
            throw eval_error("environment missing variable 'x" + std::to_string(k) + "'", 0);
        flat[static_cast<std::size_t>(k)] = jt->second;
    }
    return eval(flat);
}

std::string Expression::print() const {
    if (!root_) return "";
    std::ostringstream os;
    print_node(*root_, time_var_, os, 0, false);
    return os.str();
}

Expression Expression::negated() const {
    auto node = std::make_shared<const Node>(Node{Op::neg, 0, -1, root_, nullptr, 0});
    return Expression(node, dim_, time_var_);
}

Expression parse_expression(const std::string& text, int n) {
    if (text.empty()) throw parse_error("empty expression", 0);
    Parser p(text, n, "t");
    auto root = p.parse_expr();
    if (!p.eof()) throw parse_error("trailing input", p.pos);
    return Expression(root, n, "t");
}

Expression parse_density(const std::string& text) {
    if (text.empty()) throw parse_error("empty expression", 0);
    Parser p(text, 0, "s");
    auto root = p.parse_expr();
    if (!p.eof()) throw parse_error("trailing input", p.pos);
    return Expression(root, 0, "s");
}

double eval_expression(const Expression& e, std::span<const double> env) { return e.eval(env); }

double eval_expression(const Expression& e, const std::map<std::string, double>& env) {
    return e.eval(env);
}

}  // namespace regionsolve
