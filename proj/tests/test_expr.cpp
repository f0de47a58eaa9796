#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "regionsolve/expr.hpp"

using namespace regionsolve;

namespace {

double ev(const Expression& e, std::initializer_list<double> env) {
    std::vector<double> v(env);
    return e.eval(v);
}

// Reference evaluator, independent tree walk over the same node type.
double ref_eval(const Expression::Node& n, const std::vector<double>& env) {
    using Op = Expression::Op;
    if (n.op == Op::constant) return n.value;
    if (n.op == Op::variable) return env.at(static_cast<std::size_t>(n.var_index));
    double a = ref_eval(*n.lhs, env);
    if (n.op == Op::neg) return -a;
    if (n.op == Op::exp) {
        double v = std::exp(a);
        if (!std::isfinite(v)) throw eval_error("ref exp", n.offset);
        return v;
    }
    if (n.op == Op::log) {
        if (a <= 0) throw eval_error("ref log", n.offset);
        return std::log(a);
    }
    if (n.op == Op::sin) return std::sin(a);
    if (n.op == Op::cos) return std::cos(a);
    if (n.op == Op::sqrt) {
        if (a < 0) throw eval_error("ref sqrt", n.offset);
        return std::sqrt(a);
    }
    if (n.op == Op::abs) return std::fabs(a);
    double b = ref_eval(*n.rhs, env);
    switch (n.op) {
        case Op::add: return a + b;
        case Op::sub: return a - b;
        case Op::mul: return a * b;
        case Op::div:
            if (b == 0.0) throw eval_error("ref div", n.offset);
            return a / b;
        case Op::pow: {
            double v = std::pow(a, b);
            if (!std::isfinite(v)) throw eval_error("ref pow", n.offset);
            return v;
        }
        default: throw eval_error("ref bad node", n.offset);
    }
}

Expression::NodePtr mk(Expression::Node n) {
    return std::make_shared<const Expression::Node>(std::move(n));
}

Expression::NodePtr random_ast(std::mt19937& rng, int depth, int n) {
    using Op = Expression::Op;
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 9);
    std::uniform_real_distribution<double> constant(-3.0, 3.0);
    std::uniform_int_distribution<int> var(0, n);
    switch (pick(rng)) {
        case 0: return mk({Op::constant, constant(rng), -1, nullptr, nullptr, 0});
        case 1: return mk({Op::variable, 0, var(rng), nullptr, nullptr, 0});
        case 2: return mk({Op::neg, 0, -1, random_ast(rng, depth - 1, n), nullptr, 0});
        case 3: return mk({Op::sin, 0, -1, random_ast(rng, depth - 1, n), nullptr, 0});
        case 4: return mk({Op::cos, 0, -1, random_ast(rng, depth - 1, n), nullptr, 0});
        case 5: return mk({Op::abs, 0, -1, random_ast(rng, depth - 1, n), nullptr, 0});
        case 6:
            return mk({Op::add, 0, -1, random_ast(rng, depth - 1, n),
                       random_ast(rng, depth - 1, n), 0});
        case 7:
            return mk({Op::sub, 0, -1, random_ast(rng, depth - 1, n),
                       random_ast(rng, depth - 1, n), 0});
        case 8:
            return mk({Op::mul, 0, -1, random_ast(rng, depth - 1, n),
                       random_ast(rng, depth - 1, n), 0});
        default:
            return mk({Op::div, 0, -1, random_ast(rng, depth - 1, n),
                       random_ast(rng, depth - 1, n), 0});
    }
}

}  // namespace

TEST_CASE("precedence and basic evaluation") {
    CHECK(ev(parse_expression("1+2*3", 1), {0.0, 0.0}) == 7.0);
    CHECK(ev(parse_expression("-2*x1*exp(x2)", 2), {0.0, 1.0, 0.0}) == -2.0);
    CHECK(ev(parse_expression("x1^2", 1), {0.0, 3.0}) == 9.0);
    CHECK(ev(parse_expression("exp(x1)", 1), {0.0, 0.0}) == 1.0);
    CHECK(ev(parse_expression(" 1 + 2\t*3 ", 1), {0.0, 0.0}) == 7.0);
}

TEST_CASE("caret binds tighter than unary minus and associates left") {
    CHECK(ev(parse_expression("-x1^2", 1), {0.0, 2.0}) == -4.0);
    CHECK(ev(parse_expression("2^3^2", 1), {0.0, 0.0}) == 64.0);  // (2^3)^2
    CHECK(ev(parse_expression("2^-2", 1), {0.0, 0.0}) == 0.25);
}

TEST_CASE("syntax errors carry byte offsets") {
    try {
        parse_expression("2+", 1);
        FAIL("expected parse_error");
    } catch (const parse_error& e) {
        CHECK(e.offset() == 2);
    }
    CHECK_THROWS_AS(parse_expression("", 1), parse_error);
    CHECK_THROWS_AS(parse_expression("x3+1", 2), parse_error);
    CHECK_THROWS_AS(parse_expression("exp(x1, x1)", 1), parse_error);
    CHECK_THROWS_AS(parse_expression("exp + 1", 1), parse_error);
    CHECK_THROWS_AS(parse_expression("(1+2", 1), parse_error);
    CHECK_THROWS_AS(parse_expression("1 2", 1), parse_error);
}

TEST_CASE("domain errors identify the node") {
    auto division = parse_expression("x1/x2", 2);
    CHECK_THROWS_AS(ev(division, {0.0, 1.0, 0.0}), eval_error);
    auto logexpr = parse_expression("log(x1)", 1);
    CHECK_THROWS_AS(ev(logexpr, {0.0, -1.0}), eval_error);
    CHECK_THROWS_AS(ev(logexpr, {0.0, 0.0}), eval_error);
    auto sqrtexpr = parse_expression("sqrt(x1)", 1);
    CHECK_THROWS_AS(ev(sqrtexpr, {0.0, -1.0}), eval_error);
    auto overflow = parse_expression("exp(exp(x1))", 1);
    CHECK_THROWS_AS(ev(overflow, {0.0, 100.0}), eval_error);
}

TEST_CASE("density expressions use the variable s") {
    Expression rho = parse_density("1 - s");
    double env[1] = {0.25};
    CHECK(rho.eval(std::span<const double>(env, 1)) == 0.75);
    CHECK_THROWS_AS(parse_density("t"), parse_error);
}

TEST_CASE("named-environment evaluation") {
    Expression e = parse_expression("t + 2*x2", 2);
    std::map<std::string, double> env{{"t", 1.0}, {"x1", 5.0}, {"x2", 3.0}};
    CHECK(e.eval(env) == 7.0);
}

TEST_CASE("printer round-trip is a fixed point on canonical form") {
    std::mt19937 rng(42);
    for (int i = 0; i < 400; ++i) {
        Expression e(random_ast(rng, 5, 2), 2, "t");
        std::string once = e.print();
        Expression reparsed = parse_expression(once, 2);
        std::string twice = reparsed.print();
        CHECK(once == twice);
    }
}

TEST_CASE("1000 random ASTs match the reference evaluator exactly") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> point(-2.0, 2.0);
    for (int i = 0; i < 1000; ++i) {
        Expression e(random_ast(rng, 6, 2), 2, "t");
        std::vector<double> env{point(rng), point(rng), point(rng)};
        double got = 0, want = 0;
        bool got_threw = false, want_threw = false;
        try {
            got = e.eval(env);
        } catch (const eval_error&) {
            got_threw = true;
        }
        try {
            want = ref_eval(*e.root(), env);
        } catch (const eval_error&) {
            want_threw = true;
        }
        REQUIRE(got_threw == want_threw);
        if (!got_threw) CHECK(got == want);  // bitwise
    }
}

TEST_CASE("printed form evaluates identically") {
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> point(-2.0, 2.0);
    for (int i = 0; i < 300; ++i) {
        Expression e(random_ast(rng, 5, 1), 1, "t");
        Expression reparsed = parse_expression(e.print(), 1);
        std::vector<double> env{point(rng), point(rng)};
        double a = 0, b = 0;
        bool ta = false, tb = false;
        try {
            a = e.eval(env);
        } catch (const eval_error&) {
            ta = true;
        }
        try {
            b = reparsed.eval(env);
        } catch (const eval_error&) {
            tb = true;
        }
        REQUIRE(ta == tb);
        if (!ta) CHECK(a == b);
    }
}

TEST_CASE("negated wraps without copying the subtree") {
    Expression e = parse_expression("x1+1", 1);
    Expression ne = e.negated();
    CHECK(ev(ne, {0.0, 2.0}) == -3.0);
    CHECK(ev(e, {0.0, 2.0}) == 3.0);
}
