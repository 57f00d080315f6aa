#pragma once

// Arithmetic expressions in x1..x3 with exact first and second derivatives.
//
// Grammar (whitespace-insensitive):
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | power
//   power   := primary ('^' unary)?        exponent: constant integer
//   primary := number | x1 | x2 | x3 | func '(' expr ')' | '(' expr ')'
//   func    := sqrt | exp | log | abs
//
// Derivatives are propagated in forward mode through a second-order jet, so
// gradients and Hessians are exact up to rounding.

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "khess/errors.hpp"

namespace khess {

inline constexpr int kMaxDim = 3;

/// Value, gradient and Hessian of a scalar function at a point.
struct Jet {
    double value = 0.0;
    std::array<double, kMaxDim> grad{};
    std::array<double, kMaxDim * kMaxDim> hess{};

    [[nodiscard]] double h(int i, int j) const { return hess[static_cast<std::size_t>(i * kMaxDim + j)]; }

    static Jet constant(double c)
    {
        Jet j;
        j.value = c;
        return j;
    }

    static Jet variable(double x, int axis)
    {
        Jet j;
        j.value = x;
        j.grad[static_cast<std::size_t>(axis)] = 1.0;
        return j;
    }
};

namespace detail {

// g(u) with g' and g'' supplied.
inline Jet chain(const Jet& u, double g, double dg, double ddg)
{
    Jet r;
    r.value = g;
    for (int i = 0; i < kMaxDim; ++i) {
        r.grad[static_cast<std::size_t>(i)] = dg * u.grad[static_cast<std::size_t>(i)];
        for (int j = 0; j < kMaxDim; ++j) {
            const auto ij = static_cast<std::size_t>(i * kMaxDim + j);
            r.hess[ij] = ddg * u.grad[static_cast<std::size_t>(i)] * u.grad[static_cast<std::size_t>(j)] +
                         dg * u.hess[ij];
        }
    }
    return r;
}

}  // namespace detail

inline Jet operator+(const Jet& a, const Jet& b)
{
    Jet r;
    r.value = a.value + b.value;
    for (std::size_t i = 0; i < r.grad.size(); ++i) r.grad[i] = a.grad[i] + b.grad[i];
    for (std::size_t i = 0; i < r.hess.size(); ++i) r.hess[i] = a.hess[i] + b.hess[i];
    return r;
}

inline Jet operator-(const Jet& a)
{
    return detail::chain(a, -a.value, -1.0, 0.0);
}

inline Jet operator-(const Jet& a, const Jet& b) { return a + (-b); }

inline Jet operator*(const Jet& a, const Jet& b)
{
    Jet r;
    r.value = a.value * b.value;
    for (int i = 0; i < kMaxDim; ++i) {
        const auto si = static_cast<std::size_t>(i);
        r.grad[si] = a.grad[si] * b.value + a.value * b.grad[si];
        for (int j = 0; j < kMaxDim; ++j) {
            const auto sj = static_cast<std::size_t>(j);
            const auto ij = static_cast<std::size_t>(i * kMaxDim + j);
            r.hess[ij] = a.hess[ij] * b.value + a.grad[si] * b.grad[sj] + b.grad[si] * a.grad[sj] +
                         a.value * b.hess[ij];
        }
    }
    return r;
}

inline Jet reciprocal(const Jet& a)
{
    const double v = 1.0 / a.value;
    return detail::chain(a, v, -v * v, 2.0 * v * v * v);
}

inline Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }

inline Jet powi(const Jet& a, int p)
{
    if (p == 0) return Jet::constant(1.0);
    if (p == 1) return a;
    const double x = a.value;
    const double ddg = (p == 2) ? 2.0 : p * (p - 1.0) * std::pow(x, p - 2);
    return detail::chain(a, std::pow(x, p), p * std::pow(x, p - 1), ddg);
}

inline Jet sqrt(const Jet& a)
{
    const double s = std::sqrt(a.value);
    return detail::chain(a, s, 0.5 / s, -0.25 / (s * a.value));
}

inline Jet exp(const Jet& a)
{
    const double e = std::exp(a.value);
    return detail::chain(a, e, e, e);
}

inline Jet log(const Jet& a)
{
    return detail::chain(a, std::log(a.value), 1.0 / a.value, -1.0 / (a.value * a.value));
}

inline Jet abs(const Jet& a)
{
    const double s = a.value > 0.0 ? 1.0 : (a.value < 0.0 ? -1.0 : 0.0);
    return detail::chain(a, std::abs(a.value), s, 0.0);
}

/// Immutable parsed expression. Cheap to copy (shared tree).
class Expression {
public:
    Expression() : Expression(constant(0.0)) {}

    static Expression parse(std::string_view text);

    static Expression constant(double c)
    {
        return Expression(std::make_shared<const Node>(Node{Op::constant, c, 0, 0, {}, {}}),
                          format_number(c));
    }

    [[nodiscard]] Jet jet(std::span<const double> x) const { return eval(*root_, x); }
    [[nodiscard]] double operator()(std::span<const double> x) const { return eval(*root_, x).value; }

    /// Source text as given to parse().
    [[nodiscard]] const std::string& text() const { return text_; }

    /// Highest variable index referenced (x3 -> 3), 0 for constants.
    [[nodiscard]] int max_variable() const { return max_var(*root_); }

    friend bool operator==(const Expression& a, const Expression& b) { return a.text_ == b.text_; }

private:
    enum class Op { constant, variable, add, sub, mul, div, neg, pow, sqrt, exp, log, abs };

    struct Node {
        Op op;
        double c;
        int var;
        int exponent;
        std::shared_ptr<const Node> a;
        std::shared_ptr<const Node> b;
    };
    using NodePtr = std::shared_ptr<const Node>;

    Expression(NodePtr root, std::string text) : root_(std::move(root)), text_(std::move(text)) {}

    static std::string format_number(double c)
    {
        char buf[32];
        auto [end, ec] = std::to_chars(buf, buf + sizeof buf, c);
        return std::string(buf, end);
    }

    static int max_var(const Node& n)
    {
        int m = n.op == Op::variable ? n.var + 1 : 0;
        if (n.a) m = std::max(m, max_var(*n.a));
        if (n.b) m = std::max(m, max_var(*n.b));
        return m;
    }

    static Jet eval(const Node& n, std::span<const double> x)
    {
        switch (n.op) {
        case Op::constant: return Jet::constant(n.c);
        case Op::variable:
            if (static_cast<std::size_t>(n.var) >= x.size()) {
                throw DomainError("expression references x" + std::to_string(n.var + 1) +
                                  " but the point has dimension " + std::to_string(x.size()));
            }
            return Jet::variable(x[static_cast<std::size_t>(n.var)], n.var);
        case Op::add: return eval(*n.a, x) + eval(*n.b, x);
        case Op::sub: return eval(*n.a, x) - eval(*n.b, x);
        case Op::mul: return eval(*n.a, x) * eval(*n.b, x);
        case Op::div: return eval(*n.a, x) / eval(*n.b, x);
        case Op::neg: return -eval(*n.a, x);
        case Op::pow: return powi(eval(*n.a, x), n.exponent);
        case Op::sqrt: return khess::sqrt(eval(*n.a, x));
        case Op::exp: return khess::exp(eval(*n.a, x));
        case Op::log: return khess::log(eval(*n.a, x));
        case Op::abs: return khess::abs(eval(*n.a, x));
        }
        return {};
    }

    class Parser;

    NodePtr root_;
    std::string text_;
};

class Expression::Parser {
public:
    explicit Parser(std::string_view s) : s_(s) {}

    NodePtr parse_all()
    {
        auto n = expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
        return n;
    }

private:
    [[noreturn]] void fail(const std::string& what) const
    {
        throw InputError("expression \"" + std::string(s_) + "\": " + what + " at offset " +
                         std::to_string(pos_));
    }

    void skip()
    {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool accept(char c)
    {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    static NodePtr make(Op op, NodePtr a = {}, NodePtr b = {}, double c = 0.0, int var = 0, int e = 0)
    {
        return std::make_shared<const Node>(Node{op, c, var, e, std::move(a), std::move(b)});
    }

    NodePtr expr()
    {
        auto lhs = term();
        for (;;) {
            if (accept('+')) lhs = make(Op::add, lhs, term());
            else if (accept('-')) lhs = make(Op::sub, lhs, term());
            else return lhs;
        }
    }

    NodePtr term()
    {
        auto lhs = unary();
        for (;;) {
            if (accept('*')) lhs = make(Op::mul, lhs, unary());
            else if (accept('/')) lhs = make(Op::div, lhs, unary());
            else return lhs;
        }
    }

    NodePtr unary()
    {
        if (accept('-')) return make(Op::neg, unary());
        if (accept('+')) return unary();
        return power();
    }

    NodePtr power()
    {
        auto base = primary();
        if (!accept('^')) return base;
        const std::size_t at = pos_;
        auto e = unary();
        const double v = max_var(*e) == 0 ? eval(*e, {}).value : std::nan("");
        if (!std::isfinite(v) || v != std::round(v) || std::abs(v) > 1e6) {
            pos_ = at;
            fail("exponent must be a constant integer");
        }
        return make(Op::pow, base, {}, 0.0, 0, static_cast<int>(v));
    }

    NodePtr primary()
    {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        const char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            auto n = expr();
            if (!accept(')')) fail("expected ')'");
            return n;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t end = pos_;
            while (end < s_.size() && std::isalnum(static_cast<unsigned char>(s_[end]))) ++end;
            const std::string_view word = s_.substr(pos_, end - pos_);
            if (word.size() == 2 && word[0] == 'x' && word[1] >= '1' && word[1] <= '3') {
                pos_ = end;
                return make(Op::variable, {}, {}, 0.0, word[1] - '1');
            }
            Op op;
            if (word == "sqrt") op = Op::sqrt;
            else if (word == "exp") op = Op::exp;
            else if (word == "log") op = Op::log;
            else if (word == "abs") op = Op::abs;
            else fail("unknown identifier '" + std::string(word) + "'");
            pos_ = end;
            if (!accept('(')) fail("expected '(' after " + std::string(word));
            auto arg = expr();
            if (!accept(')')) fail("expected ')'");
            return make(op, arg);
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    NodePtr number()
    {
        std::size_t end = pos_;
        while (end < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[end])) || s_[end] == '.')) ++end;
        if (end < s_.size() && (s_[end] == 'e' || s_[end] == 'E')) {
            std::size_t e = end + 1;
            if (e < s_.size() && (s_[e] == '+' || s_[e] == '-')) ++e;
            if (e < s_.size() && std::isdigit(static_cast<unsigned char>(s_[e]))) {
                end = e;
                while (end < s_.size() && std::isdigit(static_cast<unsigned char>(s_[end]))) ++end;
            }
        }
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s_.data() + pos_, s_.data() + end, v);
        if (ec != std::errc() || ptr != s_.data() + end) fail("malformed number");
        pos_ = end;
        return make(Op::constant, {}, {}, v);
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

inline Expression Expression::parse(std::string_view text)
{
    Parser p(text);
    return Expression(p.parse_all(), std::string(text));
}

}  // namespace khess
