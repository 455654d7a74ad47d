#pragma once

// Tiny arithmetic-expression compiler for custom families.
// Grammar: + - * / ^, parentheses, variable n, functions pow/sqrt/log/exp.
// '^' is right associative and binds tighter than unary minus, so -n^2 = -(n^2).

#include "error.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <string>

namespace parajacobi {

class Expression {
public:
    Expression() = default;
    explicit Expression(std::string src) : src_(std::move(src)) {
        pos_ = 0;
        root_ = parse_sum();
        skip_ws();
        if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
    }

    double operator()(double n) const { return eval(*root_, n); }
    const std::string& source() const { return src_; }

private:
    enum class Op { num, var, add, sub, mul, div, pow, neg, sqrt, log, exp };

    struct Node {
        Op op;
        double value = 0.0;
        std::unique_ptr<Node> lhs, rhs;
    };

    std::string src_;
    std::size_t pos_ = 0;
    std::shared_ptr<Node> root_;

    [[noreturn]] void fail(const std::string& msg) const {
        throw Error(ErrorKind::config, "expression '" + src_ + "' at column " + std::to_string(pos_ + 1) + ": " + msg);
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    static std::unique_ptr<Node> make(Op op, std::unique_ptr<Node> l = nullptr, std::unique_ptr<Node> r = nullptr) {
        auto p = std::make_unique<Node>();
        p->op = op;
        p->lhs = std::move(l);
        p->rhs = std::move(r);
        return p;
    }

    std::unique_ptr<Node> parse_sum() {
        auto lhs = parse_product();
        for (;;) {
            if (accept('+')) lhs = make(Op::add, std::move(lhs), parse_product());
            else if (accept('-')) lhs = make(Op::sub, std::move(lhs), parse_product());
            else return lhs;
        }
    }

    std::unique_ptr<Node> parse_product() {
        auto lhs = parse_unary();
        for (;;) {
            if (accept('*')) lhs = make(Op::mul, std::move(lhs), parse_unary());
            else if (accept('/')) lhs = make(Op::div, std::move(lhs), parse_unary());
            else return lhs;
        }
    }

    std::unique_ptr<Node> parse_unary() {
        if (accept('-')) return make(Op::neg, parse_unary());
        if (accept('+')) return parse_unary();
        return parse_power();
    }

    std::unique_ptr<Node> parse_power() {
        auto base = parse_atom();
        if (accept('^')) return make(Op::pow, std::move(base), parse_unary());
        return base;
    }

    std::unique_ptr<Node> parse_atom() {
        skip_ws();
        if (pos_ >= src_.size()) fail("unexpected end of input");
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            auto e = parse_sum();
            if (!accept(')')) fail("expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = src_.c_str() + pos_;
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            if (end == begin) fail("bad number");
            pos_ += static_cast<std::size_t>(end - begin);
            auto p = make(Op::num);
            p->value = v;
            return p;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t start = pos_;
            while (pos_ < src_.size() && std::isalnum(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            const std::string id = src_.substr(start, pos_ - start);
            if (id == "n") return make(Op::var);
            Op op;
            std::size_t arity = 1;
            if (id == "sqrt") op = Op::sqrt;
            else if (id == "log") op = Op::log;
            else if (id == "exp") op = Op::exp;
            else if (id == "pow") { op = Op::pow; arity = 2; }
            else { pos_ = start; fail("unknown identifier '" + id + "'"); }
            if (!accept('(')) fail("expected '(' after " + id);
            auto a = parse_sum();
            std::unique_ptr<Node> b;
            if (arity == 2) {
                if (!accept(',')) fail("pow expects two arguments");
                b = parse_sum();
            }
            if (!accept(')')) fail("expected ')'");
            return make(op, std::move(a), std::move(b));
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    static double eval(const Node& e, double n) {
        switch (e.op) {
        case Op::num: return e.value;
        case Op::var: return n;
        case Op::add: return eval(*e.lhs, n) + eval(*e.rhs, n);
        case Op::sub: return eval(*e.lhs, n) - eval(*e.rhs, n);
        case Op::mul: return eval(*e.lhs, n) * eval(*e.rhs, n);
        case Op::div: return eval(*e.lhs, n) / eval(*e.rhs, n);
        case Op::pow: return std::pow(eval(*e.lhs, n), eval(*e.rhs, n));
        case Op::neg: return -eval(*e.lhs, n);
        case Op::sqrt: return std::sqrt(eval(*e.lhs, n));
        case Op::log: return std::log(eval(*e.lhs, n));
        case Op::exp: return std::exp(eval(*e.lhs, n));
        }
        return 0.0;
    }
};

} // namespace parajacobi
