#pragma once

// Small arithmetic expression language for user-defined maps.
//
//   numbers      1, 0.5, 2e-3
//   variables    x1 .. xd
//   constants    pi, e
//   operators    + - * / ^ (right associative), unary -
//   functions    sin cos tan exp log sqrt abs floor  (one argument)
//                mod min max atan2                   (two arguments)
//
// mod(a, b) = a - b * floor(a / b), so the result has the sign of b.
// Expressions are compiled once into a postfix program; evaluation is
// reentrant and allocation-free.

#include "mixdec/types.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mixdec {

class Expression {
public:
    static constexpr std::size_t max_stack = 64;

    Expression() = default;

    /// Parses `source` over variables x1..x`dimension`. Throws usage errors
    /// carrying the 1-based column of the offending token.
    Expression(std::string_view source, int dimension) : source_(source), dimension_(dimension) {
        Parser parser{source, dimension, program_};
        parser.parse();
        std::size_t depth = 0;
        for (const auto& ins : program_) {
            depth = depth + 1 - arity(ins.op);
            max_depth_ = std::max(max_depth_, depth);
        }
        if (max_depth_ > max_stack) {
            throw usage_error("expression too deeply nested: " + std::string(source));
        }
    }

    const std::string& source() const noexcept { return source_; }
    int dimension() const noexcept { return dimension_; }
    bool empty() const noexcept { return program_.empty(); }

    double operator()(std::span<const double> x) const {
        std::array<double, max_stack> stack{};
        std::size_t top = 0;
        for (const auto& ins : program_) {
            switch (ins.op) {
                case Op::constant: stack[top++] = ins.value; break;
                case Op::variable: stack[top++] = x[ins.index]; break;
                case Op::negate: stack[top - 1] = -stack[top - 1]; break;
                case Op::add: --top; stack[top - 1] += stack[top]; break;
                case Op::sub: --top; stack[top - 1] -= stack[top]; break;
                case Op::mul: --top; stack[top - 1] *= stack[top]; break;
                case Op::div: --top; stack[top - 1] /= stack[top]; break;
                case Op::pow: --top; stack[top - 1] = std::pow(stack[top - 1], stack[top]); break;
                case Op::sin: stack[top - 1] = std::sin(stack[top - 1]); break;
                case Op::cos: stack[top - 1] = std::cos(stack[top - 1]); break;
                case Op::tan: stack[top - 1] = std::tan(stack[top - 1]); break;
                case Op::exp: stack[top - 1] = std::exp(stack[top - 1]); break;
                case Op::log: stack[top - 1] = std::log(stack[top - 1]); break;
                case Op::sqrt: stack[top - 1] = std::sqrt(stack[top - 1]); break;
                case Op::abs: stack[top - 1] = std::abs(stack[top - 1]); break;
                case Op::floor: stack[top - 1] = std::floor(stack[top - 1]); break;
                case Op::mod: {
                    --top;
                    const double a = stack[top - 1];
                    const double b = stack[top];
                    stack[top - 1] = a - b * std::floor(a / b);
                    break;
                }
                case Op::min: --top; stack[top - 1] = std::min(stack[top - 1], stack[top]); break;
                case Op::max: --top; stack[top - 1] = std::max(stack[top - 1], stack[top]); break;
                case Op::atan2: --top; stack[top - 1] = std::atan2(stack[top - 1], stack[top]); break;
            }
        }
        const double result = stack[0];
        if (!std::isfinite(result)) {
            throw computation_error("expression evaluation failed (non-finite result): " + source_);
        }
        return result;
    }

    double operator()(const Vec& x) const { return (*this)(std::span<const double>(x.data(), x.size())); }

private:
    enum class Op : std::uint8_t {
        constant, variable, negate, add, sub, mul, div, pow,
        sin, cos, tan, exp, log, sqrt, abs, floor, mod, min, max, atan2,
    };

    struct Instruction {
        Op op;
        double value = 0.0;
        int index = 0;
    };

    static std::size_t arity(Op op) {
        switch (op) {
            case Op::constant:
            case Op::variable: return 0;
            case Op::add: case Op::sub: case Op::mul: case Op::div: case Op::pow:
            case Op::mod: case Op::min: case Op::max: case Op::atan2: return 2;
            default: return 1;
        }
    }

    struct Parser {
        std::string_view text;
        int dimension;
        std::vector<Instruction>& out;
        std::size_t pos = 0;

        [[noreturn]] void fail(const std::string& message) const {
            throw usage_error("expression error at column " + std::to_string(pos + 1) + ": " + message +
                              " in \"" + std::string(text) + "\"");
        }

        void skip_space() {
            while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
        }

        bool accept(char c) {
            skip_space();
            if (pos < text.size() && text[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }

        void expect(char c) {
            if (!accept(c)) fail(std::string("expected '") + c + "'");
        }

        void parse() {
            skip_space();
            if (pos == text.size()) fail("empty expression");
            parse_sum();
            skip_space();
            if (pos != text.size()) fail("unexpected trailing input");
        }

        void parse_sum() {
            parse_product();
            for (;;) {
                if (accept('+')) { parse_product(); out.push_back({Op::add}); }
                else if (accept('-')) { parse_product(); out.push_back({Op::sub}); }
                else return;
            }
        }

        void parse_product() {
            parse_unary();
            for (;;) {
                if (accept('*')) { parse_unary(); out.push_back({Op::mul}); }
                else if (accept('/')) { parse_unary(); out.push_back({Op::div}); }
                else return;
            }
        }

        void parse_unary() {
            if (accept('-')) { parse_unary(); out.push_back({Op::negate}); return; }
            if (accept('+')) { parse_unary(); return; }
            parse_power();
        }

        void parse_power() {
            parse_primary();
            if (accept('^')) {
                parse_unary();
                out.push_back({Op::pow});
            }
        }

        void parse_primary() {
            skip_space();
            if (pos == text.size()) fail("unexpected end of expression");
            const char c = text[pos];
            if (c == '(') {
                ++pos;
                parse_sum();
                expect(')');
                return;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                parse_number();
                return;
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                parse_identifier();
                return;
            }
            fail(std::string("unexpected character '") + c + "'");
        }

        void parse_number() {
            const std::size_t start = pos;
            while (pos < text.size() && (std::isdigit(static_cast<unsigned char>(text[pos])) || text[pos] == '.')) ++pos;
            if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
                std::size_t look = pos + 1;
                if (look < text.size() && (text[look] == '+' || text[look] == '-')) ++look;
                if (look < text.size() && std::isdigit(static_cast<unsigned char>(text[look]))) {
                    pos = look;
                    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
                }
            }
            const std::string token(text.substr(start, pos - start));
            std::size_t used = 0;
            double value = 0.0;
            try {
                value = std::stod(token, &used);
            } catch (const std::exception&) {
                pos = start;
                fail("malformed number '" + token + "'");
            }
            if (used != token.size()) {
                pos = start;
                fail("malformed number '" + token + "'");
            }
            out.push_back({Op::constant, value});
        }

        void parse_identifier() {
            const std::size_t start = pos;
            while (pos < text.size() &&
                   (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
                ++pos;
            const std::string_view name = text.substr(start, pos - start);

            if (name == "pi") { out.push_back({Op::constant, std::numbers::pi}); return; }
            if (name == "e") { out.push_back({Op::constant, std::numbers::e}); return; }
            if (name.size() >= 2 && name[0] == 'x' &&
                name.find_first_not_of("0123456789", 1) == std::string_view::npos) {
                const int index = std::stoi(std::string(name.substr(1)));
                if (index < 1 || index > dimension) {
                    pos = start;
                    fail("variable '" + std::string(name) + "' outside x1..x" + std::to_string(dimension));
                }
                out.push_back({Op::variable, 0.0, index - 1});
                return;
            }

            struct Function { std::string_view name; Op op; int args; };
            static constexpr std::array<Function, 13> functions{{
                {"sin", Op::sin, 1}, {"cos", Op::cos, 1}, {"tan", Op::tan, 1},
                {"exp", Op::exp, 1}, {"log", Op::log, 1}, {"sqrt", Op::sqrt, 1},
                {"abs", Op::abs, 1}, {"floor", Op::floor, 1}, {"mod", Op::mod, 2},
                {"min", Op::min, 2}, {"max", Op::max, 2}, {"atan2", Op::atan2, 2},
                {"pow", Op::pow, 2},
            }};
            for (const auto& fn : functions) {
                if (fn.name != name) continue;
                expect('(');
                parse_sum();
                for (int k = 1; k < fn.args; ++k) {
                    expect(',');
                    parse_sum();
                }
                expect(')');
                out.push_back({fn.op});
                return;
            }
            pos = start;
            fail("unknown identifier '" + std::string(name) + "'");
        }
    };

    std::string source_;
    int dimension_ = 0;
    std::vector<Instruction> program_;
    std::size_t max_depth_ = 0;
};

}  // namespace mixdec
