#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tilemul {

using i64 = std::int64_t;

/// Problem dimensions of C(m x n) += A(m x k) * B(k x n).
enum class Dim : int { m = 0, n = 1, k = 2 };

/// Matrix operands of the multiplication.
enum class Operand : int { A = 0, B = 1, C = 2 };

constexpr std::array<Dim, 3> all_dims{Dim::m, Dim::n, Dim::k};
constexpr std::array<Operand, 3> all_operands{Operand::A, Operand::B, Operand::C};

constexpr char to_char(Dim d) {
    switch (d) {
        case Dim::m: return 'm';
        case Dim::n: return 'n';
        default: return 'k';
    }
}

constexpr char to_char(Operand op) {
    switch (op) {
        case Operand::A: return 'A';
        case Operand::B: return 'B';
        default: return 'C';
    }
}

inline Dim dim_from_char(char c) {
    switch (c) {
        case 'm': return Dim::m;
        case 'n': return Dim::n;
        case 'k': return Dim::k;
        default: throw std::invalid_argument(std::string("unknown dimension '") + c + "'");
    }
}

inline Operand operand_from_char(char c) {
    switch (c) {
        case 'A': return Operand::A;
        case 'B': return Operand::B;
        case 'C': return Operand::C;
        default: throw std::invalid_argument(std::string("unknown operand '") + c + "'");
    }
}

/// The two dimensions an operand spans, row dimension first:
/// A -> (m, k), B -> (k, n), C -> (m, n).
constexpr std::array<Dim, 2> dims_of(Operand op) {
    switch (op) {
        case Operand::A: return {Dim::m, Dim::k};
        case Operand::B: return {Dim::k, Dim::n};
        default: return {Dim::m, Dim::n};
    }
}

constexpr bool has_dim(Operand op, Dim d) {
    auto ds = dims_of(op);
    return ds[0] == d || ds[1] == d;
}

/// The one dimension an operand does not touch. When an operand is kept
/// resident, the problem must be partitioned along this dimension first.
constexpr Dim long_dim(Operand op) {
    switch (op) {
        case Operand::A: return Dim::n;
        case Operand::B: return Dim::m;
        default: return Dim::k;
    }
}

/// Inverse of long_dim: the unique operand that does not touch dimension d.
constexpr Operand operand_without(Dim d) {
    switch (d) {
        case Dim::n: return Operand::A;
        case Dim::m: return Operand::B;
        default: return Operand::C;
    }
}

/// The operand's dimension that is not d. Precondition: d is one of its dims.
constexpr Dim other_dim(Operand op, Dim d) {
    auto ds = dims_of(op);
    return ds[0] == d ? ds[1] : ds[0];
}

/// The unique dimension shared by two distinct operands.
constexpr Dim shared_dim(Operand x, Operand y) {
    auto dx = dims_of(x);
    return has_dim(y, dx[0]) ? dx[0] : dx[1];
}

/// Dimensions of one MMM instance. All extents are element counts >= 1.
struct Shape {
    i64 m = 1;
    i64 n = 1;
    i64 k = 1;

    Shape() = default;
    Shape(i64 m_, i64 n_, i64 k_) : m(m_), n(n_), k(k_) {
        if (m < 1 || n < 1 || k < 1)
            throw std::invalid_argument("shape extents must be >= 1");
    }

    i64 extent(Dim d) const {
        switch (d) {
            case Dim::m: return m;
            case Dim::n: return n;
            default: return k;
        }
    }

    i64 flops() const { return 2 * m * n * k; }

    i64 rows(Operand op) const { return extent(dims_of(op)[0]); }
    i64 cols(Operand op) const { return extent(dims_of(op)[1]); }
    i64 elements(Operand op) const { return rows(op) * cols(op); }

    bool operator==(const Shape&) const = default;
};

/// One violated rule from a structural or blocksize check.
struct Violation {
    std::string rule;
    int level = -1;
    i64 lhs = 0;
    i64 rhs = 0;
    std::string detail;
};

inline std::string to_string(const Violation& v) {
    std::string s = v.rule;
    if (v.level >= 0) s += " (level " + std::to_string(v.level) + ")";
    if (!v.detail.empty()) s += ": " + v.detail;
    return s;
}

/// Descriptor text or structure that breaks a naming/composition rule.
class ParseError : public std::runtime_error {
  public:
    ParseError(std::string rule_, const std::string& msg)
        : std::runtime_error(rule_ + ": " + msg), rule(std::move(rule_)) {}
    std::string rule;
};

/// Thrown when an operation requires validated inputs and they are not.
class ValidationFailure : public std::runtime_error {
  public:
    explicit ValidationFailure(std::vector<Violation> vs)
        : std::runtime_error(summarize(vs)), violations(std::move(vs)) {}
    std::vector<Violation> violations;

  private:
    static std::string summarize(const std::vector<Violation>& vs) {
        std::string s = "validation failed:";
        for (const auto& v : vs) s += "\n  - " + to_string(v);
        return s;
    }
};

/// Constraint system admits no blocksize >= 1; message suggests a remedy.
class InfeasibleError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline i64 ceil_div(i64 a, i64 b) { return (a + b - 1) / b; }

}  // namespace tilemul
