#pragma once

#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tilemul/types.hpp"

namespace tilemul {

/// Plan for one cache level: the two loops that expose this level's resident
/// block. The outer loop runs along the enclosing resident's long dimension;
/// the inner loop cuts the remaining dimension of this level's resident.
struct LevelPlan {
    int level = 0;
    Operand resident = Operand::C;
    Dim outer_dim = Dim::n;
    Dim inner_dim = Dim::m;

    bool operator==(const LevelPlan&) const = default;
};

/// An algorithm of the blocked-MMM family: ordered level plans, outermost
/// cache first, ending at the register level (0). Gaps between plan levels
/// are skipped caches.
struct AlgorithmDescriptor {
    std::vector<LevelPlan> plans;
    bool allow_non_c_registers = false;

    const LevelPlan* plan_at(int level) const {
        for (const auto& p : plans)
            if (p.level == level) return &p;
        return nullptr;
    }

    int top_level() const { return plans.empty() ? -1 : plans.front().level; }

    bool operator==(const AlgorithmDescriptor& o) const { return plans == o.plans; }
};

/// Guest panel owner of the level enclosing `below`: the operand the inner
/// loop of `below` leaves untouched, reused across that whole inner loop.
constexpr Operand guest_operand(const LevelPlan& below) { return operand_without(below.inner_dim); }

namespace detail {

// Loop order for a descriptor with a single plan, where nothing downstream
// forces it. Matches the register-level convention of C algorithms.
inline std::pair<Dim, Dim> default_single_plan_loops(Operand res) {
    switch (res) {
        case Operand::C: return {Dim::n, Dim::m};
        case Operand::A: return {Dim::k, Dim::m};
        default: return {Dim::n, Dim::k};
    }
}

}  // namespace detail

/// Builds a descriptor from (level, resident) pairs, outermost first, filling
/// in the loop dimensions the residency transitions force. For the outermost
/// plan the inner loop takes the dimension shared with the next resident;
/// this reproduces the loop orders of the reference algorithms (e.g. B3A2C0
/// runs n then k at the top, the Goto layout runs k then m).
inline AlgorithmDescriptor make_descriptor(const std::vector<std::pair<int, Operand>>& residents,
                                           bool allow_non_c_registers = false) {
    if (residents.empty()) throw ParseError("empty_descriptor", "descriptor needs at least one level");
    AlgorithmDescriptor d;
    d.allow_non_c_registers = allow_non_c_registers;
    for (std::size_t i = 0; i < residents.size(); ++i) {
        auto [level, res] = residents[i];
        if (i > 0) {
            if (level >= residents[i - 1].first)
                throw ParseError("levels_not_strictly_decreasing",
                                 "cache levels must strictly decrease outermost to innermost");
            if (res == residents[i - 1].second)
                throw ParseError("consecutive_resident_equal",
                                 std::string("operand ") + to_char(res) + " resident at two consecutive levels");
        }
        LevelPlan p;
        p.level = level;
        p.resident = res;
        if (i == 0) {
            if (residents.size() == 1) {
                auto [o, in] = detail::default_single_plan_loops(res);
                p.outer_dim = o;
                p.inner_dim = in;
            } else {
                p.inner_dim = shared_dim(res, residents[1].second);
                p.outer_dim = other_dim(res, p.inner_dim);
            }
        } else {
            p.outer_dim = long_dim(residents[i - 1].second);
            p.inner_dim = other_dim(res, p.outer_dim);
        }
        d.plans.push_back(p);
    }
    if (d.plans.back().level != 0)
        throw ParseError("missing_register_level", "descriptor must end at the register level (0)");
    if (d.plans.back().resident != Operand::C && !allow_non_c_registers)
        throw ParseError("registers_not_resident_c",
                         "register level must hold C (set allow_non_c_registers to override)");
    return d;
}

/// Parses a name like "B3A2C0": operand letter + cache level per resident
/// block, outermost first, strictly decreasing levels, ending at 0.
inline AlgorithmDescriptor parse_name(std::string_view text, bool allow_non_c_registers = false) {
    if (text.empty() || text.size() % 2 != 0)
        throw ParseError("name_grammar", "expected one or more <operand letter><level digit> tokens");
    std::vector<std::pair<int, Operand>> residents;
    for (std::size_t i = 0; i < text.size(); i += 2) {
        char oc = text[i];
        char lc = text[i + 1];
        if (oc != 'A' && oc != 'B' && oc != 'C')
            throw ParseError("name_grammar", std::string("operand letter expected, got '") + oc + "'");
        if (!std::isdigit(static_cast<unsigned char>(lc)))
            throw ParseError("name_grammar", std::string("level digit expected, got '") + lc + "'");
        residents.emplace_back(lc - '0', operand_from_char(oc));
    }
    return make_descriptor(residents, allow_non_c_registers);
}

/// Inverse of parse_name on the resident/level skeleton.
inline std::string format_name(const AlgorithmDescriptor& d) {
    std::string s;
    for (const auto& p : d.plans) {
        if (p.level > 9) throw std::invalid_argument("names only cover cache levels 0..9");
        s += to_char(p.resident);
        s += static_cast<char>('0' + p.level);
    }
    return s;
}

/// Checks the composition rules on an arbitrary descriptor and reports every
/// violated rule. A descriptor produced by make_descriptor/parse_name passes.
inline std::vector<Violation> validate_structure(const AlgorithmDescriptor& d) {
    std::vector<Violation> out;
    if (d.plans.empty()) {
        out.push_back({"empty_descriptor", -1, 0, 0, "no level plans"});
        return out;
    }
    for (std::size_t i = 0; i < d.plans.size(); ++i) {
        const auto& p = d.plans[i];
        if (p.outer_dim == p.inner_dim)
            out.push_back({"loop_dims_equal", p.level, 0, 0, "outer and inner loop share a dimension"});
        else if (!(has_dim(p.resident, p.outer_dim) && has_dim(p.resident, p.inner_dim)))
            out.push_back({"loops_not_resident_dims", p.level, 0, 0,
                           "loop dimensions must be exactly the resident's dimensions"});
        if (i > 0) {
            const auto& prev = d.plans[i - 1];
            if (p.level >= prev.level)
                out.push_back({"levels_not_strictly_decreasing", p.level, p.level, prev.level, ""});
            if (p.resident == prev.resident)
                out.push_back({"consecutive_resident_equal", p.level, 0, 0,
                               std::string("operand ") + to_char(p.resident) + " repeats"});
            else if (p.outer_dim != long_dim(prev.resident))
                out.push_back({"outer_not_long_dim", p.level, 0, 0,
                               std::string("outer loop must run along '") + to_char(long_dim(prev.resident)) +
                                   "', the enclosing resident's long dimension"});
        }
    }
    if (d.plans.back().level != 0)
        out.push_back({"missing_register_level", d.plans.back().level, 0, 0,
                       "innermost plan must sit at the register level (0)"});
    if (d.plans.back().resident != Operand::C && !d.allow_non_c_registers)
        out.push_back({"registers_not_resident_c", d.plans.back().level, 0, 0,
                       "register level must hold C unless explicitly overridden"});
    return out;
}

/// Removes the plan at level h. Skipping an already-skipped interior level is
/// the identity; the register level cannot be skipped.
inline AlgorithmDescriptor skip_level(const AlgorithmDescriptor& d, int h) {
    if (h == 0) throw std::invalid_argument("cannot skip the register level");
    std::vector<std::pair<int, Operand>> residents;
    bool found = false;
    for (const auto& p : d.plans) {
        if (p.level == h) {
            found = true;
            continue;
        }
        residents.emplace_back(p.level, p.resident);
    }
    if (!found) {
        if (d.plans.empty() || h > d.plans.front().level || h < 0)
            throw std::invalid_argument("level " + std::to_string(h) +
                                        " is not inside the descriptor's level range");
        return d;  // interior gap, already skipped
    }
    return make_descriptor(residents, d.allow_non_c_registers);
}

/// Shape-match tolerances for choosing the outermost resident operand.
struct SelectTolerances {
    double near_factor = 2.0;   // "approximately sqrt(M)" = within this factor
    double large_factor = 4.0;  // "large" = at least this multiple of sqrt(M)
};

/// Picks the outermost resident for a problem shape against a cache of
/// M_outer elements: the operand whose two dimensions sit near sqrt(M) while
/// the remaining dimension is large. Square or ambiguous shapes go to C.
inline Operand select_algorithm(const Shape& s, i64 outer_capacity, SelectTolerances tol = {}) {
    if (outer_capacity < 1) throw std::invalid_argument("cache capacity must be >= 1");
    const double root = std::sqrt(static_cast<double>(outer_capacity));
    auto near = [&](i64 x) {
        return static_cast<double>(x) >= root / tol.near_factor &&
               static_cast<double>(x) <= root * tol.near_factor;
    };
    auto large = [&](i64 x) { return static_cast<double>(x) >= root * tol.large_factor; };
    if (near(s.m) && near(s.k) && large(s.n)) return Operand::A;
    if (near(s.n) && near(s.k) && large(s.m)) return Operand::B;
    if (near(s.m) && near(s.n) && large(s.k)) return Operand::C;
    return Operand::C;
}

}  // namespace tilemul
