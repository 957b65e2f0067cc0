#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "tilemul/cache.hpp"
#include "tilemul/descriptor.hpp"
#include "tilemul/types.hpp"

namespace tilemul {

/// Map from (cache level, dimension) to blocksize. Plan levels carry their
/// two loop blocksizes (the register entries are the micro-kernel tile).
/// A skipped level above the outermost plan may carry one "cap" entry along
/// the top resident's long dimension; it bounds the panel that level is
/// expected to keep (this is how the classic Goto n_c enters an A2C0 plan).
class BlocksizeSet {
  public:
    struct Key {
        int level;
        Dim dim;
        auto operator<=>(const Key&) const = default;
    };

    void set(int level, Dim dim, i64 value) {
        if (value < 1) throw std::invalid_argument("blocksize must be >= 1");
        values_[Key{level, dim}] = value;
    }

    bool has(int level, Dim dim) const { return values_.count(Key{level, dim}) > 0; }

    i64 get(int level, Dim dim) const {
        auto it = values_.find(Key{level, dim});
        if (it == values_.end())
            throw std::out_of_range(std::string("no blocksize for level ") + std::to_string(level) +
                                    " dim " + to_char(dim));
        return it->second;
    }

    std::optional<i64> try_get(int level, Dim dim) const {
        auto it = values_.find(Key{level, dim});
        if (it == values_.end()) return std::nullopt;
        return it->second;
    }

    const std::map<Key, i64>& entries() const { return values_; }
    bool empty() const { return values_.empty(); }

  private:
    std::map<Key, i64> values_;
};

/// Relative per-element access cost weights for the three operands.
struct AccessCosts {
    double beta_a = 1.0;
    double beta_b = 1.0;
    double beta_c = 1.0;

    double of(Operand op) const {
        switch (op) {
            case Operand::A: return beta_a;
            case Operand::B: return beta_b;
            default: return beta_c;
        }
    }

    void validate() const {
        if (!(beta_a > 0 && beta_b > 0 && beta_c > 0))
            throw std::invalid_argument("access cost weights must be strictly positive");
    }
};

/// Register tile of the micro-kernel.
struct MicroTile {
    i64 m_r = 4;
    i64 n_r = 12;
};

struct DeriveOptions {
    double slack = 1.0 / 16.0;  // capacity fraction reserved for streamed fringes
    MicroTile micro{};
};

namespace detail {

inline i64 resident_elements(const LevelPlan& p, const BlocksizeSet& bs) {
    return bs.get(p.level, p.outer_dim) * bs.get(p.level, p.inner_dim);
}

// Guest panel of the level holding `upper`, sized by the plan below it:
// (below's outer blocksize) x (upper's blocksize in the dimension the guest
// shares with upper's resident).
inline i64 guest_elements(const LevelPlan& upper, const LevelPlan& below, const BlocksizeSet& bs) {
    Operand g = guest_operand(below);
    Dim g_shared = shared_dim(g, upper.resident);
    return bs.get(below.level, below.outer_dim) * bs.get(upper.level, g_shared);
}

// Largest (b_outer, b_inner) with b_outer = ratio * b_inner satisfying
// b_outer*b_inner + lin_outer*b_outer + lin_inner*b_inner <= budget.
inline std::pair<double, double> solve_block_dims(double budget, double ratio, double lin_outer,
                                                  double lin_inner) {
    if (budget <= 0 || ratio <= 0) return {0.0, 0.0};
    const double p = lin_outer * ratio + lin_inner;
    const double t = (-p + std::sqrt(p * p + 4.0 * ratio * budget)) / (2.0 * ratio);
    return {ratio * t, t};
}

}  // namespace detail

/// Checks every capacity-fit rule for a validated descriptor structure:
///   (a) resident + guest fit the level;
///   (b) inclusive levels also hold the next plan's resident block;
///   (c) inclusive LRU levels hold everything one iteration of the next
///       plan's outer loop exposes;
///   skipped levels between two plans hold the enclosing guest panel, plus a
///   panel of the enclosing resident (LRU), plus the inner resident block
///   when the skipped level is inclusive. A capped skipped level above the
///   outermost plan is checked against its reuse working set likewise.
inline std::vector<Violation> validate_blocksizes(const AlgorithmDescriptor& d, const BlocksizeSet& bs,
                                                  const CacheHierarchy& hier, const Shape& shape) {
    std::vector<Violation> out = validate_structure(d);
    if (!out.empty()) return out;
    (void)shape;

    // Every entry must belong to a plan loop or be the single allowed cap.
    int cap_entries = 0;
    for (const auto& [key, value] : bs.entries()) {
        const LevelPlan* p = d.plan_at(key.level);
        if (p != nullptr) {
            if (key.dim != p->outer_dim && key.dim != p->inner_dim)
                out.push_back({"unexpected_blocksize_entry", key.level, value, 0,
                               std::string("dimension '") + to_char(key.dim) + "' is not looped at this level"});
        } else {
            bool above_top = key.level > d.top_level();
            if (!above_top || key.dim != long_dim(d.plans.front().resident))
                out.push_back({"unexpected_blocksize_entry", key.level, value, 0,
                               "only a skipped level above the outermost plan may carry a cap entry, "
                               "along the top resident's long dimension"});
            else if (++cap_entries > 1)
                out.push_back({"multiple_cap_blocksizes", key.level, value, 0,
                               "at most one cap entry is supported"});
        }
    }

    for (std::size_t i = 0; i < d.plans.size(); ++i) {
        const auto& p = d.plans[i];
        if (!hier.has_level(p.level)) {
            out.push_back({"level_not_in_hierarchy", p.level, 0, hier.size() - 1, "no such cache level"});
            continue;
        }
        bool missing = false;
        for (Dim dim : {p.outer_dim, p.inner_dim}) {
            if (!bs.has(p.level, dim)) {
                out.push_back({"blocksize_missing", p.level, 0, 0,
                               std::string("no blocksize for dimension '") + to_char(dim) + "'"});
                missing = true;
            }
        }
        if (missing) continue;

        const i64 cap_h = hier.capacity(p.level);
        const i64 resident = detail::resident_elements(p, bs);
        const bool inclusive = hier.level(p.level).inclusive;

        if (i + 1 < d.plans.size()) {
            const auto& q = d.plans[i + 1];
            if (!bs.has(q.level, q.outer_dim) || !bs.has(q.level, q.inner_dim)) continue;
            const i64 guest = detail::guest_elements(p, q, bs);
            const i64 below_resident = detail::resident_elements(q, bs);
            if (resident + guest > cap_h)
                out.push_back({"resident_guest_exceed_capacity", p.level, resident + guest, cap_h,
                               "resident block plus guest panel exceed the level's capacity"});
            if (inclusive && resident + guest + below_resident > cap_h)
                out.push_back({"inclusive_lower_resident_exceed", p.level,
                               resident + guest + below_resident, cap_h,
                               "inclusive level must also hold the next plan's resident block"});
            if (inclusive) {
                // All partitions one iteration of the next plan's outer loop exposes.
                const i64 c = bs.get(q.level, q.outer_dim);
                const i64 exposed =
                    resident + c * (bs.get(p.level, p.outer_dim) + bs.get(p.level, p.inner_dim));
                if (exposed > cap_h)
                    out.push_back({"inclusive_lru_working_set_exceed", p.level, exposed, cap_h,
                                   "partitions exposed by the next plan's outer loop exceed capacity"});
            }
            // Skipped levels strictly between this plan and the next.
            for (int s = q.level + 1; s < p.level; ++s) {
                if (!hier.has_level(s)) continue;
                const i64 cap_s = hier.capacity(s);
                if (guest > cap_s)
                    out.push_back({"skip_guest_exceed", s, guest, cap_s,
                                   "guest panel of the enclosing level does not fit the skipped level"});
                const i64 panel =
                    bs.get(q.level, q.inner_dim) * bs.get(p.level, other_dim(p.resident, q.inner_dim));
                if (guest + panel > cap_s)
                    out.push_back({"skip_lru_panel_exceed", s, guest + panel, cap_s,
                                   "guest panel plus a panel of the enclosing resident exceed the "
                                   "skipped LRU level"});
                if (hier.level(s).inclusive && guest + panel + below_resident > cap_s)
                    out.push_back({"skip_inclusive_resident_exceed", s, guest + panel + below_resident,
                                   cap_s, "inclusive skipped level must also hold the inner resident block"});
            }
        } else {
            // Register level: the tile itself must fit.
            if (resident > cap_h)
                out.push_back({"resident_guest_exceed_capacity", p.level, resident, cap_h,
                               "register tile exceeds the register capacity"});
        }
    }

    // Capped skipped level above the outermost plan: the panel this level is
    // expected to keep must fit. There is no enclosing resident above the
    // outermost plan, so no LRU panel term applies here.
    if (!d.plans.empty()) {
        const auto& top = d.plans.front();
        for (int s = top.level + 1; s < hier.size(); ++s) {
            Dim cap_dim = long_dim(top.resident);
            auto cap = bs.try_get(s, cap_dim);
            if (!cap) continue;
            if (!bs.has(top.level, top.outer_dim)) continue;
            const i64 cap_s = hier.capacity(s);
            const i64 panel = bs.get(top.level, top.outer_dim) * *cap;
            if (panel > cap_s)
                out.push_back({"skip_guest_exceed", s, panel, cap_s,
                               "capped panel does not fit the skipped level"});
        }
    }
    return out;
}

/// Derives the largest blocksizes that satisfy every fit rule, built
/// innermost-out. Per level the two resident blocksizes keep the aspect
/// ratio sqrt(beta_x / beta_y) of the two streamed operands' weights and are
/// rounded down to multiples of the next-inner blocksize in the same
/// dimension. `pinned` entries are taken as given (micro-kernel overrides,
/// cap entries for skipped levels, experiment-fixed values).
inline BlocksizeSet derive_blocksizes(const AlgorithmDescriptor& d, const CacheHierarchy& hier,
                                      const Shape& shape, const AccessCosts& costs = {},
                                      const DeriveOptions& opts = {},
                                      const BlocksizeSet& pinned = {}) {
    costs.validate();
    if (opts.slack < 0 || opts.slack >= 1) throw std::invalid_argument("slack must lie in [0, 1)");
    auto structural = validate_structure(d);
    if (!structural.empty()) throw ValidationFailure(std::move(structural));
    for (const auto& p : d.plans)
        if (!hier.has_level(p.level))
            throw ValidationFailure({{"level_not_in_hierarchy", p.level, 0, hier.size() - 1, ""}});

    BlocksizeSet bs;
    for (const auto& [key, value] : pinned.entries()) bs.set(key.level, key.dim, value);

    const double keep = 1.0 - opts.slack;

    // Rounding granularity: the nearest inner plan that loops the same dim.
    auto inner_multiple = [&](std::size_t i, Dim dim) -> i64 {
        for (std::size_t j = i + 1; j < d.plans.size(); ++j) {
            const auto& q = d.plans[j];
            if (q.outer_dim == dim || q.inner_dim == dim) return bs.get(q.level, dim);
        }
        return 0;
    };

    auto finalize = [&](std::size_t i, Dim dim, double value) -> i64 {
        const auto& p = d.plans[i];
        i64 v = static_cast<i64>(std::floor(value));
        i64 extent = shape.extent(dim);
        if (v >= extent) return extent;  // single partition, margins moot
        i64 q = inner_multiple(i, dim);
        if (q > 0) {
            v = (v / q) * q;
            if (v < q)
                throw InfeasibleError("no feasible blocksize at level " + std::to_string(p.level) +
                                      " in dimension '" + to_char(dim) +
                                      "'; consider skipping this level");
        }
        if (v < 1)
            throw InfeasibleError("no feasible blocksize at level " + std::to_string(p.level) +
                                  " in dimension '" + to_char(dim) + "'; consider skipping this level");
        return v;
    };

    // Innermost plan: the register tile comes from pins or the micro default.
    {
        const auto& reg = d.plans.back();
        for (Dim dim : {reg.outer_dim, reg.inner_dim}) {
            if (bs.has(reg.level, dim)) continue;
            if (reg.resident == Operand::C)
                bs.set(reg.level, dim, dim == Dim::m ? opts.micro.m_r : opts.micro.n_r);
            else
                throw InfeasibleError("register tile for a non-C resident must be pinned explicitly");
        }
        i64 tile = detail::resident_elements(reg, bs);
        if (tile > hier.capacity(reg.level))
            throw InfeasibleError("register tile of " + std::to_string(tile) +
                                  " elements exceeds the register capacity M_0 = " +
                                  std::to_string(hier.capacity(reg.level)));
    }

    for (std::size_t ii = d.plans.size() - 1; ii-- > 0;) {
        const auto& p = d.plans[ii];
        const auto& q = d.plans[ii + 1];
        if (bs.has(p.level, p.outer_dim) && bs.has(p.level, p.inner_dim)) continue;

        const bool outer_pinned = bs.has(p.level, p.outer_dim);
        const bool inner_pinned = bs.has(p.level, p.inner_dim);
        const double beta_outer = costs.of(operand_without(p.outer_dim));
        const double beta_inner = costs.of(operand_without(p.inner_dim));
        const double ratio = beta_outer / beta_inner;

        const i64 c = bs.get(q.level, q.outer_dim);
        const i64 below_resident = detail::resident_elements(q, bs);
        const Operand guest = guest_operand(q);
        const Dim guest_shared = shared_dim(guest, p.resident);
        const bool inclusive = hier.level(p.level).inclusive;

        double budget = keep * static_cast<double>(hier.capacity(p.level)) -
                        (inclusive ? static_cast<double>(below_resident) : 0.0);
        if (budget <= 0)
            throw InfeasibleError("level " + std::to_string(p.level) +
                                  " cannot hold the inner resident block; consider skipping a level");

        // Fit constraint: rule (c) when inclusive (it implies rule (a)),
        // else rule (a) with the guest's linear term on the shared dim.
        double lin_outer = 0, lin_inner = 0;
        if (inclusive) {
            lin_outer = lin_inner = static_cast<double>(c);
        } else if (guest_shared == p.outer_dim) {
            lin_outer = static_cast<double>(c);
        } else {
            lin_inner = static_cast<double>(c);
        }

        double b_outer, b_inner;
        if (outer_pinned || inner_pinned) {
            const Dim fixed_dim = outer_pinned ? p.outer_dim : p.inner_dim;
            const double fixed = static_cast<double>(bs.get(p.level, fixed_dim));
            const double lin_fixed = outer_pinned ? lin_outer : lin_inner;
            const double lin_free = outer_pinned ? lin_inner : lin_outer;
            double free_val = (budget - lin_fixed * fixed) / (fixed + lin_free);
            if (outer_pinned) {
                b_outer = fixed;
                b_inner = free_val;
            } else {
                b_inner = fixed;
                b_outer = free_val;
            }
        } else {
            std::tie(b_outer, b_inner) = detail::solve_block_dims(budget, ratio, lin_outer, lin_inner);
        }

        // Shrinks the pair to satisfy co*b_outer + ci*b_inner + quad*(b_outer*b_inner) <= limit,
        // preserving the aspect ratio unless one dimension is pinned.
        auto apply_constraint = [&](double co, double ci, double quad, double limit) {
            double lhs = co * b_outer + ci * b_inner + quad * b_outer * b_inner;
            if (lhs <= limit) return;
            if (outer_pinned) {
                double denom = ci + quad * b_outer;
                if (denom <= 0)
                    throw InfeasibleError("pinned blocksize at level " + std::to_string(p.level) +
                                          " violates a fit constraint");
                b_inner = (limit - co * b_outer) / denom;
            } else if (inner_pinned) {
                double denom = co + quad * b_inner;
                if (denom <= 0)
                    throw InfeasibleError("pinned blocksize at level " + std::to_string(p.level) +
                                          " violates a fit constraint");
                b_outer = (limit - ci * b_inner) / denom;
            } else {
                double r = b_outer / b_inner;
                double o2, i2;
                if (quad > 0) {
                    std::tie(o2, i2) = detail::solve_block_dims(limit / quad, r, co / quad, ci / quad);
                } else {
                    double t = limit / (co * r + ci);
                    o2 = r * t;
                    i2 = t;
                }
                if (i2 < b_inner) {
                    b_outer = o2;
                    b_inner = i2;
                }
            }
        };

        // Skipped levels between this plan and the next bound the guest panel
        // (plus a panel of this resident, under LRU).
        for (int s = q.level + 1; s < p.level; ++s) {
            if (!hier.has_level(s)) continue;
            double budget_s = keep * static_cast<double>(hier.capacity(s)) -
                              (hier.level(s).inclusive ? static_cast<double>(below_resident) : 0.0);
            if (budget_s <= 0)
                throw InfeasibleError("skipped level " + std::to_string(s) +
                                      " cannot hold the inner resident block");
            const double p_in = static_cast<double>(bs.get(q.level, q.inner_dim));
            const Dim panel_dim = other_dim(p.resident, q.inner_dim);
            double co = (guest_shared == p.outer_dim ? c : 0.0) + (panel_dim == p.outer_dim ? p_in : 0.0);
            double ci = (guest_shared == p.inner_dim ? c : 0.0) + (panel_dim == p.inner_dim ? p_in : 0.0);
            apply_constraint(co, ci, 0.0, budget_s);
        }

        // Capped skipped level above the outermost plan holds the outer-loop
        // panel of the guest-of-memory operand.
        if (ii == 0) {
            for (int s = p.level + 1; s < hier.size(); ++s) {
                auto cap = bs.try_get(s, long_dim(p.resident));
                if (!cap) continue;
                double budget_s = keep * static_cast<double>(hier.capacity(s));
                apply_constraint(static_cast<double>(*cap), 0.0, 0.0, budget_s);
            }
        }

        if (!outer_pinned) bs.set(p.level, p.outer_dim, finalize(ii, p.outer_dim, b_outer));
        if (!inner_pinned) bs.set(p.level, p.inner_dim, finalize(ii, p.inner_dim, b_inner));
    }

    auto check = validate_blocksizes(d, bs, hier, shape);
    if (!check.empty()) throw ValidationFailure(std::move(check));
    return bs;
}

/// One partition loop of the executable nest, outermost first.
struct NestStep {
    int level = 0;
    Dim dim = Dim::m;
    i64 blocksize = 1;
    bool cap = false;  // guest-panel cap on a skipped level above the top plan
};

/// The ordered partition loops a descriptor + blocksize set produce: cap
/// loops of skipped levels above the outermost plan first, then the outer
/// and inner loop of every plan, outermost plan first.
inline std::vector<NestStep> nest_steps(const AlgorithmDescriptor& d, const BlocksizeSet& bs) {
    std::vector<NestStep> steps;
    if (d.plans.empty()) return steps;
    const Dim cap_dim = long_dim(d.plans.front().resident);
    for (const auto& [key, value] : bs.entries()) {
        if (key.level > d.top_level() && key.dim == cap_dim && d.plan_at(key.level) == nullptr)
            steps.push_back({key.level, cap_dim, value, true});
    }
    std::sort(steps.begin(), steps.end(),
              [](const NestStep& a, const NestStep& b) { return a.level > b.level; });
    for (const auto& p : d.plans) {
        steps.push_back({p.level, p.outer_dim, bs.get(p.level, p.outer_dim), false});
        steps.push_back({p.level, p.inner_dim, bs.get(p.level, p.inner_dim), false});
    }
    return steps;
}

}  // namespace tilemul
