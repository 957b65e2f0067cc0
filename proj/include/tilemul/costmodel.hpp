#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tilemul/blocksizes.hpp"
#include "tilemul/cache.hpp"
#include "tilemul/descriptor.hpp"
#include "tilemul/types.hpp"

namespace tilemul {

struct OperandTraffic {
    i64 reads = 0;
    i64 writes = 0;

    i64 total() const { return reads + writes; }
    OperandTraffic& operator+=(const OperandTraffic& o) {
        reads += o.reads;
        writes += o.writes;
        return *this;
    }
};

/// Element transfers into one cache level, split per operand.
struct LevelTraffic {
    int level = 0;
    std::array<OperandTraffic, 3> per_operand{};

    OperandTraffic& of(Operand op) { return per_operand[static_cast<std::size_t>(op)]; }
    const OperandTraffic& of(Operand op) const { return per_operand[static_cast<std::size_t>(op)]; }
    i64 reads() const {
        return per_operand[0].reads + per_operand[1].reads + per_operand[2].reads;
    }
    i64 writes() const {
        return per_operand[0].writes + per_operand[1].writes + per_operand[2].writes;
    }
    i64 total_elements() const { return reads() + writes(); }
    i64 total_bytes() const { return 8 * total_elements(); }
};

/// Closed-form I/O accounting for one descriptor on one hierarchy.
struct CostReport {
    Shape shape{1, 1, 1};
    i64 flops = 0;
    std::vector<LevelTraffic> levels;  // ascending level index
    int boundary_level = 0;            // designated memory boundary for intensity

    const LevelTraffic& at_level(int h) const {
        for (const auto& lt : levels)
            if (lt.level == h) return lt;
        throw std::out_of_range("no traffic entry for level " + std::to_string(h));
    }

    double intensity_flops_per_byte() const {
        i64 bytes = at_level(boundary_level).total_bytes();
        if (bytes == 0) return std::numeric_limits<double>::infinity();
        return static_cast<double>(flops) / static_cast<double>(bytes);
    }
};

/// Lower bound on transfers between a fast memory of M elements and slow
/// memory for one MMM: reads >= 2mnk/sqrt(M) - 2M, writes >= mn - M,
/// both clamped at zero.
inline OperandTraffic io_lower_bound(const Shape& s, i64 M) {
    if (M < 1) throw std::invalid_argument("fast memory capacity must be >= 1");
    long double raw = 2.0L * static_cast<long double>(s.m) * static_cast<long double>(s.n) *
                      static_cast<long double>(s.k) / std::sqrt(static_cast<long double>(M));
    i64 reads = static_cast<i64>(std::ceil(raw)) - 2 * M;
    OperandTraffic t;
    t.reads = std::max<i64>(0, reads);
    t.writes = std::max<i64>(0, s.m * s.n - M);
    return t;
}

/// Two-level I/O of the fundamental resident algorithm for `variant`, with
/// the resident block sized by the variant's two dimensions (in dims_of
/// order: A -> (b_m, b_k), B -> (b_k, b_n), C -> (b_m, b_n)).
///
/// The resident operand moves once (plus once back for C); each streamed
/// operand is re-read once per partition step along its missing dimension.
/// Ceilings are taken per partitioned loop, so margins are counted exactly.
inline LevelTraffic resident_cost(Operand variant, const Shape& s, i64 b_first, i64 b_second) {
    if (b_first < 1 || b_second < 1) throw std::invalid_argument("blocksizes must be >= 1");
    auto ds = dims_of(variant);
    auto block = [&](Dim d) { return d == ds[0] ? b_first : b_second; };
    LevelTraffic t;
    t.of(variant).reads = s.elements(variant);
    if (variant == Operand::C) t.of(variant).writes = s.elements(variant);
    for (Operand y : all_operands) {
        if (y == variant) continue;
        Dim miss = long_dim(y);  // always one of the resident's dimensions
        i64 steps = ceil_div(s.extent(miss), block(miss));
        t.of(y).reads = s.elements(y) * steps;
        if (y == Operand::C) t.of(y).writes = t.of(y).reads;
    }
    return t;
}

namespace detail {

// Distinct subproblem extents along one dimension with multiplicities.
struct ChunkDist {
    std::vector<std::pair<i64, i64>> sizes;  // (extent, count)

    static ChunkDist whole(i64 extent) { return ChunkDist{{{extent, 1}}}; }

    void partition(i64 b) {
        std::vector<std::pair<i64, i64>> next;
        auto add = [&](i64 sz, i64 cnt) {
            for (auto& e : next)
                if (e.first == sz) {
                    e.second += cnt;
                    return;
                }
            next.emplace_back(sz, cnt);
        };
        for (auto [sz, cnt] : sizes) {
            i64 full = sz / b;
            i64 rem = sz % b;
            if (full > 0) add(b, cnt * full);
            if (rem > 0) add(rem, cnt);
        }
        sizes = std::move(next);
    }
};

struct SubproblemDist {
    ChunkDist m, n, k;

    void partition(Dim d, i64 b) {
        switch (d) {
            case Dim::m: m.partition(b); break;
            case Dim::n: n.partition(b); break;
            default: k.partition(b); break;
        }
    }

    template <typename F>
    void for_each(F&& f) const {
        for (auto [ms, mc] : m.sizes)
            for (auto [ns, nc] : n.sizes)
                for (auto [ks, kc] : k.sizes) f(Shape{ms, ns, ks}, mc * nc * kc);
    }
};

inline void accumulate(LevelTraffic& into, const LevelTraffic& t, i64 count) {
    for (Operand op : all_operands) {
        into.of(op).reads += count * t.of(op).reads;
        into.of(op).writes += count * t.of(op).writes;
    }
}

}  // namespace detail

/// Per-level I/O of a multilevel algorithm, composed from resident_cost:
/// traffic into a plan's level sums the two-level cost over every enclosing
/// subproblem; a skipped level is charged as if the enclosing guest panel
/// were its resident block (the panel moves once per reuse scope, everything
/// else streams through).
inline CostReport multilevel_cost(const AlgorithmDescriptor& d, const BlocksizeSet& bs,
                                  const CacheHierarchy& hier, const Shape& shape,
                                  int boundary_level = -1) {
    auto violations = validate_blocksizes(d, bs, hier, shape);
    if (!violations.empty()) throw ValidationFailure(std::move(violations));

    CostReport report;
    report.shape = shape;
    report.flops = shape.flops();
    report.boundary_level = boundary_level < 0 ? hier.top_level() : boundary_level;

    // Enclosing subproblem distribution just before each plan's own loops,
    // and just after them (the scope a guest panel of that plan lives in).
    detail::SubproblemDist dist{detail::ChunkDist::whole(shape.m), detail::ChunkDist::whole(shape.n),
                                detail::ChunkDist::whole(shape.k)};
    for (const auto& st : nest_steps(d, bs))
        if (st.cap) dist.partition(st.dim, st.blocksize);
    const detail::SubproblemDist cap_scope = dist;
    std::vector<detail::SubproblemDist> before(d.plans.size()), after(d.plans.size());
    for (std::size_t i = 0; i < d.plans.size(); ++i) {
        before[i] = dist;
        dist.partition(d.plans[i].outer_dim, bs.get(d.plans[i].level, d.plans[i].outer_dim));
        dist.partition(d.plans[i].inner_dim, bs.get(d.plans[i].level, d.plans[i].inner_dim));
        after[i] = dist;
    }

    for (int h = 0; h < hier.size(); ++h) {
        LevelTraffic lt;
        lt.level = h;
        if (const LevelPlan* p = d.plan_at(h)) {
            std::size_t i = 0;
            while (d.plans[i].level != h) ++i;
            auto ds = dims_of(p->resident);
            i64 b1 = bs.get(h, ds[0]);
            i64 b2 = bs.get(h, ds[1]);
            before[i].for_each([&](const Shape& sub, i64 count) {
                detail::accumulate(lt, resident_cost(p->resident, sub, b1, b2), count);
            });
        } else if (h > d.top_level()) {
            // Skipped above the outermost plan: the guest of main memory.
            const auto& top = d.plans.front();
            Operand g = guest_operand(top);
            auto ds = dims_of(g);
            cap_scope.for_each([&](const Shape& sub, i64 count) {
                auto gbs = [&](Dim dim) {
                    return dim == top.outer_dim ? bs.get(top.level, top.outer_dim) : sub.extent(dim);
                };
                detail::accumulate(lt, resident_cost(g, sub, gbs(ds[0]), gbs(ds[1])), count);
            });
        } else {
            // Skipped between two plans: the enclosing level's guest panel.
            std::size_t i = 0;
            while (i + 1 < d.plans.size() && d.plans[i + 1].level > h) ++i;
            const auto& q = d.plans[i + 1];
            Operand g = guest_operand(q);
            auto ds = dims_of(g);
            after[i].for_each([&](const Shape& sub, i64 count) {
                auto gbs = [&](Dim dim) {
                    return dim == q.outer_dim ? bs.get(q.level, q.outer_dim) : sub.extent(dim);
                };
                detail::accumulate(lt, resident_cost(g, sub, gbs(ds[0]), gbs(ds[1])), count);
            });
        }
        report.levels.push_back(lt);
    }
    return report;
}

/// Flops per element and per byte across the report's designated boundary
/// (or an explicit level). Zero traffic reports infinity.
struct Efficiency {
    double flops_per_element = 0;
    double flops_per_byte = 0;
};

inline Efficiency efficiency(const CostReport& report, int level = -1, double write_weight = 1.0) {
    const auto& lt = report.at_level(level < 0 ? report.boundary_level : level);
    double elems = static_cast<double>(lt.reads()) + write_weight * static_cast<double>(lt.writes());
    if (elems <= 0) {
        double inf = std::numeric_limits<double>::infinity();
        return {inf, inf};
    }
    double fpe = static_cast<double>(report.flops) / elems;
    return {fpe, fpe / 8.0};
}

/// Large-shape flops per element of a fundamental resident algorithm: only
/// the streamed terms survive, so the resident's compulsory traffic drops
/// out. Blocksizes follow dims_of order, as in resident_cost.
inline double streaming_efficiency(Operand variant, i64 b_first, i64 b_second) {
    if (b_first < 1 || b_second < 1) throw std::invalid_argument("blocksizes must be >= 1");
    auto ds = dims_of(variant);
    auto block = [&](Dim d) { return d == ds[0] ? b_first : b_second; };
    double denom = 0;
    for (Operand y : all_operands) {
        if (y == variant) continue;
        double weight = y == Operand::C ? 2.0 : 1.0;
        denom += weight / static_cast<double>(block(long_dim(y)));
    }
    return 2.0 / denom;
}

/// Goto-style shorthand: (1/k_c + 1/(2 n_c))^{-1} flops per element, the
/// streaming efficiency of a k_c x n_c panel of B held at the memory side.
inline double goto_efficiency(i64 k_c, i64 n_c) {
    if (k_c < 1 || n_c < 1) throw std::invalid_argument("blocksizes must be >= 1");
    return 1.0 / (1.0 / static_cast<double>(k_c) + 1.0 / (2.0 * static_cast<double>(n_c)));
}

struct RooflineParams {
    double peak_flops_per_s = 0;
    double bandwidth_bytes_per_s = 0;
};

/// min(peak, intensity * bandwidth).
inline double roofline_bound(double intensity_flops_per_byte, const RooflineParams& params) {
    if (!(params.peak_flops_per_s > 0) || !(params.bandwidth_bytes_per_s > 0))
        throw std::invalid_argument("roofline parameters must be strictly positive");
    if (intensity_flops_per_byte < 0) throw std::invalid_argument("intensity must be >= 0");
    return std::min(params.peak_flops_per_s,
                    intensity_flops_per_byte * params.bandwidth_bytes_per_s);
}

struct ParetoPoint {
    double ratio = 0;
    i64 inner_capacity = 0;
    i64 outer_block_k = 0, outer_block_n = 0;  // B block resident in the outer cache
    i64 inner_block_m = 0, inner_block_k = 0;  // A block resident in the inner cache
    double eff_outer_flops_per_element = 0;
    double eff_inner_flops_per_element = 0;
};

/// Sweeps the capacity ratio between a cache pair, deriving square-ish
/// resident blocks under the fit rules each time and reporting both levels'
/// efficiencies from the composed cost model. The canonical pair runs B in
/// the outer cache and A in the inner one over a register C tile.
inline std::vector<ParetoPoint> pareto_sweep(i64 outer_capacity, std::vector<double> ratios,
                                             const Shape& shape, const DeriveOptions& opts = {}) {
    std::sort(ratios.begin(), ratios.end());
    std::vector<ParetoPoint> points;
    const i64 reg = std::max<i64>(opts.micro.m_r * opts.micro.n_r, 1);
    AlgorithmDescriptor d = parse_name("B2A1C0");
    for (double r : ratios) {
        if (!(r > 1.0)) throw std::invalid_argument("ratios must be > 1");
        i64 inner = static_cast<i64>(static_cast<double>(outer_capacity) / r);
        if (inner <= reg)
            throw InfeasibleError("infeasible ratio " + std::to_string(r) +
                                  ": the inner cache cannot hold even one register tile");
        CacheHierarchy hier({{0, reg, 1, false, true, true},
                             {1, inner, 1, false, true, true},
                             {2, outer_capacity, 1, false, true, true}});
        BlocksizeSet bs = derive_blocksizes(d, hier, shape, {}, opts);
        CostReport rep = multilevel_cost(d, bs, hier, shape);
        ParetoPoint pt;
        pt.ratio = r;
        pt.inner_capacity = inner;
        pt.outer_block_k = bs.get(2, Dim::k);
        pt.outer_block_n = bs.get(2, Dim::n);
        pt.inner_block_m = bs.get(1, Dim::m);
        pt.inner_block_k = bs.get(1, Dim::k);
        pt.eff_outer_flops_per_element = efficiency(rep, 2).flops_per_element;
        pt.eff_inner_flops_per_element = efficiency(rep, 1).flops_per_element;
        points.push_back(pt);
    }
    return points;
}

}  // namespace tilemul
