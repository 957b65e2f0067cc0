#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "tilemul/cache.hpp"
#include "tilemul/costmodel.hpp"
#include "tilemul/trace.hpp"
#include "tilemul/types.hpp"

namespace tilemul {

/// Hit/miss/writeback counts for one simulated level.
struct SimLevelStats {
    int level = 0;
    i64 capacity_lines = 0;
    i64 granularity = 1;
    i64 hits = 0;
    i64 read_misses = 0;
    i64 write_misses = 0;
    i64 fetched_lines = 0;       // lines brought in (read misses + allocating write misses)
    i64 passthrough_writes = 0;  // writes forwarded across this boundary without allocation
    i64 writebacks = 0;          // dirty lines crossing the boundary above this level
    std::array<i64, 3> per_operand_misses{};
    std::array<i64, 3> per_operand_writebacks{};

    i64 misses() const { return read_misses + write_misses; }
    /// Elements crossing the boundary between this level and the next slower
    /// one, both directions: fetches, forwarded writes, and writebacks.
    i64 transferred_elements() const {
        return granularity * (fetched_lines + writebacks) + passthrough_writes;
    }
};

struct SimResult {
    std::vector<SimLevelStats> levels;  // ascending level index
    i64 events = 0;

    const SimLevelStats& at_level(int h) const {
        for (const auto& s : levels)
            if (s.level == h) return s;
        throw std::out_of_range("level not simulated");
    }
    const SimLevelStats& outermost() const { return levels.back(); }
};

struct SimOptions {
    bool include_registers = false;  // simulate level 0 as a cache too
    bool flush_dirty_at_end = true;  // drain dirty lines into writeback counts
};

/// Trace-driven multilevel cache simulator. Each level is a fully
/// associative LRU array of capacity/granularity lines; lookups proceed
/// inward-out and a miss forwards the event to the next level. Inclusive
/// levels back-invalidate inner copies on eviction. Demand-only and
/// deterministic.
class LruSimulator {
  public:
    LruSimulator(const CacheHierarchy& hier, const Shape& shape, SimOptions opts = {})
        : opts_(opts) {
        i64 align = 1;
        for (const auto& lv : hier.levels()) align = std::lcm(align, lv.granularity);
        base_[0] = 0;
        base_[1] = round_up(shape.elements(Operand::A), align);
        base_[2] = base_[1] + round_up(shape.elements(Operand::B), align);
        addr_space_ = base_[2] + round_up(shape.elements(Operand::C), align);
        if (addr_space_ > (i64{1} << 31))
            throw std::invalid_argument("trace address space too large to simulate");
        for (const auto& lv : hier.levels()) {
            if (lv.index == 0 && !opts.include_registers) continue;
            levels_.emplace_back(lv, addr_space_);
        }
        if (levels_.empty()) throw std::invalid_argument("nothing to simulate");
        if (levels_.size() > max_levels)
            throw std::invalid_argument("too many cache levels to simulate");
    }

    void access(const TraceEvent& e) {
        ++events_;
        const i64 addr = base_[static_cast<std::size_t>(e.op)] + e.index;
        const bool is_write = e.kind == AccessKind::write;
        const int L = static_cast<int>(levels_.size());

        int served = L;  // first level holding the line; L = memory
        for (int li = 0; li < L; ++li) {
            auto& lv = levels_[static_cast<std::size_t>(li)];
            const std::int32_t node = lv.find(addr);
            if (node >= 0) {
                lv.promote(node);
                ++lv.stats.hits;
                served = li;
                break;
            }
            ++(is_write ? lv.stats.write_misses : lv.stats.read_misses);
            ++lv.stats.per_operand_misses[static_cast<std::size_t>(e.op)];
        }

        // Install into the missed prefix. Reads always allocate, writes per
        // write_allocate; an inclusive level must allocate whenever some
        // faster level does.
        std::array<bool, max_levels> install{};
        for (int li = 0; li < served; ++li) {
            auto& lv = levels_[static_cast<std::size_t>(li)];
            install[static_cast<std::size_t>(li)] = !is_write || lv.write_allocate;
        }
        bool any_inner = false;
        for (int li = 0; li < served; ++li) {
            if (install[static_cast<std::size_t>(li)])
                any_inner = true;
            else if (any_inner && levels_[static_cast<std::size_t>(li)].inclusive)
                install[static_cast<std::size_t>(li)] = true;
        }
        for (int li = served - 1; li >= 0; --li) {
            if (!install[static_cast<std::size_t>(li)]) continue;
            auto& lv = levels_[static_cast<std::size_t>(li)];
            ++lv.stats.fetched_lines;
            insert_line(li, addr, e.op);
        }

        // A write lands at the innermost level now holding the line and
        // turns it dirty there if that level writes back; otherwise it is
        // forwarded outward, crossing each boundary until absorbed.
        if (is_write) {
            for (int li = 0; li < L; ++li) {
                auto& lv = levels_[static_cast<std::size_t>(li)];
                const std::int32_t node = lv.find(addr);
                if (node >= 0 && lv.write_back) {
                    lv.dirty[static_cast<std::size_t>(node)] = 1;
                    return;
                }
                ++lv.stats.passthrough_writes;
            }
        }
    }

    SimResult finish() {
        if (opts_.flush_dirty_at_end) flush();
        SimResult r;
        r.events = events_;
        for (auto& lv : levels_) r.levels.push_back(lv.stats);
        return r;
    }

    std::size_t simulated_levels() const { return levels_.size(); }

    /// Lines currently resident at one simulated level (by position in the
    /// simulated stack, innermost first). Intended for tests and debugging.
    std::vector<i64> resident_lines(std::size_t position) const {
        const auto& lv = levels_.at(position);
        std::vector<i64> out;
        for (std::int32_t n = 0; n < lv.grown; ++n)
            if (lv.line_of[static_cast<std::size_t>(n)] >= 0)
                out.push_back(lv.line_of[static_cast<std::size_t>(n)]);
        return out;
    }

  private:
    static constexpr std::size_t max_levels = 16;

    struct Level {
        i64 granularity;
        i64 capacity_lines;
        bool inclusive;
        bool write_allocate;
        bool write_back;
        SimLevelStats stats;

        std::vector<std::int32_t> table;  // line id -> node, -1 = absent
        std::vector<i64> line_of;         // -1 marks a free node slot
        std::vector<std::int32_t> prev, next;
        std::vector<std::uint8_t> dirty, op_of;
        std::vector<std::int32_t> free_slots;
        std::int32_t head = -1, tail = -1;  // MRU, LRU
        std::int32_t grown = 0;

        Level(const CacheLevel& lv, i64 addr_space)
            : granularity(lv.granularity),
              capacity_lines(std::max<i64>(1, lv.capacity_elements / lv.granularity)),
              inclusive(lv.inclusive),
              write_allocate(lv.write_allocate),
              write_back(lv.write_back) {
            stats.level = lv.index;
            stats.capacity_lines = capacity_lines;
            stats.granularity = granularity;
            table.assign(static_cast<std::size_t>(ceil_div(addr_space, granularity)), -1);
            const std::size_t cap = static_cast<std::size_t>(capacity_lines);
            line_of.assign(cap, -1);
            prev.assign(cap, -1);
            next.assign(cap, -1);
            dirty.assign(cap, 0);
            op_of.assign(cap, 0);
        }

        std::int32_t find(i64 addr) const {
            return table[static_cast<std::size_t>(addr / granularity)];
        }

        void unlink(std::int32_t n) {
            const auto ni = static_cast<std::size_t>(n);
            if (prev[ni] >= 0)
                next[static_cast<std::size_t>(prev[ni])] = next[ni];
            else
                head = next[ni];
            if (next[ni] >= 0)
                prev[static_cast<std::size_t>(next[ni])] = prev[ni];
            else
                tail = prev[ni];
        }

        void push_front(std::int32_t n) {
            const auto ni = static_cast<std::size_t>(n);
            prev[ni] = -1;
            next[ni] = head;
            if (head >= 0) prev[static_cast<std::size_t>(head)] = n;
            head = n;
            if (tail < 0) tail = n;
        }

        void promote(std::int32_t n) {
            if (head == n) return;
            unlink(n);
            push_front(n);
        }

        bool full() const {
            return free_slots.empty() && grown == static_cast<std::int32_t>(capacity_lines);
        }

        std::int32_t take_slot() {
            if (!free_slots.empty()) {
                std::int32_t n = free_slots.back();
                free_slots.pop_back();
                return n;
            }
            return grown++;
        }

        void release(std::int32_t n) {
            line_of[static_cast<std::size_t>(n)] = -1;
            free_slots.push_back(n);
        }
    };

    static i64 round_up(i64 v, i64 a) { return ceil_div(v, a) * a; }

    void insert_line(int li, i64 addr, Operand op) {
        auto& lv = levels_[static_cast<std::size_t>(li)];
        if (lv.full()) evict(li, lv.tail);
        const std::int32_t node = lv.take_slot();
        const i64 line = addr / lv.granularity;
        lv.line_of[static_cast<std::size_t>(node)] = line;
        lv.dirty[static_cast<std::size_t>(node)] = 0;
        lv.op_of[static_cast<std::size_t>(node)] = static_cast<std::uint8_t>(op);
        lv.table[static_cast<std::size_t>(line)] = node;
        lv.push_front(node);
    }

    void evict(int li, std::int32_t node) {
        auto& lv = levels_[static_cast<std::size_t>(li)];
        const i64 line = lv.line_of[static_cast<std::size_t>(node)];
        bool dirty = lv.dirty[static_cast<std::size_t>(node)] != 0;
        const Operand op = static_cast<Operand>(lv.op_of[static_cast<std::size_t>(node)]);
        lv.table[static_cast<std::size_t>(line)] = -1;
        lv.unlink(node);
        lv.release(node);

        if (lv.inclusive) dirty = back_invalidate(li, line) || dirty;
        if (dirty && lv.write_back) emit_writeback(li, line * lv.granularity, op);
    }

    // Removes the evicted line's footprint from all faster levels; returns
    // whether a dirty inner copy merged into the outgoing line. The merged
    // data crosses every boundary up to (excluding) the evicting level.
    bool back_invalidate(int li, i64 line) {
        auto& lv = levels_[static_cast<std::size_t>(li)];
        const i64 lo = line * lv.granularity;
        const i64 hi = lo + lv.granularity;
        bool merged_dirty = false;
        for (int f = 0; f < li; ++f) {
            auto& fl = levels_[static_cast<std::size_t>(f)];
            for (i64 a = lo; a < hi; a += fl.granularity) {
                const std::int32_t n = fl.find(a);
                if (n < 0) continue;
                if (fl.dirty[static_cast<std::size_t>(n)]) {
                    merged_dirty = true;
                    const Operand op = static_cast<Operand>(fl.op_of[static_cast<std::size_t>(n)]);
                    for (int j = f; j < li; ++j) {
                        auto& jl = levels_[static_cast<std::size_t>(j)];
                        ++jl.stats.writebacks;
                        ++jl.stats.per_operand_writebacks[static_cast<std::size_t>(op)];
                    }
                }
                fl.table[static_cast<std::size_t>(fl.line_of[static_cast<std::size_t>(n)])] = -1;
                fl.unlink(n);
                fl.release(n);
            }
        }
        return merged_dirty;
    }

    // Dirty line leaving level li crosses each boundary outward until some
    // slower level holds the line (which then turns dirty) or memory.
    void emit_writeback(int li, i64 addr, Operand op) {
        const int L = static_cast<int>(levels_.size());
        for (int o = li; o < L; ++o) {
            auto& lv = levels_[static_cast<std::size_t>(o)];
            ++lv.stats.writebacks;
            ++lv.stats.per_operand_writebacks[static_cast<std::size_t>(op)];
            if (o + 1 < L) {
                auto& nx = levels_[static_cast<std::size_t>(o + 1)];
                const std::int32_t n = nx.find(addr);
                if (n >= 0) {
                    if (nx.write_back) {
                        nx.dirty[static_cast<std::size_t>(n)] = 1;
                        return;
                    }
                    // next level holds the line but writes through: keep going
                }
            }
        }
    }

    void flush() {
        const int L = static_cast<int>(levels_.size());
        for (int li = 0; li < L; ++li) {
            auto& lv = levels_[static_cast<std::size_t>(li)];
            for (std::int32_t n = 0; n < lv.grown; ++n) {
                if (lv.line_of[static_cast<std::size_t>(n)] < 0) continue;
                if (!lv.dirty[static_cast<std::size_t>(n)]) continue;
                lv.dirty[static_cast<std::size_t>(n)] = 0;
                emit_writeback(li, lv.line_of[static_cast<std::size_t>(n)] * lv.granularity,
                               static_cast<Operand>(lv.op_of[static_cast<std::size_t>(n)]));
            }
        }
    }

    SimOptions opts_;
    std::vector<Level> levels_;
    std::array<i64, 3> base_{};
    i64 addr_space_ = 0;
    i64 events_ = 0;
};

/// Replays the nest's trace through the hierarchy.
inline SimResult simulate(const LoopNest& nest, const TraceLayouts& lay, const CacheHierarchy& hier,
                          SimOptions opts = {}) {
    LruSimulator sim(hier, nest.shape, opts);
    generate_trace(nest, lay, [&](const TraceEvent& e) { sim.access(e); });
    return sim.finish();
}

/// Per-level relative error of the analytical model against the simulator,
/// comparing total boundary transfers (elements moved in both directions)
/// against the model's read+write totals.
struct LevelComparison {
    int level = 0;
    i64 model_elements = 0;
    i64 sim_elements = 0;
    double rel_error = 0;
};

struct ComparisonReport {
    std::vector<LevelComparison> levels;
    double max_rel_error = 0;
};

inline ComparisonReport compare_model(const SimResult& sim, const CostReport& model) {
    ComparisonReport rep;
    for (const auto& s : sim.levels) {
        bool found = false;
        for (const auto& lt : model.levels) found = found || lt.level == s.level;
        if (!found)
            throw std::invalid_argument("simulated level " + std::to_string(s.level) +
                                        " missing from the model report: mismatched hierarchies");
        LevelComparison c;
        c.level = s.level;
        c.model_elements = model.at_level(s.level).total_elements();
        c.sim_elements = s.transferred_elements();
        if (c.model_elements == 0)
            c.rel_error = c.sim_elements == 0 ? 0.0 : std::numeric_limits<double>::infinity();
        else
            c.rel_error = std::abs(static_cast<double>(c.sim_elements - c.model_elements)) /
                          static_cast<double>(c.model_elements);
        rep.max_rel_error = std::max(rep.max_rel_error, c.rel_error);
        rep.levels.push_back(c);
    }
    return rep;
}

}  // namespace tilemul
