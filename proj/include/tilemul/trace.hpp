#pragma once

#include <istream>
#include <ostream>
#include <string>

#include "tilemul/layout.hpp"
#include "tilemul/plan.hpp"
#include "tilemul/types.hpp"

namespace tilemul {

enum class AccessKind { read, write };

/// One element access of the execution, in program order.
struct TraceEvent {
    Operand op;
    i64 index;  // flat element index under the operand's layout
    AccessKind kind;
};

/// Addressing used by the trace generator. Packed layouts give the
/// prepacked storage's spatial behavior; column-major gives the plain one.
/// Either way the (operand, element) identity is a bijection, so
/// element-granularity simulations agree.
struct TraceLayouts {
    BlockLayout a, b, c;

    static TraceLayouts column_major(const Shape& s) {
        return {BlockLayout(s.m, s.k), BlockLayout(s.k, s.n), BlockLayout(s.m, s.n)};
    }

    static TraceLayouts packed(const LoopNest& nest) {
        return {layout_for(nest, Operand::A), layout_for(nest, Operand::B),
                layout_for(nest, Operand::C)};
    }

    const BlockLayout& of(Operand op) const {
        switch (op) {
            case Operand::A: return a;
            case Operand::B: return b;
            default: return c;
        }
    }
};

/// Emits the element-access stream of the nest, bounded memory, in nest
/// order. Per micro-kernel invocation: the C tile is read, each k step
/// reads the A column fragment then the B row fragment, and the C tile is
/// written back — 2*mr*nr + kc*(mr+nr) events with margin-adjusted tiles.
template <typename Sink>
void generate_trace(const LoopNest& nest, const TraceLayouts& lay, Sink&& sink) {
    nest.for_each_cell([&](const LoopNest::Cell& cell) {
        for (i64 j = 0; j < cell.n; ++j)
            for (i64 i = 0; i < cell.m; ++i)
                sink(TraceEvent{Operand::C, lay.c.element_address(cell.i0 + i, cell.j0 + j),
                                AccessKind::read});
        for (i64 p = 0; p < cell.k; ++p) {
            for (i64 i = 0; i < cell.m; ++i)
                sink(TraceEvent{Operand::A, lay.a.element_address(cell.i0 + i, cell.p0 + p),
                                AccessKind::read});
            for (i64 j = 0; j < cell.n; ++j)
                sink(TraceEvent{Operand::B, lay.b.element_address(cell.p0 + p, cell.j0 + j),
                                AccessKind::read});
        }
        for (i64 j = 0; j < cell.n; ++j)
            for (i64 i = 0; i < cell.m; ++i)
                sink(TraceEvent{Operand::C, lay.c.element_address(cell.i0 + i, cell.j0 + j),
                                AccessKind::write});
    });
}

inline i64 trace_event_count(const LoopNest& nest) {
    i64 count = 0;
    nest.for_each_cell([&](const LoopNest::Cell& cell) {
        count += 2 * cell.m * cell.n + cell.k * (cell.m + cell.n);
    });
    return count;
}

/// Plain-text dump format: one event per line, `OPERAND index R|W`.
inline void write_trace_event(std::ostream& os, const TraceEvent& e) {
    os << to_char(e.op) << ' ' << e.index << ' ' << (e.kind == AccessKind::read ? 'R' : 'W') << '\n';
}

}  // namespace tilemul
