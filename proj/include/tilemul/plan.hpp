#pragma once

#include <array>
#include <vector>

#include "tilemul/blocksizes.hpp"
#include "tilemul/cache.hpp"
#include "tilemul/descriptor.hpp"
#include "tilemul/layout.hpp"
#include "tilemul/types.hpp"

namespace tilemul {

struct MicroKernelSpec {
    i64 m_r = 4;
    i64 n_r = 12;
    // When set, the C tile must hold at least this many elements (the
    // instruction-latency times throughput floor of the target kernel).
    i64 min_c_tile = 0;
};

/// Executable loop nest: the ordered partition loops (register plan
/// included) around a C-resident micro-kernel leaf. Doubles as the trace
/// generator's source of truth.
struct LoopNest {
    Shape shape{1, 1, 1};
    AlgorithmDescriptor descriptor;
    BlocksizeSet blocksizes;
    std::vector<NestStep> loops;
    i64 m_r = 1;
    i64 n_r = 1;

    /// One micro-kernel invocation: C(i0..i0+m, j0..j0+n) += A(i0.., p0..) * B(p0.., j0..).
    struct Cell {
        i64 i0, m;
        i64 j0, n;
        i64 p0, k;
    };

    template <typename F>
    void for_each_cell(F&& f) const {
        walk(0, {0, 0, 0}, {shape.m, shape.n, shape.k}, -1, 0, 1, f);
    }

    /// Same walk, but at loop `par_depth` only chunk indices congruent to the
    /// worker's contiguous share are visited. Chunk shares are split
    /// statically, so results are independent of the worker count.
    template <typename F>
    void for_each_cell_split(int par_depth, int worker, int workers, F&& f) const {
        walk(0, {0, 0, 0}, {shape.m, shape.n, shape.k}, par_depth, worker, workers, f);
    }

    i64 cell_count() const {
        i64 n = 0;
        for_each_cell([&](const Cell&) { ++n; });
        return n;
    }

  private:
    template <typename F>
    void walk(std::size_t depth, std::array<i64, 3> origin, std::array<i64, 3> extent, int par_depth,
              int worker, int workers, F& f) const {
        if (depth == loops.size()) {
            f(Cell{origin[0], extent[0], origin[1], extent[1], origin[2], extent[2]});
            return;
        }
        const auto& L = loops[depth];
        const int di = static_cast<int>(L.dim);
        const i64 start = origin[di];
        const i64 end = start + extent[di];
        i64 lo = 0, hi = ceil_div(end - start, L.blocksize);
        if (static_cast<int>(depth) == par_depth) {
            i64 chunks = hi;
            i64 share = ceil_div(chunks, workers);
            lo = std::min<i64>(chunks, share * worker);
            hi = std::min<i64>(chunks, share * (worker + 1));
        }
        for (i64 c = lo; c < hi; ++c) {
            i64 s = start + c * L.blocksize;
            origin[di] = s;
            extent[di] = std::min(L.blocksize, end - s);
            walk(depth + 1, origin, extent, par_depth, worker, workers, f);
        }
    }
};

/// Builds the executable nest for a validated descriptor + blocksize set.
/// The register plan must hold C; structural overrides that put A or B in
/// registers validate but have no executable kernel here.
inline LoopNest build_plan(const AlgorithmDescriptor& d, const BlocksizeSet& bs,
                           const CacheHierarchy& hier, const Shape& shape,
                           const MicroKernelSpec& spec = {}) {
    auto violations = validate_blocksizes(d, bs, hier, shape);
    if (!violations.empty()) throw ValidationFailure(std::move(violations));
    if (d.plans.back().resident != Operand::C)
        throw std::invalid_argument("only C-resident register plans are executable");
    LoopNest nest;
    nest.shape = shape;
    nest.descriptor = d;
    nest.blocksizes = bs;
    nest.loops = nest_steps(d, bs);
    nest.m_r = bs.get(0, Dim::m);
    nest.n_r = bs.get(0, Dim::n);
    if (spec.min_c_tile > 0 && nest.m_r * nest.n_r < spec.min_c_tile)
        throw std::invalid_argument("register tile smaller than the configured latency floor of " +
                                    std::to_string(spec.min_c_tile) + " elements");
    return nest;
}

/// Hierarchical ("prepacked") layout of one operand under a nest: every
/// partition loop touching the operand stores its blocks contiguously, in
/// loop nesting order.
inline BlockLayout layout_for(const LoopNest& nest, Operand op) {
    std::vector<BlockLayout::Step> steps;
    const Dim row_dim = dims_of(op)[0];
    for (const auto& st : nest.loops)
        if (has_dim(op, st.dim)) steps.push_back({st.dim == row_dim, st.blocksize});
    return BlockLayout(nest.shape.rows(op), nest.shape.cols(op), std::move(steps));
}

/// Packs a column-major matrix into the nest's layout for its role.
inline MatrixBuffer pack(const MatrixBuffer& src, const LoopNest& nest) {
    return pack(src, layout_for(nest, src.role));
}

}  // namespace tilemul
