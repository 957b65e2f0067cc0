#pragma once

#include <cstring>
#include <thread>
#include <vector>

#include "tilemul/layout.hpp"
#include "tilemul/plan.hpp"
#include "tilemul/types.hpp"

namespace tilemul {

/// Naive triple loop in fixed i-j-p order; the comparison oracle.
/// Buffers must be column-major.
inline void reference_gemm(const MatrixBuffer& A, const MatrixBuffer& B, MatrixBuffer& C) {
    if (A.layout.blocked() || B.layout.blocked() || C.layout.blocked())
        throw std::invalid_argument("reference_gemm expects column-major buffers");
    const i64 m = C.rows(), n = C.cols(), k = A.cols();
    if (A.rows() != m || B.rows() != k || B.cols() != n)
        throw std::invalid_argument("operand shapes do not conform");
    const double* a = A.data.data();
    const double* b = B.data.data();
    double* c = C.data.data();
    for (i64 i = 0; i < m; ++i)
        for (i64 j = 0; j < n; ++j) {
            double acc = 0;
            for (i64 p = 0; p < k; ++p) acc += a[i + p * m] * b[p + j * k];
            c[i + j * m] += acc;
        }
}

/// Register-tile update c += a * b: the C tile is held across the whole k
/// loop and touched exactly once on entry and once on exit. `acc` provides
/// mr*nr doubles of scratch; margin tiles run through it unchanged.
inline void micro_kernel(const double* a, i64 lda, const double* b, i64 ldb, double* c, i64 ldc,
                         i64 mr, i64 nr, i64 kc, double* acc) {
    for (i64 j = 0; j < nr; ++j)
        for (i64 i = 0; i < mr; ++i) acc[i + j * mr] = c[i + j * ldc];
    for (i64 p = 0; p < kc; ++p)
        for (i64 j = 0; j < nr; ++j) {
            const double bpj = b[p + j * ldb];
            for (i64 i = 0; i < mr; ++i) acc[i + j * mr] += a[i + p * lda] * bpj;
        }
    for (i64 j = 0; j < nr; ++j)
        for (i64 i = 0; i < mr; ++i) c[i + j * ldc] = acc[i + j * mr];
}

struct ExecOptions {
    int workers = 1;
    // Loop to split across workers (index into nest.loops); -1 picks the
    // register plan's outer loop, the second loop around the micro-kernel.
    int parallel_loop = -1;
};

namespace detail {

// Resolves one operand's storage for a leaf region to (base pointer, column
// stride). Blocked buffers must match the nest's own layout so that every
// leaf region is one contiguous column-major block.
struct OperandView {
    const double* data = nullptr;
    const BlockLayout* layout = nullptr;

    std::pair<const double*, i64> leaf(i64 r0, i64 rlen, i64 c0, i64 clen) const {
        if (!layout->blocked()) return {data + r0 + c0 * layout->rows, layout->rows};
        auto lb = layout->leaf_block(r0, c0);
        if (lb.row0 != r0 || lb.rows != rlen || lb.col0 != c0 || lb.cols != clen)
            throw std::invalid_argument("buffer layout does not match the plan's partitions");
        return {data + lb.base, lb.rows};
    }
};

inline void check_buffer(const MatrixBuffer& buf, Operand role, const LoopNest& nest) {
    if (buf.role != role) throw std::invalid_argument("buffer role mismatch");
    if (buf.rows() != nest.shape.rows(role) || buf.cols() != nest.shape.cols(role))
        throw std::invalid_argument("buffer extents do not match the plan's shape");
    if (buf.layout.blocked()) {
        BlockLayout expect = layout_for(nest, role);
        if (expect.steps.size() != buf.layout.steps.size())
            throw std::invalid_argument("blocked buffer does not match the plan's layout");
        for (std::size_t i = 0; i < expect.steps.size(); ++i)
            if (expect.steps[i].on_rows != buf.layout.steps[i].on_rows ||
                expect.steps[i].blocksize != buf.layout.steps[i].blocksize)
                throw std::invalid_argument("blocked buffer does not match the plan's layout");
    }
}

}  // namespace detail

/// Runs the loop nest numerically: C += A * B in place. Buffers may be
/// column-major or prepacked in the nest's hierarchical layout. With
/// workers > 1 one m- or n-dimension loop is split statically, so results
/// are bitwise identical for any worker count.
inline void execute(const LoopNest& nest, const MatrixBuffer& A, const MatrixBuffer& B,
                    MatrixBuffer& C, const ExecOptions& opts = {}) {
    detail::check_buffer(A, Operand::A, nest);
    detail::check_buffer(B, Operand::B, nest);
    detail::check_buffer(C, Operand::C, nest);
    if (opts.workers < 1) throw std::invalid_argument("worker count must be >= 1");

    detail::OperandView va{A.data.data(), &A.layout};
    detail::OperandView vb{B.data.data(), &B.layout};
    detail::OperandView vc{C.data.data(), &C.layout};
    double* cdata = C.data.data();

    auto run_range = [&](int par_depth, int worker, int workers) {
        std::vector<double> acc(static_cast<std::size_t>(nest.m_r * nest.n_r));
        auto body = [&](const LoopNest::Cell& cell) {
            auto [ab, lda] = va.leaf(cell.i0, cell.m, cell.p0, cell.k);
            auto [bb, ldb] = vb.leaf(cell.p0, cell.k, cell.j0, cell.n);
            auto [cb, ldc] = vc.leaf(cell.i0, cell.m, cell.j0, cell.n);
            double* cw = cdata + (cb - C.data.data());
            micro_kernel(ab, lda, bb, ldb, cw, ldc, cell.m, cell.n, cell.k, acc.data());
        };
        if (par_depth < 0)
            nest.for_each_cell(body);
        else
            nest.for_each_cell_split(par_depth, worker, workers, body);
    };

    if (opts.workers == 1) {
        run_range(-1, 0, 1);
        return;
    }
    int par = opts.parallel_loop;
    if (par < 0) par = static_cast<int>(nest.loops.size()) - 2;
    if (par < 0 || par >= static_cast<int>(nest.loops.size()))
        throw std::invalid_argument("parallel loop index out of range");
    if (nest.loops[static_cast<std::size_t>(par)].dim == Dim::k)
        throw std::invalid_argument(
            "cannot parallelize a k-dimension loop: workers would accumulate into shared C");

    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(opts.workers));
    for (int w = 0; w < opts.workers; ++w)
        threads.emplace_back([&, w] { run_range(par, w, opts.workers); });
    for (auto& t : threads) t.join();
}

}  // namespace tilemul
