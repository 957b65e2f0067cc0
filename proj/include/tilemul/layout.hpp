#pragma once

#include <algorithm>
#include <vector>

#include "tilemul/types.hpp"

namespace tilemul {

/// Storage layout of one matrix: a chain of partition steps applied
/// outermost-first, each cutting the current block along rows or columns.
/// Blocks of every cut are stored contiguously in partition order; the
/// innermost block is column-major. An empty chain is plain column-major.
///
/// Same-axis steps must divide the enclosing step so that shrunken blocks
/// only ever appear at the true matrix edge.
struct BlockLayout {
    struct Step {
        bool on_rows = true;
        i64 blocksize = 1;
    };

    i64 rows = 0;
    i64 cols = 0;
    std::vector<Step> steps;

    BlockLayout() = default;
    BlockLayout(i64 rows_, i64 cols_, std::vector<Step> steps_ = {})
        : rows(rows_), cols(cols_), steps(std::move(steps_)) {
        if (rows < 1 || cols < 1) throw std::invalid_argument("layout extents must be >= 1");
        i64 prev_row = 0, prev_col = 0;  // 0 = no enclosing step yet on that axis
        for (const auto& st : steps) {
            if (st.blocksize < 1) throw std::invalid_argument("partition blocksize must be >= 1");
            i64& prev = st.on_rows ? prev_row : prev_col;
            if (prev != 0 && prev % st.blocksize != 0)
                throw std::invalid_argument(
                    "partition blocksize must divide the enclosing partition of the same dimension");
            prev = st.blocksize;
        }
    }

    bool blocked() const { return !steps.empty(); }

    /// Flat index of element (i, j); a bijection onto [0, rows*cols).
    i64 element_address(i64 i, i64 j) const {
        if (i < 0 || i >= rows || j < 0 || j >= cols)
            throw std::out_of_range("element index outside matrix");
        i64 addr = 0;
        i64 r0 = 0, r1 = rows, c0 = 0, c1 = cols;
        for (const auto& st : steps) {
            if (st.on_rows) {
                i64 q = (i - r0) / st.blocksize;
                addr += q * st.blocksize * (c1 - c0);
                r0 += q * st.blocksize;
                r1 = std::min(r0 + st.blocksize, r1);
            } else {
                i64 q = (j - c0) / st.blocksize;
                addr += q * st.blocksize * (r1 - r0);
                c0 += q * st.blocksize;
                c1 = std::min(c0 + st.blocksize, c1);
            }
        }
        return addr + (i - r0) + (j - c0) * (r1 - r0);
    }

    /// Extents of the innermost block containing (i, j) and the flat address
    /// of its (local 0,0) corner. Blocks are column-major inside.
    struct LeafBlock {
        i64 base = 0;
        i64 row0 = 0, rows = 0;
        i64 col0 = 0, cols = 0;
    };

    LeafBlock leaf_block(i64 i, i64 j) const {
        LeafBlock lb;
        i64 addr = 0;
        i64 r0 = 0, r1 = rows, c0 = 0, c1 = cols;
        for (const auto& st : steps) {
            if (st.on_rows) {
                i64 q = (i - r0) / st.blocksize;
                addr += q * st.blocksize * (c1 - c0);
                r0 += q * st.blocksize;
                r1 = std::min(r0 + st.blocksize, r1);
            } else {
                i64 q = (j - c0) / st.blocksize;
                addr += q * st.blocksize * (r1 - r0);
                c0 += q * st.blocksize;
                c1 = std::min(c0 + st.blocksize, c1);
            }
        }
        lb.base = addr;
        lb.row0 = r0;
        lb.rows = r1 - r0;
        lb.col0 = c0;
        lb.cols = c1 - c0;
        return lb;
    }
};

/// A matrix with its storage. Elements are 64-bit floats.
struct MatrixBuffer {
    Operand role = Operand::A;
    BlockLayout layout;
    std::vector<double> data;

    i64 rows() const { return layout.rows; }
    i64 cols() const { return layout.cols; }

    static MatrixBuffer column_major(Operand role, i64 rows, i64 cols) {
        MatrixBuffer b;
        b.role = role;
        b.layout = BlockLayout(rows, cols);
        b.data.assign(static_cast<std::size_t>(rows * cols), 0.0);
        return b;
    }

    double at(i64 i, i64 j) const { return data[static_cast<std::size_t>(layout.element_address(i, j))]; }
    double& at(i64 i, i64 j) { return data[static_cast<std::size_t>(layout.element_address(i, j))]; }
};

/// Rearranges a column-major matrix into the given blocked layout.
inline MatrixBuffer pack(const MatrixBuffer& src, const BlockLayout& target) {
    if (src.layout.blocked()) throw std::invalid_argument("pack expects a column-major source");
    if (src.rows() != target.rows || src.cols() != target.cols)
        throw std::invalid_argument("pack target layout extents mismatch source");
    MatrixBuffer out;
    out.role = src.role;
    out.layout = target;
    out.data.assign(src.data.size(), 0.0);
    for (i64 j = 0; j < src.cols(); ++j)
        for (i64 i = 0; i < src.rows(); ++i)
            out.data[static_cast<std::size_t>(target.element_address(i, j))] =
                src.data[static_cast<std::size_t>(i + j * src.rows())];
    return out;
}

/// Inverse of pack: back to column-major, bit-exact on element values.
inline MatrixBuffer unpack(const MatrixBuffer& src) {
    MatrixBuffer out = MatrixBuffer::column_major(src.role, src.rows(), src.cols());
    for (i64 j = 0; j < src.cols(); ++j)
        for (i64 i = 0; i < src.rows(); ++i)
            out.data[static_cast<std::size_t>(i + j * src.rows())] =
                src.data[static_cast<std::size_t>(src.layout.element_address(i, j))];
    return out;
}

}  // namespace tilemul
