#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "helpers.hpp"
#include "tilemul/tilemul.hpp"

using namespace tilemul;

TEST_CASE("shape invariants") {
    Shape s(3, 4, 5);
    CHECK(s.flops() == 2 * 3 * 4 * 5);
    CHECK(s.extent(Dim::m) == 3);
    CHECK(s.rows(Operand::A) == 3);
    CHECK(s.cols(Operand::A) == 5);
    CHECK(s.rows(Operand::B) == 5);
    CHECK(s.cols(Operand::B) == 4);
    CHECK_THROWS_AS(Shape(0, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(Shape(1, 1, 0), std::invalid_argument);
}

TEST_CASE("operand dimension vocabulary") {
    // each operand maps to one unordered pair; the three pairs are distinct
    std::set<std::set<Dim>> pairs;
    for (Operand op : all_operands) {
        auto ds = dims_of(op);
        pairs.insert({ds[0], ds[1]});
        // exactly one dimension is missing, and it is long_dim
        int missing = 0;
        for (Dim d : all_dims)
            if (!has_dim(op, d)) {
                ++missing;
                CHECK(long_dim(op) == d);
                CHECK(operand_without(d) == op);
            }
        CHECK(missing == 1);
    }
    CHECK(pairs.size() == 3);
    CHECK(shared_dim(Operand::A, Operand::B) == Dim::k);
    CHECK(shared_dim(Operand::A, Operand::C) == Dim::m);
    CHECK(shared_dim(Operand::B, Operand::C) == Dim::n);
    CHECK(other_dim(Operand::A, Dim::m) == Dim::k);
}

TEST_CASE("cache hierarchy construction") {
    CHECK_NOTHROW(CacheHierarchy({{0, 64, 1, false, true, true}, {1, 1024, 1, false, true, true}}));
    CHECK_THROWS_AS(CacheHierarchy({{0, 64, 1, false, true, true}, {1, 64, 1, false, true, true}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(CacheHierarchy({{0, 64, 1, false, true, true}, {2, 128, 1, false, true, true}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(CacheHierarchy({{0, 0, 1, false, true, true}}), std::invalid_argument);
}

TEST_CASE("column-major element addresses") {
    BlockLayout lay(3, 4);
    CHECK(lay.element_address(0, 0) == 0);
    CHECK(lay.element_address(1, 2) == 7);  // i + j*rows
    CHECK_THROWS_AS(lay.element_address(3, 0), std::out_of_range);
    CHECK_THROWS_AS(lay.element_address(0, 4), std::out_of_range);
}

namespace {

// Independent oracle for the 4x4 / blocksize-2 layout: enumerate blocks in
// partition order (column blocks outer, row blocks inner), column-major
// inside each block.
i64 blocked_4x4_expected(i64 i, i64 j) {
    i64 jb = j / 2, ib = i / 2;
    i64 block_index = jb * 2 + ib;
    return block_index * 4 + (i % 2) + (j % 2) * 2;
}

}  // namespace

TEST_CASE("4x4 blocked layout matches the block-tree walk") {
    BlockLayout lay(4, 4, {{false, 2}, {true, 2}});  // partition cols, then rows
    for (i64 j = 0; j < 4; ++j)
        for (i64 i = 0; i < 4; ++i) CHECK(lay.element_address(i, j) == blocked_4x4_expected(i, j));
    // the second block in partition order starts at flat index 4
    CHECK(lay.element_address(2, 0) == 4);
}

TEST_CASE("element addresses are bijective for random layouts") {
    std::mt19937_64 rng(7);
    for (int iter = 0; iter < 40; ++iter) {
        std::uniform_int_distribution<i64> ext(1, 17);
        i64 rows = ext(rng), cols = ext(rng);
        std::vector<BlockLayout::Step> steps;
        i64 prev_r = 0, prev_c = 0;
        int nsteps = std::uniform_int_distribution<int>(0, 3)(rng);
        for (int s = 0; s < nsteps; ++s) {
            bool on_rows = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
            i64& prev = on_rows ? prev_r : prev_c;
            i64 hi = prev == 0 ? 8 : prev;
            std::vector<i64> divisors;
            for (i64 b = 1; b <= hi; ++b)
                if (prev == 0 || prev % b == 0) divisors.push_back(b);
            i64 b = divisors[std::uniform_int_distribution<std::size_t>(0, divisors.size() - 1)(rng)];
            steps.push_back({on_rows, b});
            prev = b;
        }
        BlockLayout lay(rows, cols, steps);
        std::set<i64> seen;
        for (i64 j = 0; j < cols; ++j)
            for (i64 i = 0; i < rows; ++i) {
                i64 a = lay.element_address(i, j);
                CHECK(a >= 0);
                CHECK(a < rows * cols);
                seen.insert(a);
            }
        CHECK(static_cast<i64>(seen.size()) == rows * cols);
    }
}

TEST_CASE("nested same-dimension partitions must divide") {
    CHECK_THROWS_AS(BlockLayout(8, 8, {{true, 4}, {true, 3}}), std::invalid_argument);
    CHECK_NOTHROW(BlockLayout(8, 8, {{true, 4}, {true, 2}}));
    CHECK_THROWS_AS(BlockLayout(8, 8, {{true, 0}}), std::invalid_argument);
}

TEST_CASE("pack and unpack round-trip") {
    std::mt19937_64 rng(11);

    SECTION("degenerate 1x1") {
        MatrixBuffer src = testutil::random_matrix(rng, Operand::A, 1, 1);
        BlockLayout lay(1, 1, {{true, 3}});
        MatrixBuffer packed = pack(src, lay);
        CHECK(packed.data == src.data);
        CHECK(unpack(packed).data == src.data);
    }

    SECTION("4x4 blocksize 2 produces four contiguous blocks") {
        MatrixBuffer src = MatrixBuffer::column_major(Operand::B, 4, 4);
        for (i64 j = 0; j < 4; ++j)
            for (i64 i = 0; i < 4; ++i) src.at(i, j) = static_cast<double>(i * 10 + j);
        MatrixBuffer packed = pack(src, BlockLayout(4, 4, {{false, 2}, {true, 2}}));
        for (i64 j = 0; j < 4; ++j)
            for (i64 i = 0; i < 4; ++i)
                CHECK(packed.data[static_cast<std::size_t>(blocked_4x4_expected(i, j))] ==
                      static_cast<double>(i * 10 + j));
    }

    SECTION("random 7x5 with margins is bitwise restored") {
        MatrixBuffer src = testutil::random_matrix(rng, Operand::C, 7, 5);
        BlockLayout lay(7, 5, {{false, 2}, {true, 4}, {true, 2}});
        MatrixBuffer packed = pack(src, lay);
        MatrixBuffer back = unpack(packed);
        CHECK(back.data == src.data);
    }
}
