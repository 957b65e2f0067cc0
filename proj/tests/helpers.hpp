#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "tilemul/tilemul.hpp"

namespace testutil {

using namespace tilemul;

/// Random structurally valid descriptor: levels strictly decreasing and
/// ending at 0, consecutive residents distinct, C in registers.
inline AlgorithmDescriptor random_descriptor(std::mt19937_64& rng, int max_top_level = 3) {
    std::uniform_int_distribution<int> plan_count(1, 3);
    int count = plan_count(rng);
    std::vector<int> levels;
    {
        std::vector<int> pool;
        for (int l = 1; l <= max_top_level; ++l) pool.push_back(l);
        std::shuffle(pool.begin(), pool.end(), rng);
        for (int i = 0; i < count - 1 && i < static_cast<int>(pool.size()); ++i)
            levels.push_back(pool[static_cast<std::size_t>(i)]);
        std::sort(levels.begin(), levels.end(), std::greater<>());
        levels.push_back(0);
    }
    std::vector<std::pair<int, Operand>> residents;
    Operand prev = Operand::C;  // register level will be C
    // choose from innermost out so the register constraint is easy to honor
    std::vector<Operand> chosen(levels.size(), Operand::C);
    for (std::size_t i = levels.size() - 1; i-- > 0;) {
        std::array<Operand, 3> all{Operand::A, Operand::B, Operand::C};
        Operand pick;
        do {
            pick = all[std::uniform_int_distribution<std::size_t>(0, 2)(rng)];
        } while (pick == chosen[i + 1]);
        chosen[i] = pick;
    }
    (void)prev;
    for (std::size_t i = 0; i < levels.size(); ++i)
        residents.emplace_back(levels[i], chosen[i]);
    return make_descriptor(residents);
}

/// Random blocksizes for execution tests: any values >= 1 are numerically
/// valid (margins shrink trailing partitions anywhere).
inline BlocksizeSet random_blocksizes(std::mt19937_64& rng, const AlgorithmDescriptor& d,
                                      const Shape& shape) {
    BlocksizeSet bs;
    for (const auto& p : d.plans) {
        for (Dim dim : {p.outer_dim, p.inner_dim}) {
            i64 extent = shape.extent(dim);
            std::uniform_int_distribution<i64> pick(1, std::max<i64>(1, extent));
            bs.set(p.level, dim, pick(rng));
        }
    }
    return bs;
}

/// Hierarchy large enough that any such blocksize set passes the fit rules.
inline CacheHierarchy roomy_hierarchy(int top_level) {
    std::vector<CacheLevel> levels;
    i64 cap = 1 << 20;
    for (int h = 0; h <= top_level; ++h) {
        levels.push_back({h, cap, 1, false, true, true});
        cap *= 4;
    }
    return CacheHierarchy(std::move(levels));
}

inline MatrixBuffer random_matrix(std::mt19937_64& rng, Operand role, i64 rows, i64 cols) {
    MatrixBuffer b = MatrixBuffer::column_major(role, rows, cols);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& x : b.data) x = dist(rng);
    return b;
}

inline double rel_frobenius_error(const MatrixBuffer& got, const MatrixBuffer& want) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < want.data.size(); ++i) {
        double d = got.data[i] - want.data[i];
        num += d * d;
        den += want.data[i] * want.data[i];
    }
    return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

struct CliResult {
    int exit_code = -1;
    std::string output;  // stdout and stderr interleaved
};

inline CliResult run_cli(const std::string& args) {
    CliResult r;
#ifdef TILEMUL_BIN
    std::string cmd = std::string(TILEMUL_BIN) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    while (std::size_t got = fread(buf, 1, sizeof(buf), pipe)) r.output.append(buf, got);
    int status = pclose(pipe);
    r.exit_code = WEXITSTATUS(status);
#else
    (void)args;
#endif
    return r;
}

}  // namespace testutil
