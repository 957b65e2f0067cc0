// Builds the B3A2C0 plan with its published blocksizes, prints the loop
// nest, the per-level I/O model, and cross-checks a scaled-down instance
// against the cache simulator.

#include <iostream>

#include "tilemul/tilemul.hpp"

using namespace tilemul;

int main() {
    CacheHierarchy hier({{0, 64, 1, false, true, true},
                         {1, 8192, 1, false, true, true},
                         {2, 32768, 1, false, true, true},
                         {3, 786432, 1, false, true, true}});

    AlgorithmDescriptor d = parse_name("B3A2C0");
    BlocksizeSet bs;
    bs.set(3, Dim::n, 768);
    bs.set(3, Dim::k, 768);
    bs.set(2, Dim::m, 120);
    bs.set(2, Dim::k, 192);
    bs.set(0, Dim::n, 12);
    bs.set(0, Dim::m, 4);

    Shape shape(3072, 3072, 3072);
    LoopNest nest = build_plan(d, bs, hier, shape);

    std::cout << "loop nest for " << format_name(d) << ":\n  ";
    for (const auto& loop : nest.loops) std::cout << to_char(loop.dim) << "/" << loop.blocksize << " -> ";
    std::cout << "kernel\n\n";

    CostReport rep = multilevel_cost(d, bs, hier, shape);
    for (const auto& lt : rep.levels)
        std::cout << "traffic into L" << lt.level << ": " << lt.total_elements() << " elements\n";
    std::cout << "memory-boundary intensity: " << rep.intensity_flops_per_byte() << " flops/byte\n\n";

    // Quarter-scale copy of the same algorithm, small enough to simulate.
    CacheHierarchy small({{0, 16, 1, false, true, true},
                          {1, 512, 1, false, true, true},
                          {2, 2048, 1, false, true, true},
                          {3, 49152, 1, false, true, true}});
    BlocksizeSet sbs;
    sbs.set(3, Dim::n, 192);
    sbs.set(3, Dim::k, 192);
    sbs.set(2, Dim::m, 24);
    sbs.set(2, Dim::k, 48);
    sbs.set(0, Dim::n, 6);
    sbs.set(0, Dim::m, 2);
    Shape ssmall(384, 384, 384);
    LoopNest snest = build_plan(parse_name("B3A2C0"), sbs, small, ssmall);
    SimResult sim = simulate(snest, TraceLayouts::packed(snest), small);
    CostReport smodel = multilevel_cost(snest.descriptor, sbs, small, ssmall);
    ComparisonReport cmp = compare_model(sim, smodel);
    std::cout << "quarter-scale simulator cross-check (model vs simulated transfers):\n";
    for (const auto& c : cmp.levels)
        std::cout << "  L" << c.level << ": model " << c.model_elements << ", sim " << c.sim_elements
                  << ", rel error " << c.rel_error << "\n";
    return 0;
}
