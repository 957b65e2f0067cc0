// Acceptance suite: one check per release criterion, one PASS/FAIL line
// each. Exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tilemul/tilemul.hpp"

using namespace tilemul;

namespace {

int failures = 0;

void report(int criterion, const std::string& what, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, what.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

AlgorithmDescriptor random_descriptor(std::mt19937_64& rng, int max_top_level = 3) {
    int count = std::uniform_int_distribution<int>(1, 3)(rng);
    std::vector<int> pool;
    for (int l = 1; l <= max_top_level; ++l) pool.push_back(l);
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<int> levels(pool.begin(), pool.begin() + (count - 1));
    std::sort(levels.begin(), levels.end(), std::greater<>());
    levels.push_back(0);
    std::vector<Operand> chosen(levels.size(), Operand::C);
    for (std::size_t i = levels.size() - 1; i-- > 0;) {
        Operand pick;
        do {
            pick = all_operands[std::uniform_int_distribution<std::size_t>(0, 2)(rng)];
        } while (pick == chosen[i + 1]);
        chosen[i] = pick;
    }
    std::vector<std::pair<int, Operand>> residents;
    for (std::size_t i = 0; i < levels.size(); ++i) residents.emplace_back(levels[i], chosen[i]);
    return make_descriptor(residents);
}

double rel_frobenius(const MatrixBuffer& got, const MatrixBuffer& want) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < want.data.size(); ++i) {
        double d = got.data[i] - want.data[i];
        num += d * d;
        den += want.data[i] * want.data[i];
    }
    return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

// --- criterion 1: execute vs reference over random plans ----------------

void criterion_1() {
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    CacheHierarchy roomy({{0, 1 << 20, 1, false, true, true},
                          {1, 1 << 22, 1, false, true, true},
                          {2, 1 << 24, 1, false, true, true},
                          {3, 1 << 26, 1, false, true, true}});
    double worst = 0;
    int trials = 200;
    for (int t = 0; t < trials; ++t) {
        AlgorithmDescriptor d = random_descriptor(rng);
        std::uniform_int_distribution<i64> ext(1, 96);
        Shape shape(ext(rng), ext(rng), ext(rng));
        BlocksizeSet bs;
        for (const auto& p : d.plans)
            for (Dim dim : {p.outer_dim, p.inner_dim})
                bs.set(p.level, dim,
                       std::uniform_int_distribution<i64>(1, shape.extent(dim))(rng));
        LoopNest nest = build_plan(d, bs, roomy, shape);

        std::uniform_real_distribution<double> val(-1.0, 1.0);
        MatrixBuffer A = MatrixBuffer::column_major(Operand::A, shape.m, shape.k);
        MatrixBuffer B = MatrixBuffer::column_major(Operand::B, shape.k, shape.n);
        MatrixBuffer C = MatrixBuffer::column_major(Operand::C, shape.m, shape.n);
        for (auto& x : A.data) x = val(rng);
        for (auto& x : B.data) x = val(rng);
        for (auto& x : C.data) x = val(rng);
        MatrixBuffer Cref = C;
        execute(nest, A, B, C);
        reference_gemm(A, B, Cref);
        worst = std::max(worst, rel_frobenius(C, Cref));
    }
    double secs = seconds_since(t0);
    std::ostringstream detail;
    detail << trials << " random plans, worst rel error " << worst << ", " << secs << " s";
    report(1, "execute matches reference_gemm within 1e-12", worst <= 1e-12 && secs < 60.0,
           detail.str());
}

// --- criterion 2: two-level oracle equivalence ---------------------------

void criterion_2() {
    // Fundamental Resident C / A / B at the 96-squared scale of the spec,
    // streamed through a single 10240-element cache. The cache does not
    // allocate on write misses, so the model's write column crosses the
    // boundary exactly once, like its read column.
    struct Case {
        const char* name;
        std::string descriptor;
        Shape shape;
        BlocksizeSet bs;
        Operand variant;
        i64 b1, b2;
        i64 reg_capacity;
    };
    std::vector<Case> cases;
    {
        Case c{"Resident C", "C0", Shape(96, 96, 768), {}, Operand::C, 96, 96, 9216};
        c.bs.set(0, Dim::m, 96);
        c.bs.set(0, Dim::n, 96);
        cases.push_back(c);
        Case a{"Resident A", "A1C0", Shape(96, 768, 96), {}, Operand::A, 96, 96, 128};
        a.bs.set(1, Dim::m, 96);
        a.bs.set(1, Dim::k, 96);
        a.bs.set(0, Dim::n, 1);
        a.bs.set(0, Dim::m, 96);
        cases.push_back(a);
        Case b{"Resident B", "B1C0", Shape(768, 96, 96), {}, Operand::B, 96, 96, 128};
        b.bs.set(1, Dim::k, 96);
        b.bs.set(1, Dim::n, 96);
        b.bs.set(0, Dim::m, 1);
        b.bs.set(0, Dim::n, 96);
        cases.push_back(b);
    }
    bool all_pass = true;
    std::ostringstream detail;
    for (const auto& cs : cases) {
        auto t0 = std::chrono::steady_clock::now();
        CacheHierarchy hier({{0, cs.reg_capacity, 1, false, true, true},
                             {1, 10240, 1, false, /*write_allocate=*/false, true}});
        LoopNest nest = build_plan(parse_name(cs.descriptor), cs.bs, hier, cs.shape);
        SimResult sim = simulate(nest, TraceLayouts::column_major(cs.shape), hier);
        LevelTraffic model = resident_cost(cs.variant, cs.shape, cs.b1, cs.b2);
        i64 sim_total = sim.at_level(1).transferred_elements();
        i64 model_total = model.total_elements();
        double rel = std::abs(static_cast<double>(sim_total - model_total)) /
                     static_cast<double>(model_total);
        double secs = seconds_since(t0);
        bool pass = rel <= 0.05 && secs < 30.0;
        all_pass = all_pass && pass;
        detail << cs.name << ": sim " << sim_total << " vs model " << model_total << " (rel "
               << rel << ", " << secs << " s); ";
    }
    report(2, "two-level Resident A/B/C simulated boundary traffic within 5% of resident_cost",
           all_pass, detail.str());
}

// --- criterion 3: published intensity numbers ----------------------------

void criterion_3() {
    double goto_fpe = goto_efficiency(192, 3000);
    double goto_fpb = goto_fpe / 8.0;
    double b768_fpe = streaming_efficiency(Operand::B, 768, 768);
    double b768_fpb = b768_fpe / 8.0;
    bool pass = std::abs(goto_fpe - 186.047) <= 0.01 && std::abs(goto_fpb - 23.26) <= 0.01 &&
                std::abs(b768_fpe - 512.0) <= 0.01 && std::abs(b768_fpb - 64.0) <= 0.01;
    std::ostringstream detail;
    detail << "goto(192,3000) = " << goto_fpe << " fl/el = " << goto_fpb
           << " fl/B; B-768 = " << b768_fpe << " fl/el = " << b768_fpb << " fl/B";
    report(3, "published arithmetic-intensity numbers", pass, detail.str());
}

// --- criterion 4: shape penalty of the wrong resident --------------------

void criterion_4() {
    // Cache of 4096 elements, square block b = 64, long dimension 1024.
    // Read traffic only: the underlying shape analysis ignores writes.
    const i64 M = 4096, b = 64;
    Shape shape(64, 64, 1024);
    Operand right = select_algorithm(shape, M);
    LevelTraffic right_cost = resident_cost(right, shape, b, b);
    LevelTraffic wrong_a = resident_cost(Operand::A, shape, b, b);
    LevelTraffic wrong_b = resident_cost(Operand::B, shape, b, b);
    double ratio_a = static_cast<double>(wrong_a.reads()) / static_cast<double>(right_cost.reads());
    double ratio_b = static_cast<double>(wrong_b.reads()) / static_cast<double>(right_cost.reads());

    // Simulator cross-check of the right choice: one resident block of C in
    // registers, streams pass through the 4096-element cache; every read is
    // compulsory, so simulated read misses equal the model's reads exactly.
    BlocksizeSet bs;
    bs.set(0, Dim::m, 64);
    bs.set(0, Dim::n, 64);
    CacheHierarchy validate_hier({{0, 4096, 1, false, true, true}, {1, 8192, 1, false, true, true}});
    LoopNest nest = build_plan(parse_name("C0"), bs, validate_hier, shape);
    CacheHierarchy sim_hier({{0, 1, 1, false, true, true}, {1, M, 1, false, false, true}});
    SimResult sim = simulate(nest, TraceLayouts::column_major(shape), sim_hier);
    bool sim_ok = sim.at_level(1).read_misses == right_cost.reads();

    bool pass = right == Operand::C && ratio_a >= 1.35 && ratio_a <= 1.65 && ratio_b >= 1.35 &&
                ratio_b <= 1.65 && sim_ok;
    std::ostringstream detail;
    detail << "right=" << to_char(right) << ", wrong/right read traffic: A " << ratio_a << ", B "
           << ratio_b << "; simulated right-case reads " << sim.at_level(1).read_misses << " vs "
           << right_cost.reads();
    report(4, "wrong-resident read traffic is 1.5x (+/-0.15) the right choice", pass, detail.str());
}

// --- criterion 5: Goto gap on a three-level hierarchy --------------------

void criterion_5() {
    // Paper-proportional capacities (1:24 like 256KB:6MB), square shape.
    CacheHierarchy hier({{0, 64, 1, false, true, true},
                         {1, 2048, 1, false, false, true},
                         {2, 49152, 1, false, false, true}});
    Shape shape(816, 816, 816);

    // B-outer three-level descriptor.
    BlocksizeSet bouter;
    bouter.set(2, Dim::n, 204);
    bouter.set(2, Dim::k, 192);
    bouter.set(1, Dim::m, 24);
    bouter.set(1, Dim::k, 48);
    bouter.set(0, Dim::n, 12);
    bouter.set(0, Dim::m, 4);
    LoopNest nest_b = build_plan(parse_name("B2A1C0"), bouter, hier, shape);
    SimResult sim_b = simulate(nest_b, TraceLayouts::packed(nest_b), hier);

    // Goto layout: A resident in the inner cache, the outer cache skipped,
    // its guest panel capped so the panel actually survives under LRU.
    BlocksizeSet goto_bs;
    goto_bs.set(1, Dim::m, 24);
    goto_bs.set(1, Dim::k, 48);
    goto_bs.set(0, Dim::n, 12);
    goto_bs.set(0, Dim::m, 4);
    goto_bs.set(2, Dim::n, 660);
    LoopNest nest_g = build_plan(parse_name("A1C0"), goto_bs, hier, shape);
    SimResult sim_g = simulate(nest_g, TraceLayouts::packed(nest_g), hier);

    double ratio = static_cast<double>(sim_g.at_level(2).misses()) /
                   static_cast<double>(sim_b.at_level(2).misses());
    bool pass = ratio >= 1.7 && ratio <= 2.3;
    std::ostringstream detail;
    detail << "outer-boundary misses: goto " << sim_g.at_level(2).misses() << ", B-outer "
           << sim_b.at_level(2).misses() << ", ratio " << ratio;
    report(5, "skipping the outer cache costs ~2x at the memory boundary", pass, detail.str());
}

// --- criterion 6: lower-bound dominance of simulated traffic -------------

void criterion_6() {
    std::mt19937_64 rng(606);
    CacheHierarchy roomy({{0, 1 << 20, 1, false, true, true},
                          {1, 1 << 22, 1, false, true, true},
                          {2, 1 << 24, 1, false, true, true}});
    int violations = 0;
    int trials = 100;
    for (int t = 0; t < trials; ++t) {
        AlgorithmDescriptor d = random_descriptor(rng, 2);
        std::uniform_int_distribution<i64> ext(2, 24);
        Shape shape(ext(rng), ext(rng), ext(rng));
        BlocksizeSet bs;
        for (const auto& p : d.plans)
            for (Dim dim : {p.outer_dim, p.inner_dim})
                bs.set(p.level, dim,
                       std::uniform_int_distribution<i64>(1, shape.extent(dim))(rng));
        LoopNest nest = build_plan(d, bs, roomy, shape);
        i64 cap = std::uniform_int_distribution<i64>(16, 512)(rng);
        CacheHierarchy sim_hier(
            {{0, 1, 1, false, true, true}, {1, cap, 1, false, true, true}});
        SimResult sim = simulate(nest, TraceLayouts::column_major(shape), sim_hier);
        // the register tile is fast storage alongside the simulated cache
        i64 m_aug = cap + nest.m_r * nest.n_r + nest.m_r + nest.n_r;
        OperandTraffic bound = io_lower_bound(shape, m_aug);
        if (sim.at_level(1).transferred_elements() < bound.total()) ++violations;
    }
    std::ostringstream detail;
    detail << trials << " random configurations, " << violations << " violations";
    report(6, "simulated boundary traffic dominates the I/O lower bound", violations == 0,
           detail.str());
}

// --- criterion 7: roofline regimes through the CLI -----------------------

void criterion_7() {
#ifdef TILEMUL_BIN
    std::string cmd = std::string(TILEMUL_BIN) +
                      " roofline --peak 40e9 --bw 1e9 --point A2C0=23.26 --point B3A2C0=64.0 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    std::string out;
    if (pipe) {
        char buf[4096];
        while (std::size_t got = fread(buf, 1, sizeof(buf), pipe)) out.append(buf, got);
        pclose(pipe);
    }
    bool pass = out.find("A2C0,23.26,") != std::string::npos &&
                out.find(",bandwidth-bound") != std::string::npos &&
                out.find("B3A2C0,64,") != std::string::npos &&
                out.find(",compute-bound") != std::string::npos;
    report(7, "cmd_roofline marks A2C0 bandwidth-bound and the 64-intensity point compute-bound",
           pass, pass ? "regimes as expected" : "unexpected CLI output: " + out);
#else
    report(7, "cmd_roofline regimes", false, "CLI binary path not configured");
#endif
}

// --- criterion 8: structural properties ----------------------------------

void criterion_8() {
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(808);
    bool roundtrip_ok = true;
    for (int i = 0; i < 1000; ++i) {
        AlgorithmDescriptor d = random_descriptor(rng, 8);
        AlgorithmDescriptor back = parse_name(format_name(d), d.allow_non_c_registers);
        roundtrip_ok = roundtrip_ok && back.plans == d.plans;
    }

    bool closure_ok = true;
    int derived = 0;
    for (int i = 0; i < 200 && derived < 40; ++i) {
        AlgorithmDescriptor d = random_descriptor(rng);
        int top = d.plans.front().level;
        std::vector<CacheLevel> levels;
        i64 cap = 64;
        for (int h = 0; h <= top; ++h) {
            levels.push_back({h, cap, 1, std::uniform_int_distribution<int>(0, 1)(rng) == 1, true, true});
            cap *= 1 << std::uniform_int_distribution<int>(2, 4)(rng);
        }
        try {
            CacheHierarchy hier{levels};
            Shape shape(2048, 2048, 2048);
            BlocksizeSet bs = derive_blocksizes(d, hier, shape);
            closure_ok = closure_ok && validate_blocksizes(d, bs, hier, shape).empty();
            ++derived;
        } catch (const InfeasibleError&) {
        }
    }

    bool monotone_ok = true;
    for (int t = 0; t < 50; ++t) {
        std::uniform_int_distribution<i64> addr(0, 149);
        std::vector<TraceEvent> trace;
        int len = std::uniform_int_distribution<int>(200, 800)(rng);
        for (int i = 0; i < len; ++i) trace.push_back({Operand::A, addr(rng), AccessKind::read});
        i64 small_cap = std::uniform_int_distribution<i64>(2, 50)(rng);
        i64 big_cap = small_cap + std::uniform_int_distribution<i64>(1, 80)(rng);
        auto run = [&](i64 cap) {
            CacheHierarchy hier({{0, 1, 1, false, true, true}, {1, cap, 1, false, true, true}});
            LruSimulator sim(hier, Shape(1, 1, 150));
            for (const auto& e : trace) sim.access(e);
            return sim.finish().at_level(1).misses();
        };
        monotone_ok = monotone_ok && run(big_cap) <= run(small_cap);
    }

    double secs = seconds_since(t0);
    bool pass = roundtrip_ok && closure_ok && derived >= 30 && monotone_ok && secs < 30.0;
    std::ostringstream detail;
    detail << "1000 name round-trips " << (roundtrip_ok ? "ok" : "FAILED") << "; " << derived
           << " derivations all validate: " << (closure_ok ? "ok" : "FAILED")
           << "; LRU monotonicity: " << (monotone_ok ? "ok" : "FAILED") << "; " << secs << " s";
    report(8, "name round-trip, derive closure, LRU capacity monotonicity", pass, detail.str());
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    if (failures == 0)
        std::printf("all acceptance criteria passed\n");
    else
        std::printf("%d acceptance criteria FAILED\n", failures);
    return failures;
}
