// Command-line surface of the toolkit: analyze, simulate, run, plan,
// roofline, pareto. Exit codes: 0 success, 1 validation/check failure,
// 2 usage or config error.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tilemul/serialize.hpp"
#include "tilemul/tilemul.hpp"

namespace {

using namespace tilemul;

Shape parse_shape(const std::string& text) {
    i64 v[3] = {0, 0, 0};
    int count = 0;
    std::string cur;
    for (char ch : text + "x") {
        if (ch == 'x' || ch == 'X') {
            if (cur.empty() || count >= 3) throw ConfigError("bad shape '" + text + "', expected MxNxK");
            v[count++] = std::stoll(cur);
            cur.clear();
        } else if (std::isdigit(static_cast<unsigned char>(ch))) {
            cur += ch;
        } else {
            throw ConfigError("bad shape '" + text + "', expected MxNxK");
        }
    }
    if (count == 1) return Shape(v[0], v[0], v[0]);
    if (count != 3) throw ConfigError("bad shape '" + text + "', expected MxNxK");
    return Shape(v[0], v[1], v[2]);
}

struct Common {
    std::string hier_path;
    std::string alg_name;
    std::string descriptor_path;
    std::string shape_text = "1024";
    std::vector<std::string> bs_overrides;
    double slack = 1.0 / 16.0;
    double beta_a = 1.0, beta_b = 1.0, beta_c = 1.0;
    i64 mr = 4, nr = 12;
    std::string format = "human";
    std::string out_path;

    void add_algorithm_flags(CLI::App* cmd) {
        cmd->add_option("--alg", alg_name, "algorithm name, e.g. B3A2C0");
        cmd->add_option("--descriptor", descriptor_path, "descriptor JSON file");
        cmd->add_option("--bs", bs_overrides,
                        "blocksize override level:dim=value, e.g. --bs 3:n=768 (repeatable)");
        cmd->add_option("--slack", slack, "capacity fraction reserved for streamed fringes");
        cmd->add_option("--beta-a", beta_a, "access cost weight of A");
        cmd->add_option("--beta-b", beta_b, "access cost weight of B");
        cmd->add_option("--beta-c", beta_c, "access cost weight of C");
        cmd->add_option("--mr", mr, "micro-kernel tile rows");
        cmd->add_option("--nr", nr, "micro-kernel tile columns");
    }

    void add_io_flags(CLI::App* cmd, bool need_hier = true) {
        auto* h = cmd->add_option("--hier", hier_path, "cache hierarchy JSON file");
        if (need_hier) h->required();
        cmd->add_option("--shape", shape_text, "problem shape MxNxK (single integer = square)");
        cmd->add_option("--format", format, "output format: json, csv or human")
            ->check(CLI::IsMember({"json", "csv", "human"}));
        cmd->add_option("--out", out_path, "write output to a file instead of stdout");
    }
};

void emit(const Common& c, const std::string& text) {
    if (c.out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(c.out_path);
    if (!out) throw ConfigError("cannot write to " + c.out_path);
    out << text;
}

BlocksizeSet parse_bs_overrides(const std::vector<std::string>& items) {
    BlocksizeSet bs;
    for (const auto& s : items) {
        auto colon = s.find(':');
        auto eq = s.find('=');
        if (colon == std::string::npos || eq == std::string::npos || eq < colon)
            throw ConfigError("bad --bs '" + s + "', expected level:dim=value");
        int level = std::stoi(s.substr(0, colon));
        std::string dim = s.substr(colon + 1, eq - colon - 1);
        if (dim.size() != 1) throw ConfigError("bad --bs dimension in '" + s + "'");
        bs.set(level, dim_from_char(dim[0]), std::stoll(s.substr(eq + 1)));
    }
    return bs;
}

struct Resolved {
    CacheHierarchy hier;
    AlgorithmDescriptor descriptor;
    BlocksizeSet blocksizes;
    Shape shape{1, 1, 1};
    AccessCosts costs;
};

Resolved resolve(const Common& c) {
    Resolved r;
    r.hier = load_hierarchy(c.hier_path);
    r.shape = parse_shape(c.shape_text);
    r.costs = AccessCosts{c.beta_a, c.beta_b, c.beta_c};

    BlocksizeSet pinned;
    if (!c.alg_name.empty() && !c.descriptor_path.empty())
        throw ConfigError("pass exactly one of --alg and --descriptor");
    if (!c.alg_name.empty()) {
        r.descriptor = parse_name(c.alg_name);
    } else if (!c.descriptor_path.empty()) {
        DescriptorFile f = load_descriptor(c.descriptor_path);
        r.descriptor = f.descriptor;
        pinned = f.blocksizes;
    } else {
        throw ConfigError("pass --alg or --descriptor");
    }
    for (const auto& [key, value] : parse_bs_overrides(c.bs_overrides).entries())
        pinned.set(key.level, key.dim, value);

    DeriveOptions opts;
    opts.slack = c.slack;
    opts.micro = MicroTile{c.mr, c.nr};
    r.blocksizes = derive_blocksizes(r.descriptor, r.hier, r.shape, r.costs, opts, pinned);
    return r;
}

std::string human_cost_report(const Resolved& r, const CostReport& rep) {
    std::ostringstream os;
    os << "algorithm " << format_name(r.descriptor) << " on shape " << rep.shape.m << "x"
       << rep.shape.n << "x" << rep.shape.k << " (" << rep.flops << " flops)\n";
    os << "blocksizes:";
    for (const auto& [key, value] : r.blocksizes.entries())
        os << "  L" << key.level << "." << to_char(key.dim) << "=" << value;
    os << "\n\nlevel  operand      reads         writes\n";
    for (const auto& lt : rep.levels) {
        for (Operand op : all_operands)
            os << "  " << lt.level << "      " << to_char(op) << "      " << lt.of(op).reads
               << "      " << lt.of(op).writes << "\n";
        os << "  L" << lt.level << " total elements: " << lt.total_elements() << " ("
           << lt.total_bytes() << " bytes)\n";
    }
    Efficiency eff = efficiency(rep);
    os << "\nmemory boundary: level " << rep.boundary_level << "\n";
    os << "efficiency: " << eff.flops_per_element << " flops/element\n";
    os << "arithmetic intensity: " << eff.flops_per_byte << " flops/byte\n";
    return os.str();
}

int cmd_analyze(const Common& c) {
    Resolved r = resolve(c);
    CostReport rep = multilevel_cost(r.descriptor, r.blocksizes, r.hier, r.shape);
    if (c.format == "json") {
        ojson j = cost_report_to_json(rep);
        j["algorithm"] = format_name(r.descriptor);
        j["blocksizes"] = blocksizes_to_json(r.blocksizes);
        emit(c, j.dump(2) + "\n");
    } else if (c.format == "csv") {
        emit(c, cost_report_to_csv(rep));
    } else {
        emit(c, human_cost_report(r, rep));
    }
    return 0;
}

int cmd_simulate(const Common& c, const std::string& trace_dump, bool include_registers,
                 bool colmajor_trace, i64 max_events) {
    Resolved r = resolve(c);
    LoopNest nest = build_plan(r.descriptor, r.blocksizes, r.hier, r.shape);
    TraceLayouts lay =
        colmajor_trace ? TraceLayouts::column_major(r.shape) : TraceLayouts::packed(nest);
    i64 events = trace_event_count(nest);
    if (events > max_events)
        throw ConfigError("trace of " + std::to_string(events) +
                          " events exceeds --max-events; use a smaller shape");
    if (!trace_dump.empty()) {
        std::ofstream out(trace_dump);
        if (!out) throw ConfigError("cannot write trace to " + trace_dump);
        generate_trace(nest, lay, [&](const TraceEvent& e) { write_trace_event(out, e); });
    }
    SimOptions opts;
    opts.include_registers = include_registers;
    SimResult sim = simulate(nest, lay, r.hier, opts);
    CostReport rep = multilevel_cost(r.descriptor, r.blocksizes, r.hier, r.shape);
    ComparisonReport cmp = compare_model(sim, rep);

    if (c.format == "json") {
        ojson j;
        j["algorithm"] = format_name(r.descriptor);
        j["simulation"] = sim_result_to_json(sim);
        j["model"] = cost_report_to_json(rep);
        j["comparison"] = comparison_to_json(cmp);
        emit(c, j.dump(2) + "\n");
    } else if (c.format == "csv") {
        std::ostringstream os;
        os << "level,hits,misses,writebacks,sim_elements,model_elements,rel_error\n";
        for (const auto& lc : cmp.levels) {
            const auto& s = sim.at_level(lc.level);
            os << lc.level << ',' << s.hits << ',' << s.misses() << ',' << s.writebacks << ','
               << lc.sim_elements << ',' << lc.model_elements << ',' << lc.rel_error << '\n';
        }
        emit(c, os.str());
    } else {
        std::ostringstream os;
        os << "algorithm " << format_name(r.descriptor) << ", " << sim.events << " trace events\n";
        os << "level   hits        misses      writebacks  sim elems     model elems   rel error\n";
        for (const auto& lc : cmp.levels) {
            const auto& s = sim.at_level(lc.level);
            os << "  " << lc.level << "   " << s.hits << "   " << s.misses() << "   " << s.writebacks
               << "   " << lc.sim_elements << "   " << lc.model_elements << "   " << lc.rel_error
               << "\n";
        }
        emit(c, os.str());
    }
    return 0;
}

int cmd_run(const Common& c, int workers, int parallel_loop, unsigned long long seed, i64 verify_max,
            bool colmajor) {
    Resolved r = resolve(c);
    LoopNest nest = build_plan(r.descriptor, r.blocksizes, r.hier, r.shape);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    MatrixBuffer A = MatrixBuffer::column_major(Operand::A, r.shape.m, r.shape.k);
    MatrixBuffer B = MatrixBuffer::column_major(Operand::B, r.shape.k, r.shape.n);
    MatrixBuffer C = MatrixBuffer::column_major(Operand::C, r.shape.m, r.shape.n);
    for (auto& x : A.data) x = dist(rng);
    for (auto& x : B.data) x = dist(rng);

    ExecOptions opts;
    opts.workers = workers;
    opts.parallel_loop = parallel_loop;

    double elapsed = 0;
    MatrixBuffer Cout = MatrixBuffer::column_major(Operand::C, r.shape.m, r.shape.n);
    if (colmajor) {
        auto t0 = std::chrono::steady_clock::now();
        execute(nest, A, B, C, opts);
        elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        Cout = C;
    } else {
        MatrixBuffer Ap = pack(A, nest);
        MatrixBuffer Bp = pack(B, nest);
        MatrixBuffer Cp = pack(C, nest);
        auto t0 = std::chrono::steady_clock::now();
        execute(nest, Ap, Bp, Cp, opts);
        elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        Cout = unpack(Cp);
    }

    bool verified = r.shape.m * r.shape.n * r.shape.k <= verify_max;
    double rel_error = 0;
    if (verified) {
        MatrixBuffer Cref = MatrixBuffer::column_major(Operand::C, r.shape.m, r.shape.n);
        reference_gemm(A, B, Cref);
        double num = 0, den = 0;
        for (std::size_t i = 0; i < Cref.data.size(); ++i) {
            double d = Cout.data[i] - Cref.data[i];
            num += d * d;
            den += Cref.data[i] * Cref.data[i];
        }
        rel_error = den > 0 ? std::sqrt(num / den) : std::sqrt(num);
    }
    double gflops = elapsed > 0 ? static_cast<double>(r.shape.flops()) / elapsed / 1e9 : 0.0;

    if (c.format == "json") {
        ojson j;
        j["algorithm"] = format_name(r.descriptor);
        j["shape"] = {{"m", r.shape.m}, {"n", r.shape.n}, {"k", r.shape.k}};
        j["workers"] = workers;
        j["verified"] = verified;
        j["rel_frobenius_error"] = verified ? ojson(rel_error) : ojson(nullptr);
        j["timing"] = {{"elapsed_s", elapsed}, {"gflops", gflops}};
        emit(c, j.dump(2) + "\n");
    } else {
        std::ostringstream os;
        os << "algorithm " << format_name(r.descriptor) << ", workers " << workers << "\n";
        os << "elapsed: " << elapsed << " s (" << gflops << " GFLOP/s)\n";
        if (verified)
            os << "max relative error vs reference: " << rel_error << "\n";
        else
            os << "reference check skipped (shape above --verify-max)\n";
        emit(c, os.str());
    }
    if (verified && rel_error > 1e-12) {
        std::cerr << "correctness check failed: relative error " << rel_error << "\n";
        return 1;
    }
    return 0;
}

int cmd_plan(const Common& c) {
    CacheHierarchy hier = load_hierarchy(c.hier_path);
    Shape shape = parse_shape(c.shape_text);
    AccessCosts costs{c.beta_a, c.beta_b, c.beta_c};

    int top = hier.top_level();
    if (top < 1) throw ConfigError("hierarchy needs at least one cache level above registers");
    Operand outer = select_algorithm(shape, hier.capacity(top));
    // The middle resident follows the reference layouts: A under B or C,
    // B under A, always over a C register tile. With a single cache level a
    // C recommendation falls back to A, since C already sits in registers.
    std::vector<std::pair<int, Operand>> residents;
    if (top >= 3) {
        Operand mid = outer == Operand::A ? Operand::B : Operand::A;
        residents = {{top, outer}, {2, mid}, {0, Operand::C}};
    } else if (top == 2) {
        if (outer == Operand::C)
            residents = {{2, Operand::C}, {1, Operand::A}, {0, Operand::C}};
        else
            residents = {{2, outer}, {0, Operand::C}};
    } else {
        residents = {{1, outer == Operand::C ? Operand::A : outer}, {0, Operand::C}};
    }
    AlgorithmDescriptor d = make_descriptor(residents);
    DeriveOptions opts;
    opts.slack = c.slack;
    opts.micro = MicroTile{c.mr, c.nr};
    BlocksizeSet bs =
        derive_blocksizes(d, hier, shape, costs, opts, parse_bs_overrides(c.bs_overrides));

    if (c.format == "json") {
        ojson j;
        j["recommended"] = format_name(d);
        j["outermost_resident"] = std::string(1, to_char(outer));
        j["descriptor"] = descriptor_to_json(d);
        j["blocksizes"] = blocksizes_to_json(bs);
        emit(c, j.dump(2) + "\n");
    } else {
        std::ostringstream os;
        os << "recommended algorithm: " << format_name(d) << "\n";
        os << "blocksizes:";
        for (const auto& [key, value] : bs.entries())
            os << "  L" << key.level << "." << to_char(key.dim) << "=" << value;
        os << "\n";
        emit(c, os.str());
    }
    return 0;
}

int cmd_roofline(const Common& c, double peak, double bandwidth,
                 const std::vector<std::string>& points) {
    RooflineParams params{peak, bandwidth};
    std::ostringstream os;
    os << "name,intensity_flops_per_byte,bound_flops_per_s,regime\n";
    ojson rows = ojson::array();
    for (const auto& p : points) {
        auto eq = p.find('=');
        if (eq == std::string::npos) throw ConfigError("bad --point '" + p + "', expected name=intensity");
        std::string name = p.substr(0, eq);
        double intensity = std::stod(p.substr(eq + 1));
        double bound = roofline_bound(intensity, params);
        std::string regime = intensity * bandwidth >= peak ? "compute-bound" : "bandwidth-bound";
        os << name << ',' << intensity << ',' << bound << ',' << regime << '\n';
        rows.push_back({{"name", name},
                        {"intensity_flops_per_byte", intensity},
                        {"bound_flops_per_s", bound},
                        {"regime", regime}});
    }
    double breakpoint = peak / bandwidth;
    os << "_breakpoint," << breakpoint << ',' << peak << ",breakpoint\n";

    if (c.format == "json") {
        ojson j;
        j["peak_flops_per_s"] = peak;
        j["bandwidth_bytes_per_s"] = bandwidth;
        j["breakpoint_intensity"] = breakpoint;
        j["points"] = rows;
        emit(c, j.dump(2) + "\n");
    } else {
        emit(c, os.str());
    }
    return 0;
}

int cmd_pareto(const Common& c, i64 cache, const std::string& ratios_text) {
    Shape shape = parse_shape(c.shape_text);
    std::vector<double> ratios;
    std::string cur;
    for (char ch : ratios_text + ",") {
        if (ch == ',') {
            if (!cur.empty()) ratios.push_back(std::stod(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (ratios.empty()) throw ConfigError("--ratios needs at least one value");
    DeriveOptions opts;
    opts.slack = c.slack;
    opts.micro = MicroTile{c.mr, c.nr};
    auto points = pareto_sweep(cache, ratios, shape, opts);

    if (c.format == "json") {
        ojson rows = ojson::array();
        for (const auto& pt : points)
            rows.push_back({{"ratio", pt.ratio},
                            {"inner_capacity", pt.inner_capacity},
                            {"outer_block_k", pt.outer_block_k},
                            {"outer_block_n", pt.outer_block_n},
                            {"inner_block_m", pt.inner_block_m},
                            {"inner_block_k", pt.inner_block_k},
                            {"eff_outer_flops_per_element", pt.eff_outer_flops_per_element},
                            {"eff_inner_flops_per_element", pt.eff_inner_flops_per_element}});
        emit(c, ojson{{"outer_capacity", cache}, {"points", rows}}.dump(2) + "\n");
    } else {
        std::ostringstream os;
        os << "ratio,inner_capacity,outer_block_k,outer_block_n,inner_block_m,inner_block_k,"
              "eff_outer_flops_per_element,eff_inner_flops_per_element\n";
        for (const auto& pt : points)
            os << pt.ratio << ',' << pt.inner_capacity << ',' << pt.outer_block_k << ','
               << pt.outer_block_n << ',' << pt.inner_block_m << ',' << pt.inner_block_k << ','
               << pt.eff_outer_flops_per_element << ',' << pt.eff_inner_flops_per_element << '\n';
        emit(c, os.str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multilevel cache-blocked matrix multiplication toolkit"};
    app.require_subcommand(1);

    Common c;

    auto* analyze = app.add_subcommand("analyze", "closed-form per-level I/O and intensity");
    c.add_io_flags(analyze);
    c.add_algorithm_flags(analyze);

    std::string trace_dump;
    bool include_registers = false, colmajor_trace = false;
    i64 max_events = i64{4} * 1000 * 1000 * 1000;
    auto* simulate = app.add_subcommand("simulate", "trace-driven cache simulation vs the model");
    c.add_io_flags(simulate);
    c.add_algorithm_flags(simulate);
    simulate->add_option("--trace-dump", trace_dump, "write the plain-text trace to a file");
    simulate->add_flag("--include-registers", include_registers, "simulate level 0 too");
    simulate->add_flag("--colmajor-trace", colmajor_trace,
                       "address the trace in column-major instead of prepacked layout");
    simulate->add_option("--max-events", max_events, "refuse traces longer than this");

    int workers = 1, parallel_loop = -1;
    unsigned long long seed = 12345;
    i64 verify_max = i64{1} << 27;
    bool colmajor_run = false;
    auto* run = app.add_subcommand("run", "execute the plan numerically and check correctness");
    c.add_io_flags(run);
    c.add_algorithm_flags(run);
    run->add_option("--workers", workers, "worker threads for the parallel loop");
    run->add_option("--parallel-loop", parallel_loop, "nest loop index to parallelize");
    run->add_option("--seed", seed, "seed for the random operands");
    run->add_option("--verify-max", verify_max, "skip the reference check above this m*n*k");
    run->add_flag("--colmajor", colmajor_run, "run on column-major buffers instead of prepacked");

    auto* plan = app.add_subcommand("plan", "recommend a descriptor and derive blocksizes");
    c.add_io_flags(plan);
    plan->add_option("--bs", c.bs_overrides, "blocksize override level:dim=value (repeatable)");
    plan->add_option("--slack", c.slack, "capacity fraction reserved for streamed fringes");
    plan->add_option("--mr", c.mr, "micro-kernel tile rows");
    plan->add_option("--nr", c.nr, "micro-kernel tile columns");
    plan->add_option("--beta-a", c.beta_a, "access cost weight of A");
    plan->add_option("--beta-b", c.beta_b, "access cost weight of B");
    plan->add_option("--beta-c", c.beta_c, "access cost weight of C");

    double peak = 0, bandwidth = 0;
    std::vector<std::string> points;
    auto* roofline = app.add_subcommand("roofline", "roofline bounds for (name, intensity) points");
    roofline->add_option("--peak", peak, "peak flops per second")->required();
    roofline->add_option("--bw", bandwidth, "memory bandwidth in bytes per second")->required();
    roofline->add_option("--point", points, "name=intensity_flops_per_byte (repeatable)");
    roofline->add_option("--format", c.format, "output format: json, csv or human")
        ->check(CLI::IsMember({"json", "csv", "human"}));
    roofline->add_option("--out", c.out_path, "write output to a file instead of stdout");

    i64 pareto_cache = 0;
    std::string ratios_text;
    auto* pareto = app.add_subcommand("pareto", "sweep a cache-pair capacity ratio");
    pareto->add_option("--cache", pareto_cache, "outer cache capacity in elements")->required();
    pareto->add_option("--ratios", ratios_text, "comma list of capacity ratios > 1")->required();
    pareto->add_option("--shape", c.shape_text, "problem shape MxNxK");
    pareto->add_option("--slack", c.slack, "capacity fraction reserved for streamed fringes");
    pareto->add_option("--mr", c.mr, "micro-kernel tile rows");
    pareto->add_option("--nr", c.nr, "micro-kernel tile columns");
    pareto->add_option("--format", c.format, "output format: json, csv or human")
        ->check(CLI::IsMember({"json", "csv", "human"}));
    pareto->add_option("--out", c.out_path, "write output to a file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(analyze)) return cmd_analyze(c);
        if (app.got_subcommand(simulate))
            return cmd_simulate(c, trace_dump, include_registers, colmajor_trace, max_events);
        if (app.got_subcommand(run))
            return cmd_run(c, workers, parallel_loop, seed, verify_max, colmajor_run);
        if (app.got_subcommand(plan)) return cmd_plan(c);
        if (app.got_subcommand(roofline)) return cmd_roofline(c, peak, bandwidth, points);
        if (app.got_subcommand(pareto)) return cmd_pareto(c, pareto_cache, ratios_text);
    } catch (const ValidationFailure& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "invalid descriptor: " << e.what() << "\n";
        return 1;
    } catch (const InfeasibleError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    return 2;
}
