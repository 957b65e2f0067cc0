#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tilemul/blocksizes.hpp"
#include "tilemul/cache.hpp"
#include "tilemul/cachesim.hpp"
#include "tilemul/costmodel.hpp"
#include "tilemul/descriptor.hpp"
#include "tilemul/types.hpp"

namespace tilemul {

using ojson = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_keys(const ojson& obj, std::initializer_list<const char*> allowed,
                         const char* what) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw ConfigError(std::string("unknown field '") + it.key() + "' in " + what);
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Cache hierarchy config
// ---------------------------------------------------------------------------

inline ojson hierarchy_to_json(const CacheHierarchy& hier) {
    ojson levels = ojson::array();
    for (const auto& lv : hier.levels()) {
        levels.push_back({{"index", lv.index},
                          {"capacity_elements", lv.capacity_elements},
                          {"granularity", lv.granularity},
                          {"inclusive", lv.inclusive},
                          {"write_allocate", lv.write_allocate},
                          {"write_back", lv.write_back}});
    }
    return ojson{{"levels", levels}};
}

inline CacheHierarchy hierarchy_from_json(const ojson& j) {
    if (!j.is_object() || !j.contains("levels") || !j["levels"].is_array())
        throw ConfigError("hierarchy config must be an object with a 'levels' array");
    detail::require_keys(j, {"levels"}, "hierarchy config");
    std::vector<CacheLevel> levels;
    for (const auto& e : j["levels"]) {
        detail::require_keys(
            e, {"index", "capacity_elements", "granularity", "inclusive", "write_allocate", "write_back"},
            "hierarchy level");
        if (!e.contains("index") || !e.contains("capacity_elements"))
            throw ConfigError("hierarchy level needs 'index' and 'capacity_elements'");
        CacheLevel lv;
        lv.index = e["index"].get<int>();
        lv.capacity_elements = e["capacity_elements"].get<i64>();
        lv.granularity = e.value("granularity", i64{1});
        lv.inclusive = e.value("inclusive", false);
        lv.write_allocate = e.value("write_allocate", true);
        lv.write_back = e.value("write_back", true);
        levels.push_back(lv);
    }
    try {
        return CacheHierarchy(std::move(levels));
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(ex.what());
    }
}

inline CacheHierarchy load_hierarchy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open hierarchy config: " + path);
    ojson j;
    try {
        in >> j;
    } catch (const std::exception& ex) {
        throw ConfigError("bad JSON in " + path + ": " + ex.what());
    }
    return hierarchy_from_json(j);
}

// ---------------------------------------------------------------------------
// Descriptors and blocksize sets
// ---------------------------------------------------------------------------

inline ojson blocksizes_to_json(const BlocksizeSet& bs) {
    ojson arr = ojson::array();
    for (const auto& [key, value] : bs.entries())
        arr.push_back({{"level", key.level}, {"dim", std::string(1, to_char(key.dim))}, {"value", value}});
    return arr;
}

inline BlocksizeSet blocksizes_from_json(const ojson& j) {
    if (!j.is_array()) throw ConfigError("'blocksizes' must be an array");
    BlocksizeSet bs;
    for (const auto& e : j) {
        detail::require_keys(e, {"level", "dim", "value"}, "blocksize entry");
        bs.set(e.at("level").get<int>(), dim_from_char(e.at("dim").get<std::string>().at(0)),
               e.at("value").get<i64>());
    }
    return bs;
}

inline ojson descriptor_to_json(const AlgorithmDescriptor& d) {
    ojson plans = ojson::array();
    for (const auto& p : d.plans)
        plans.push_back({{"level", p.level},
                         {"resident", std::string(1, to_char(p.resident))},
                         {"outer_dim", std::string(1, to_char(p.outer_dim))},
                         {"inner_dim", std::string(1, to_char(p.inner_dim))}});
    ojson j{{"name", format_name(d)}, {"plans", plans}};
    if (d.allow_non_c_registers) j["allow_non_c_registers"] = true;
    return j;
}

/// Descriptor files carry a name (or explicit plans) and, optionally, a
/// blocksize list.
struct DescriptorFile {
    AlgorithmDescriptor descriptor;
    BlocksizeSet blocksizes;
};

inline DescriptorFile descriptor_from_json(const ojson& j) {
    if (!j.is_object()) throw ConfigError("descriptor config must be an object");
    detail::require_keys(j, {"name", "plans", "allow_non_c_registers", "blocksizes"},
                         "descriptor config");
    DescriptorFile out;
    bool allow = j.value("allow_non_c_registers", false);
    if (j.contains("name")) {
        out.descriptor = parse_name(j["name"].get<std::string>(), allow);
    } else if (j.contains("plans")) {
        std::vector<std::pair<int, Operand>> residents;
        for (const auto& e : j["plans"]) {
            detail::require_keys(e, {"level", "resident", "outer_dim", "inner_dim"}, "plan entry");
            residents.emplace_back(e.at("level").get<int>(),
                                   operand_from_char(e.at("resident").get<std::string>().at(0)));
        }
        out.descriptor = make_descriptor(residents, allow);
    } else {
        throw ConfigError("descriptor config needs 'name' or 'plans'");
    }
    if (j.contains("blocksizes")) out.blocksizes = blocksizes_from_json(j["blocksizes"]);
    return out;
}

inline DescriptorFile load_descriptor(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open descriptor config: " + path);
    ojson j;
    try {
        in >> j;
    } catch (const std::exception& ex) {
        throw ConfigError("bad JSON in " + path + ": " + ex.what());
    }
    return descriptor_from_json(j);
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline ojson cost_report_to_json(const CostReport& r) {
    ojson levels = ojson::array();
    for (const auto& lt : r.levels) {
        ojson ops;
        for (Operand op : all_operands)
            ops[std::string(1, to_char(op))] = {{"reads", lt.of(op).reads},
                                                {"writes", lt.of(op).writes}};
        levels.push_back({{"level", lt.level},
                          {"operands", ops},
                          {"total_elements", lt.total_elements()},
                          {"total_bytes", lt.total_bytes()}});
    }
    return ojson{{"shape", {{"m", r.shape.m}, {"n", r.shape.n}, {"k", r.shape.k}}},
                 {"flops", r.flops},
                 {"boundary_level", r.boundary_level},
                 {"intensity_flops_per_byte", r.intensity_flops_per_byte()},
                 {"levels", levels}};
}

inline std::string cost_report_to_csv(const CostReport& r) {
    std::ostringstream os;
    os << "level,operand,reads,writes\n";
    for (const auto& lt : r.levels)
        for (Operand op : all_operands)
            os << lt.level << ',' << to_char(op) << ',' << lt.of(op).reads << ','
               << lt.of(op).writes << '\n';
    return os.str();
}

inline ojson sim_result_to_json(const SimResult& r) {
    ojson levels = ojson::array();
    for (const auto& s : r.levels)
        levels.push_back({{"level", s.level},
                          {"capacity_lines", s.capacity_lines},
                          {"granularity", s.granularity},
                          {"hits", s.hits},
                          {"misses", s.misses()},
                          {"read_misses", s.read_misses},
                          {"write_misses", s.write_misses},
                          {"writebacks", s.writebacks},
                          {"transferred_elements", s.transferred_elements()}});
    return ojson{{"events", r.events}, {"levels", levels}};
}

inline std::string sim_result_to_csv(const SimResult& r) {
    std::ostringstream os;
    os << "level,hits,misses,writebacks,transferred_elements\n";
    for (const auto& s : r.levels)
        os << s.level << ',' << s.hits << ',' << s.misses() << ',' << s.writebacks << ','
           << s.transferred_elements() << '\n';
    return os.str();
}

inline ojson comparison_to_json(const ComparisonReport& r) {
    ojson levels = ojson::array();
    for (const auto& c : r.levels)
        levels.push_back({{"level", c.level},
                          {"model_elements", c.model_elements},
                          {"sim_elements", c.sim_elements},
                          {"rel_error", c.rel_error}});
    return ojson{{"max_rel_error", r.max_rel_error}, {"levels", levels}};
}

}  // namespace tilemul
