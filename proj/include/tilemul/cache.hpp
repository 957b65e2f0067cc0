#pragma once

#include <vector>

#include "tilemul/types.hpp"

namespace tilemul {

/// One level of the memory hierarchy. Index 0 is the register file,
/// indices increase toward main memory. Capacity is in elements (doubles),
/// granularity is elements per transfer line. Replacement is LRU.
struct CacheLevel {
    int index = 0;
    i64 capacity_elements = 1;
    i64 granularity = 1;
    bool inclusive = false;
    bool write_allocate = true;
    bool write_back = true;
};

/// Ordered cache levels from registers outward, with an implicit unbounded
/// main memory above the last level. Capacities strictly increase.
class CacheHierarchy {
  public:
    CacheHierarchy() = default;

    explicit CacheHierarchy(std::vector<CacheLevel> levels) : levels_(std::move(levels)) {
        if (levels_.empty()) throw std::invalid_argument("hierarchy needs at least one level");
        for (std::size_t i = 0; i < levels_.size(); ++i) {
            const auto& lv = levels_[i];
            if (lv.index != static_cast<int>(i))
                throw std::invalid_argument("hierarchy level indices must be contiguous from 0");
            if (lv.capacity_elements < 1) throw std::invalid_argument("cache capacity must be >= 1");
            if (lv.granularity < 1) throw std::invalid_argument("cache granularity must be >= 1");
            if (i > 0 && lv.capacity_elements <= levels_[i - 1].capacity_elements)
                throw std::invalid_argument("cache capacities must strictly increase with level");
        }
    }

    int size() const { return static_cast<int>(levels_.size()); }
    bool has_level(int h) const { return h >= 0 && h < size(); }
    const CacheLevel& level(int h) const { return levels_.at(static_cast<std::size_t>(h)); }
    const std::vector<CacheLevel>& levels() const { return levels_; }
    int top_level() const { return size() - 1; }
    i64 capacity(int h) const { return level(h).capacity_elements; }

  private:
    std::vector<CacheLevel> levels_;
};

}  // namespace tilemul
