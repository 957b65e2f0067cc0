#pragma once

// Umbrella header for the multilevel cache-blocked MMM toolkit.

#include "tilemul/blocksizes.hpp"
#include "tilemul/cache.hpp"
#include "tilemul/cachesim.hpp"
#include "tilemul/costmodel.hpp"
#include "tilemul/descriptor.hpp"
#include "tilemul/exec.hpp"
#include "tilemul/layout.hpp"
#include "tilemul/plan.hpp"
#include "tilemul/trace.hpp"
#include "tilemul/types.hpp"
