#pragma once

#include "json.hpp"

namespace dma {

// Bumped whenever a module changes its numerical output.
inline nlohmann::json module_versions() {
    return {{"geometry", "1.0.0"},      {"problem", "1.0.0"},  {"canonical", "1.0.0"},
            {"linear_solver", "1.0.0"}, {"smoothing", "1.0.0"}, {"iteration", "1.1.0"},
            {"embedding", "1.0.0"},     {"cli", "1.0.0"}};
}

}  // namespace dma
