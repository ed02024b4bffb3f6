#pragma once

#include "mesa/backbone.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace mesa {

/// Ordered per-layer weights with the width interval each was derived from.
/// Normalized weights sum to 1.
struct LayerWeighting {
    struct Entry {
        LayerId layer{};
        double interval_lo = 0.0;
        double interval_hi = std::numeric_limits<double>::infinity();
        double raw = 0.0;
        double normalized = 0.0;
    };
    std::vector<Entry> entries;

    static LayerWeighting uniform(const std::vector<LayerId>& layers);

    const Entry* find(LayerId id) const;
    double weight_of(LayerId id) const;  // throws if the layer is absent
    std::vector<LayerId> layers() const;

    /// Throws unless weights are nonnegative and sum to 1 within 1e-9.
    void validate() const;

    nlohmann::json to_json() const;
    static LayerWeighting from_json(const nlohmann::json& j);
};

}  // namespace mesa
