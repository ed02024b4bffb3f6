#pragma once

#include "mesa/image.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mesa {

enum class DamageKind { Scratch, Noise };
enum class NoiseModel { Gaussian, SaltPepper };

struct DamageSpec {
    DamageKind kind = DamageKind::Scratch;
    std::uint64_t seed = 0;

    struct Scratch {
        int count = 4;
        double width_min = 2.0;   // pixels
        double width_max = 8.0;
        double fill = -1.0;       // gray override in [0,1]; <0 = image background median
    } scratch;

    struct Noise {
        NoiseModel model = NoiseModel::Gaussian;
        double sigma = 0.1;       // gaussian stddev (unit range)
        double flip_prob = 0.05;  // salt-and-pepper per-pixel probability
        // affected region; width/height <= 0 means full frame
        int region_x = 0, region_y = 0, region_w = -1, region_h = -1;
    } noise;

    std::string label() const;
    nlohmann::json to_json() const;
    static DamageSpec from_json(const nlohmann::json& j);
};

struct DamagePair {
    ImageTensor damaged;
    BinaryMask mask;
};

/// Scratch: seeded random polyline strokes stamped at the drawn widths,
/// filled with the image's background intensity; the mask marks exactly the
/// stamped pixels. Noise: additive gaussian (clamped) or salt-and-pepper;
/// the mask covers the whole declared region.
DamagePair apply_damage(const ImageTensor& clean, const DamageSpec& spec);

/// Applies every spec to every clean image in `input_dir`, writes damaged
/// images, masks and a JSON manifest linking the triples. Returns the
/// manifest path. Deterministic for fixed seeds.
std::string make_pair_manifest(const std::string& input_dir, const std::string& output_dir,
                               const std::vector<DamageSpec>& specs);

}  // namespace mesa
