#include "mesa/damage.hpp"

#include "mesa/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

namespace mesa {

namespace fs = std::filesystem;

std::string DamageSpec::label() const {
    if (kind == DamageKind::Scratch) return "scratch_s" + std::to_string(seed);
    return std::string(noise.model == NoiseModel::Gaussian ? "gaussian" : "saltpepper") + "_s" +
           std::to_string(seed);
}

nlohmann::json DamageSpec::to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = kind == DamageKind::Scratch ? "scratch" : "noise";
    j["seed"] = seed;
    if (kind == DamageKind::Scratch) {
        j["count"] = scratch.count;
        j["width_min"] = scratch.width_min;
        j["width_max"] = scratch.width_max;
        j["fill"] = scratch.fill;
    } else {
        j["model"] = noise.model == NoiseModel::Gaussian ? "gaussian" : "saltpepper";
        j["sigma"] = noise.sigma;
        j["flip_prob"] = noise.flip_prob;
        j["region"] = {noise.region_x, noise.region_y, noise.region_w, noise.region_h};
    }
    return j;
}

DamageSpec DamageSpec::from_json(const nlohmann::json& j) {
    DamageSpec s;
    s.seed = j.at("seed").get<std::uint64_t>();
    if (j.at("kind").get<std::string>() == "scratch") {
        s.kind = DamageKind::Scratch;
        s.scratch.count = j.at("count").get<int>();
        s.scratch.width_min = j.at("width_min").get<double>();
        s.scratch.width_max = j.at("width_max").get<double>();
        s.scratch.fill = j.at("fill").get<double>();
    } else {
        s.kind = DamageKind::Noise;
        s.noise.model = j.at("model").get<std::string>() == "gaussian" ? NoiseModel::Gaussian
                                                                       : NoiseModel::SaltPepper;
        s.noise.sigma = j.at("sigma").get<double>();
        s.noise.flip_prob = j.at("flip_prob").get<double>();
        const auto& r = j.at("region");
        s.noise.region_x = r.at(0).get<int>();
        s.noise.region_y = r.at(1).get<int>();
        s.noise.region_w = r.at(2).get<int>();
        s.noise.region_h = r.at(3).get<int>();
    }
    return s;
}

namespace {

// Median per channel over the brighter half of pixels: a stone-background
// estimate that ignores dark letter strokes.
std::array<double, 3> background_fill(const ImageTensor& img) {
    std::vector<double> lum(img.pixel_count());
    for (size_t i = 0; i < lum.size(); ++i)
        lum[i] = (img.data[i * 3] + img.data[i * 3 + 1] + img.data[i * 3 + 2]) / 3.0;
    std::vector<double> sorted = lum;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double med = sorted[sorted.size() / 2];

    std::array<std::vector<double>, 3> vals;
    for (size_t i = 0; i < lum.size(); ++i)
        if (lum[i] >= med)
            for (int c = 0; c < 3; ++c) vals[c].push_back(img.data[i * 3 + c]);
    std::array<double, 3> fill{};
    for (int c = 0; c < 3; ++c) {
        auto& v = vals[c];
        std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
        fill[c] = v[v.size() / 2];
    }
    return fill;
}

void stamp_disc(BinaryMask& mask, double cx, double cy, double radius) {
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
    const int x1 = std::min(mask.width - 1, static_cast<int>(std::ceil(cx + radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
    const int y1 = std::min(mask.height - 1, static_cast<int>(std::ceil(cy + radius)));
    const double r2 = radius * radius;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double dx = x - cx, dy = y - cy;
            if (dx * dx + dy * dy <= r2) mask.at(y, x) = 1;
        }
}

void stamp_segment(BinaryMask& mask, double x0, double y0, double x1, double y1, double radius) {
    const double len = std::hypot(x1 - x0, y1 - y0);
    const int steps = std::max(1, static_cast<int>(std::ceil(len / std::max(radius * 0.5, 0.5))));
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        stamp_disc(mask, x0 + t * (x1 - x0), y0 + t * (y1 - y0), radius);
    }
}

}  // namespace

DamagePair apply_damage(const ImageTensor& clean, const DamageSpec& spec) {
    DamagePair out;
    out.mask = BinaryMask(clean.height, clean.width);
    std::mt19937_64 rng(spec.seed);

    if (spec.kind == DamageKind::Scratch) {
        if (spec.scratch.width_max > std::min(clean.height, clean.width))
            throw std::invalid_argument("apply_damage: scratch width exceeds image size");
        if (spec.scratch.width_min <= 0 || spec.scratch.width_max < spec.scratch.width_min)
            throw std::invalid_argument("apply_damage: bad scratch width range");

        std::uniform_real_distribution<double> ux(0.0, clean.width - 1.0);
        std::uniform_real_distribution<double> uy(0.0, clean.height - 1.0);
        std::uniform_real_distribution<double> uw(spec.scratch.width_min, spec.scratch.width_max);
        std::uniform_real_distribution<double> uang(0.0, 2.0 * M_PI);
        std::uniform_real_distribution<double> uturn(-0.8, 0.8);
        std::uniform_real_distribution<double> ulen(0.15, 0.35);
        std::uniform_int_distribution<int> usegs(2, 4);

        for (int s = 0; s < spec.scratch.count; ++s) {
            double x = ux(rng), y = uy(rng);
            double angle = uang(rng);
            const double radius = uw(rng) / 2.0;
            const int segs = usegs(rng);
            for (int k = 0; k < segs; ++k) {
                const double len = ulen(rng) * std::min(clean.height, clean.width);
                const double nx = x + std::cos(angle) * len;
                const double ny = y + std::sin(angle) * len;
                stamp_segment(out.mask, x, y, nx, ny, radius);
                x = nx;
                y = ny;
                angle += uturn(rng);
            }
        }

        std::array<double, 3> fill{};
        if (spec.scratch.fill >= 0.0)
            fill = {spec.scratch.fill, spec.scratch.fill, spec.scratch.fill};
        else
            fill = background_fill(clean);

        out.damaged = clean;
        for (int i = 0; i < clean.height * clean.width; ++i)
            if (out.mask.data[i])
                for (int c = 0; c < 3; ++c) out.damaged.data[static_cast<size_t>(i) * 3 + c] = fill[c];
        return out;
    }

    // noise
    int rx = spec.noise.region_x, ry = spec.noise.region_y;
    int rw = spec.noise.region_w > 0 ? spec.noise.region_w : clean.width;
    int rh = spec.noise.region_h > 0 ? spec.noise.region_h : clean.height;
    rx = std::clamp(rx, 0, clean.width - 1);
    ry = std::clamp(ry, 0, clean.height - 1);
    rw = std::min(rw, clean.width - rx);
    rh = std::min(rh, clean.height - ry);

    out.damaged = clean;
    for (int y = ry; y < ry + rh; ++y)
        for (int x = rx; x < rx + rw; ++x) out.mask.at(y, x) = 1;

    if (spec.noise.model == NoiseModel::Gaussian) {
        if (spec.noise.sigma < 0) throw std::invalid_argument("apply_damage: negative sigma");
        if (spec.noise.sigma > 0) {
            std::normal_distribution<double> gauss(0.0, spec.noise.sigma);
            for (int y = ry; y < ry + rh; ++y)
                for (int x = rx; x < rx + rw; ++x)
                    for (int c = 0; c < 3; ++c) {
                        double& v = out.damaged.at(y, x, c);
                        v = clamp01(v + gauss(rng));
                    }
        }
    } else {
        if (!(spec.noise.flip_prob >= 0.0 && spec.noise.flip_prob <= 1.0))
            throw std::invalid_argument("apply_damage: flip_prob outside [0,1]");
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        for (int y = ry; y < ry + rh; ++y)
            for (int x = rx; x < rx + rw; ++x) {
                if (uni(rng) >= spec.noise.flip_prob) continue;
                const double v = uni(rng) < 0.5 ? 0.0 : 1.0;
                for (int c = 0; c < 3; ++c) out.damaged.at(y, x, c) = v;
            }
    }
    return out;
}

std::string make_pair_manifest(const std::string& input_dir, const std::string& output_dir,
                               const std::vector<DamageSpec>& specs) {
    std::vector<fs::path> inputs;
    for (const auto& e : fs::directory_iterator(input_dir)) {
        const auto ext = e.path().extension().string();
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".PNG") inputs.push_back(e.path());
    }
    std::sort(inputs.begin(), inputs.end());
    if (inputs.empty()) throw std::runtime_error("make_pair_manifest: no images in " + input_dir);

    fs::create_directories(output_dir);
    fs::create_directories(fs::path(output_dir) / "damaged");
    fs::create_directories(fs::path(output_dir) / "masks");

    nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
    for (size_t i = 0; i < inputs.size(); ++i) {
        const ImageTensor clean = load_image(inputs[i].string());
        for (const auto& base_spec : specs) {
            DamageSpec spec = base_spec;
            // per-pair seed so every triple is independently reproducible
            spec.seed = base_spec.seed ^ (0x9E3779B97F4A7C15ull * (i + 1));
            const DamagePair pair = apply_damage(clean, spec);
            const std::string stem = inputs[i].stem().string() + "__" + spec.label();
            const auto damaged_path = fs::path(output_dir) / "damaged" / (stem + ".png");
            const auto mask_path = fs::path(output_dir) / "masks" / (stem + ".png");
            save_image(pair.damaged, damaged_path.string());
            save_mask(pair.mask, mask_path.string());

            nlohmann::ordered_json entry;
            entry["id"] = stem;
            entry["clean"] = fs::absolute(inputs[i]).string();
            entry["damaged"] = fs::absolute(damaged_path).string();
            entry["mask"] = fs::absolute(mask_path).string();
            entry["spec"] = spec.to_json();
            manifest.push_back(std::move(entry));
        }
    }

    const auto manifest_path = fs::path(output_dir) / "manifest.json";
    std::ofstream out(manifest_path);
    if (!out) throw std::runtime_error("make_pair_manifest: cannot write manifest");
    out << manifest.dump(2) << '\n';
    return manifest_path.string();
}

}  // namespace mesa
