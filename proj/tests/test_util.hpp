#pragma once

#include "mesa/backbone.hpp"
#include "mesa/image.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace mesa::testing {

/// Unique scratch directory removed on destruction.
class TempDir {
  public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("mesa_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& rel = "") const { return (path_ / rel).string(); }

  private:
    std::filesystem::path path_;
};

/// Inscription-like texture: softly varying stone background with rows of
/// dark glyph strokes. Deterministic for a fixed seed.
inline ImageTensor synthetic_texture(int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    const int gh = 9, gw = 9;
    std::vector<double> grid(static_cast<size_t>(gh) * gw);
    for (auto& g : grid) g = 0.62 + 0.26 * uni(rng);

    ImageTensor img(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double fy = static_cast<double>(y) / h * (gh - 1);
            const double fx = static_cast<double>(x) / w * (gw - 1);
            const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
            const double ty = fy - y0, tx = fx - x0;
            const int y1 = std::min(y0 + 1, gh - 1), x1 = std::min(x0 + 1, gw - 1);
            const double base = (1 - ty) * ((1 - tx) * grid[y0 * gw + x0] + tx * grid[y0 * gw + x1]) +
                                ty * ((1 - tx) * grid[y1 * gw + x0] + tx * grid[y1 * gw + x1]);
            img.at(y, x, 0) = clamp01(base + 0.03);
            img.at(y, x, 1) = clamp01(base);
            img.at(y, x, 2) = clamp01(base - 0.04);
        }

    // rows of strokes standing in for letters
    auto stamp = [&](int cy, int cx, int len, int thick, bool vertical, double dark) {
        for (int t = -thick / 2; t <= thick / 2; ++t)
            for (int k = 0; k < len; ++k) {
                const int y = vertical ? cy + k : cy + t;
                const int x = vertical ? cx + t : cx + k;
                if (y < 0 || y >= h || x < 0 || x >= w) continue;
                for (int c = 0; c < 3; ++c) img.at(y, x, c) = dark;
            }
    };
    for (int row = 8; row + 12 < h; row += 16) {
        int x = 3 + static_cast<int>(uni(rng) * 6);
        while (x + 8 < w) {
            if (uni(rng) < 0.85) {
                const double dark = 0.12 + 0.18 * uni(rng);
                const int len = 5 + static_cast<int>(uni(rng) * 6);
                stamp(row, x, len, 2, uni(rng) < 0.6, dark);
                if (uni(rng) < 0.5) stamp(row, x, 4 + static_cast<int>(uni(rng) * 4), 2, false, dark);
            }
            x += 6 + static_cast<int>(uni(rng) * 7);
        }
    }
    // grain
    std::normal_distribution<double> grain(0.0, 0.015);
    for (auto& v : img.data) v = clamp01(v + grain(rng));
    return img;
}

/// One shared random-weights backbone per test binary (construction is the
/// expensive part, the instance is immutable).
inline const Backbone& shared_backbone() {
    static const Backbone net(random_backbone_params(42));
    return net;
}

inline BinaryMask centered_hole(int h, int w, int hole) {
    BinaryMask mask(h, w);
    const int y0 = (h - hole) / 2, x0 = (w - hole) / 2;
    for (int y = y0; y < y0 + hole; ++y)
        for (int x = x0; x < x0 + hole; ++x) mask.at(y, x) = 1;
    return mask;
}

/// Copy of `img` with the masked region filled by mid gray.
inline ImageTensor punch_hole(const ImageTensor& img, const BinaryMask& mask, double fill = 0.5) {
    ImageTensor out = img;
    for (int i = 0; i < mask.height * mask.width; ++i)
        if (mask.data[i])
            for (int c = 0; c < 3; ++c) out.data[static_cast<size_t>(i) * 3 + c] = fill;
    return out;
}

}  // namespace mesa::testing
