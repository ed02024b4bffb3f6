#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mesa {

/// Channels-last, row-major H×W×3 image with values in [0,1].
/// The canonical unit of restoration, exemplars and ground truth.
struct ImageTensor {
    int height = 0;
    int width = 0;
    int channels = 3;
    std::vector<double> data;  // size height*width*channels

    ImageTensor() = default;
    ImageTensor(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w * 3, 0.0) {
        if (h <= 0 || w <= 0) throw std::invalid_argument("ImageTensor: non-positive dimensions");
    }

    static ImageTensor constant(int h, int w, double value) {
        ImageTensor img(h, w);
        std::fill(img.data.begin(), img.data.end(), value);
        return img;
    }

    double& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    double at(int y, int x, int c) const { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }

    size_t pixel_count() const { return static_cast<size_t>(height) * width; }

    bool same_shape(const ImageTensor& o) const { return height == o.height && width == o.width; }

    /// Throws if any value is non-finite or outside [0,1].
    void validate() const;
};

/// H×W {0,1} map; 1 marks damaged pixels eligible for change.
struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;  // values 0 or 1

    BinaryMask() = default;
    BinaryMask(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w, 0) {
        if (h <= 0 || w <= 0) throw std::invalid_argument("BinaryMask: non-positive dimensions");
    }

    std::uint8_t& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }

    size_t count_ones() const;
    bool all_zero() const { return count_ones() == 0; }
};

/// Backbone input: per-channel mean-subtracted planes, one column per channel.
/// Row index is y*width+x. preprocess/postprocess are exact inverses.
struct PreprocessedTensor {
    int height = 0;
    int width = 0;
    Eigen::MatrixXd planes;  // (height*width) x 3
};

/// Channel means of the backbone's training data (RGB, unit range).
inline constexpr std::array<double, 3> kChannelMeans = {0.485, 0.456, 0.406};

PreprocessedTensor preprocess(const ImageTensor& img);
ImageTensor postprocess(const PreprocessedTensor& t);

/// mask ⊙ estimate + (1 − mask) ⊙ init, clamped to [0,1].
ImageTensor composite(const ImageTensor& estimate, const ImageTensor& init, const BinaryMask& mask);

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace mesa
