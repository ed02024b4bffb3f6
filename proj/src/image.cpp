#include "mesa/image.hpp"

#include <cmath>

namespace mesa {

void ImageTensor::validate() const {
    if (height <= 0 || width <= 0 || channels != 3)
        throw std::invalid_argument("ImageTensor: invalid shape");
    if (data.size() != pixel_count() * 3)
        throw std::invalid_argument("ImageTensor: data size does not match shape");
    for (double v : data) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw std::invalid_argument("ImageTensor: value outside [0,1]");
    }
}

size_t BinaryMask::count_ones() const {
    size_t n = 0;
    for (std::uint8_t v : data) n += (v != 0);
    return n;
}

PreprocessedTensor preprocess(const ImageTensor& img) {
    PreprocessedTensor t;
    t.height = img.height;
    t.width = img.width;
    t.planes.resize(img.pixel_count(), 3);
    const size_t n = img.pixel_count();
    for (int c = 0; c < 3; ++c) {
        double* dst = t.planes.col(c).data();
        const double mean = kChannelMeans[c];
        for (size_t i = 0; i < n; ++i) dst[i] = img.data[i * 3 + c] - mean;
    }
    return t;
}

ImageTensor postprocess(const PreprocessedTensor& t) {
    ImageTensor img(t.height, t.width);
    const size_t n = img.pixel_count();
    for (int c = 0; c < 3; ++c) {
        const double* src = t.planes.col(c).data();
        const double mean = kChannelMeans[c];
        for (size_t i = 0; i < n; ++i) img.data[i * 3 + c] = src[i] + mean;
    }
    return img;
}

ImageTensor composite(const ImageTensor& estimate, const ImageTensor& init, const BinaryMask& mask) {
    if (!estimate.same_shape(init) || estimate.height != mask.height || estimate.width != mask.width)
        throw std::invalid_argument("composite: dimension mismatch");
    ImageTensor out(estimate.height, estimate.width);
    const size_t n = out.pixel_count();
    for (size_t i = 0; i < n; ++i) {
        const double* src = mask.data[i] ? &estimate.data[i * 3] : &init.data[i * 3];
        out.data[i * 3 + 0] = clamp01(src[0]);
        out.data[i * 3 + 1] = clamp01(src[1]);
        out.data[i * 3 + 2] = clamp01(src[2]);
    }
    return out;
}

}  // namespace mesa
