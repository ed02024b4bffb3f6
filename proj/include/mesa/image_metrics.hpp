#pragma once

#include "mesa/image.hpp"

#include <functional>
#include <optional>
#include <string>

namespace mesa {

/// 10*log10(1/MSE) for unit-range images; +inf when the images are identical.
double psnr(const ImageTensor& a, const ImageTensor& b);

/// Mean local SSIM on luminance: 11×11 Gaussian window (sigma 1.5),
/// C1=(0.01)^2, C2=(0.03)^2 on unit range. Requires min side >= 11.
double ssim(const ImageTensor& a, const ImageTensor& b);

/// External perceptual-similarity plug-in; never emulated internally.
using PerceptualScorer = std::function<double(const ImageTensor&, const ImageTensor&)>;

void register_perceptual_scorer(const std::string& name, const std::string& backbone_tag,
                                PerceptualScorer scorer);
void clear_perceptual_scorers();

struct PerceptualResult {
    std::optional<double> value;
    std::string backbone_tag;
    std::string reason;  // "unavailable" when no scorer is registered
};

PerceptualResult perceptual_distance(const ImageTensor& a, const ImageTensor& b,
                                     const std::string& scorer_name);

struct ImagePairScore {
    double psnr = 0.0;  // +inf sentinel when identical
    double ssim = 0.0;
    PerceptualResult perceptual;
};

ImagePairScore score_image_pair(const ImageTensor& ref, const ImageTensor& test,
                                const std::string& perceptual_scorer = "");

}  // namespace mesa
