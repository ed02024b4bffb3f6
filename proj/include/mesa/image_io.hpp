#pragma once

#include "mesa/image.hpp"

#include <string>

namespace mesa {

/// Loads an 8-bit PNG or JPEG and scales to [0,1]. Grayscale inputs are
/// replicated to 3 channels. Throws on missing/undecodable files.
ImageTensor load_image(const std::string& path);

/// Saves as 8-bit PNG (values clamped to [0,1] before quantization).
void save_image(const ImageTensor& img, const std::string& path);

/// Thresholded mask load: pixel -> 1 iff mean channel luminance > threshold.
BinaryMask load_mask(const std::string& path, double threshold = 0.5);

void save_mask(const BinaryMask& mask, const std::string& path);

}  // namespace mesa
