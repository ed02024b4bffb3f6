#include "mesa/image_io.hpp"

#include <opencv2/imgcodecs.hpp>

#include <cmath>
#include <filesystem>

namespace mesa {

ImageTensor load_image(const std::string& path) {
    if (!std::filesystem::exists(path))
        throw std::runtime_error("load_image: file not found: " + path);
    cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (m.empty())
        throw std::runtime_error("load_image: undecodable image: " + path);
    if (m.rows == 0 || m.cols == 0)
        throw std::runtime_error("load_image: zero-dimension image: " + path);
    if (m.depth() != CV_8U)
        throw std::runtime_error("load_image: only 8-bit images are supported: " + path);

    ImageTensor img(m.rows, m.cols);
    const int ch = m.channels();
    for (int y = 0; y < m.rows; ++y) {
        const std::uint8_t* row = m.ptr<std::uint8_t>(y);
        for (int x = 0; x < m.cols; ++x) {
            double r, g, b;
            if (ch == 1) {
                r = g = b = row[x] / 255.0;
            } else {
                // OpenCV decodes BGR(A)
                b = row[x * ch + 0] / 255.0;
                g = row[x * ch + 1] / 255.0;
                r = row[x * ch + 2] / 255.0;
            }
            img.at(y, x, 0) = r;
            img.at(y, x, 1) = g;
            img.at(y, x, 2) = b;
        }
    }
    return img;
}

void save_image(const ImageTensor& img, const std::string& path) {
    cv::Mat m(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y) {
        std::uint8_t* row = m.ptr<std::uint8_t>(y);
        for (int x = 0; x < img.width; ++x) {
            row[x * 3 + 0] = static_cast<std::uint8_t>(std::llround(clamp01(img.at(y, x, 2)) * 255.0));
            row[x * 3 + 1] = static_cast<std::uint8_t>(std::llround(clamp01(img.at(y, x, 1)) * 255.0));
            row[x * 3 + 2] = static_cast<std::uint8_t>(std::llround(clamp01(img.at(y, x, 0)) * 255.0));
        }
    }
    if (!cv::imwrite(path, m))
        throw std::runtime_error("save_image: cannot write " + path);
}

BinaryMask load_mask(const std::string& path, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("load_mask: threshold must be in (0,1)");
    ImageTensor img = load_image(path);
    BinaryMask mask(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double lum = (img.at(y, x, 0) + img.at(y, x, 1) + img.at(y, x, 2)) / 3.0;
            mask.at(y, x) = lum > threshold ? 1 : 0;
        }
    return mask;
}

void save_mask(const BinaryMask& mask, const std::string& path) {
    cv::Mat m(mask.height, mask.width, CV_8UC1);
    for (int y = 0; y < mask.height; ++y) {
        std::uint8_t* row = m.ptr<std::uint8_t>(y);
        for (int x = 0; x < mask.width; ++x) row[x] = mask.at(y, x) ? 255 : 0;
    }
    if (!cv::imwrite(path, m))
        throw std::runtime_error("save_mask: cannot write " + path);
}

}  // namespace mesa
