#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mesa/image_metrics.hpp"

#include "test_util.hpp"

#include <cmath>
#include <random>

using namespace mesa;
using mesa::testing::synthetic_texture;

namespace {

ImageTensor random_image(int h, int w, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(lo, hi);
    ImageTensor img(h, w);
    for (auto& v : img.data) v = uni(rng);
    return img;
}

// Direct 11×11 sliding-window SSIM on luminance, same constants.
double ssim_oracle(const ImageTensor& a, const ImageTensor& b) {
    const int win = 11;
    const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
    const int h = a.height, w = a.width;
    std::vector<double> ya(h * w), yb(h * w), k(win);
    for (int i = 0; i < h * w; ++i) {
        ya[i] = 0.299 * a.data[i * 3] + 0.587 * a.data[i * 3 + 1] + 0.114 * a.data[i * 3 + 2];
        yb[i] = 0.299 * b.data[i * 3] + 0.587 * b.data[i * 3 + 1] + 0.114 * b.data[i * 3 + 2];
    }
    double ksum = 0.0;
    for (int i = 0; i < win; ++i) {
        const double d = i - win / 2;
        k[i] = std::exp(-d * d / (2 * sigma * sigma));
        ksum += k[i];
    }
    for (auto& v : k) v /= ksum;

    double total = 0.0;
    int count = 0;
    for (int y = 0; y + win <= h; ++y)
        for (int x = 0; x + win <= w; ++x) {
            double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    const double wgt = k[i] * k[j];
                    const double va = ya[(y + i) * w + x + j], vb = yb[(y + i) * w + x + j];
                    ma += wgt * va;
                    mb += wgt * vb;
                    saa += wgt * va * va;
                    sbb += wgt * vb * vb;
                    sab += wgt * va * vb;
                }
            const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return total / count;
}

}  // namespace

TEST_CASE("psnr closed forms") {
    const ImageTensor x = random_image(16, 16, 1, 0.0, 0.9);
    CHECK(std::isinf(psnr(x, x)));

    ImageTensor y = x;
    for (auto& v : y.data) v += 0.1;
    CHECK(psnr(x, y) == doctest::Approx(20.0).epsilon(1e-9));

    const ImageTensor zero = ImageTensor::constant(8, 8, 0.0);
    const ImageTensor one = ImageTensor::constant(8, 8, 1.0);
    CHECK(psnr(zero, one) == doctest::Approx(0.0).epsilon(1e-12));

    CHECK_THROWS_AS(psnr(x, ImageTensor::constant(8, 9, 0.1)), std::invalid_argument);
}

TEST_CASE("psnr symmetry and noise monotonicity") {
    const ImageTensor x = synthetic_texture(32, 32, 5);
    const ImageTensor y = random_image(32, 32, 6);
    CHECK(psnr(x, y) == doctest::Approx(psnr(y, x)).epsilon(1e-12));

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    double prev = std::numeric_limits<double>::infinity();
    for (const double amp : {0.05, 0.1, 0.2}) {
        ImageTensor noisy = x;
        std::mt19937_64 r2(99);  // same noise pattern, scaled
        for (auto& v : noisy.data) v = clamp01(v + amp * uni(r2));
        const double p = psnr(x, noisy);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("ssim identity is exact") {
    const ImageTensor x = synthetic_texture(24, 31, 9);
    CHECK(ssim(x, x) == 1.0);
}

TEST_CASE("ssim anticorrelation goes negative") {
    const ImageTensor x = random_image(32, 32, 11, 0.2, 0.8);
    ImageTensor inv = x;
    for (auto& v : inv.data) v = 1.0 - v;
    CHECK(ssim(x, inv) < 0.0);
}

TEST_CASE("ssim matches the sliding-window oracle") {
    for (std::uint64_t seed : {21, 22, 23}) {
        const ImageTensor a = random_image(32, 32, seed);
        const ImageTensor b = random_image(32, 32, seed + 100);
        CHECK(ssim(a, b) == doctest::Approx(ssim_oracle(a, b)).epsilon(1e-6));
    }
    const ImageTensor a = synthetic_texture(32, 32, 31);
    ImageTensor b = a;
    std::mt19937_64 rng(32);
    std::normal_distribution<double> n(0.0, 0.05);
    for (auto& v : b.data) v = clamp01(v + n(rng));
    CHECK(ssim(a, b) == doctest::Approx(ssim_oracle(a, b)).epsilon(1e-6));
}

TEST_CASE("ssim bounds and errors") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const double v = ssim(random_image(16, 16, s * 2), random_image(16, 16, s * 2 + 1));
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    CHECK_THROWS_AS(ssim(ImageTensor::constant(8, 8, 0.5), ImageTensor::constant(8, 8, 0.5)),
                    std::invalid_argument);  // smaller than the window
    CHECK_THROWS_AS(ssim(ImageTensor::constant(16, 16, 0.5), ImageTensor::constant(16, 15, 0.5)),
                    std::invalid_argument);
}

TEST_CASE("perceptual hook contract") {
    clear_perceptual_scorers();
    const ImageTensor a = ImageTensor::constant(12, 12, 0.3);
    const ImageTensor b = ImageTensor::constant(12, 12, 0.6);

    const PerceptualResult none = perceptual_distance(a, b, "lpips");
    CHECK_FALSE(none.value.has_value());
    CHECK(none.reason == "unavailable");

    register_perceptual_scorer("identity", "test-identity",
                               [](const ImageTensor& x, const ImageTensor& y) {
                                   double s = 0.0;
                                   for (size_t i = 0; i < x.data.size(); ++i)
                                       s += std::abs(x.data[i] - y.data[i]);
                                   return s == 0.0 ? 0.0 : 1.0;
                               });
    CHECK(perceptual_distance(a, a, "identity").value == 0.0);

    register_perceptual_scorer("echo", "test-echo",
                               [](const ImageTensor&, const ImageTensor&) { return 0.5; });
    const PerceptualResult echo = perceptual_distance(a, b, "echo");
    CHECK(echo.value == 0.5);
    CHECK(echo.backbone_tag == "test-echo");

    const ImagePairScore score = score_image_pair(synthetic_texture(16, 16, 1),
                                                  synthetic_texture(16, 16, 2), "echo");
    CHECK(score.perceptual.value == 0.5);
    clear_perceptual_scorers();
}
