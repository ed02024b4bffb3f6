#include "mesa/image_metrics.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

namespace mesa {

double psnr(const ImageTensor& a, const ImageTensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: dimension mismatch");
    double mse = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_kernel() {
    std::vector<double> k(kWin);
    const int half = kWin / 2;
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - half;
        k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

std::vector<double> luminance(const ImageTensor& img) {
    std::vector<double> y(img.pixel_count());
    for (size_t i = 0; i < y.size(); ++i)
        y[i] = 0.299 * img.data[i * 3] + 0.587 * img.data[i * 3 + 1] + 0.114 * img.data[i * 3 + 2];
    return y;
}

// Separable valid-region Gaussian filter: (h, w) -> (h-10, w-10).
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w, const std::vector<double>& k) {
    const int ow = w - kWin + 1, oh = h - kWin + 1;
    std::vector<double> tmp(static_cast<size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < kWin; ++i) s += k[i] * src[static_cast<size_t>(y) * w + x + i];
            tmp[static_cast<size_t>(y) * ow + x] = s;
        }
    std::vector<double> out(static_cast<size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < kWin; ++i) s += k[i] * tmp[static_cast<size_t>(y + i) * ow + x];
            out[static_cast<size_t>(y) * ow + x] = s;
        }
    return out;
}

}  // namespace

double ssim(const ImageTensor& a, const ImageTensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("ssim: dimension mismatch");
    if (a.height < kWin || a.width < kWin)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");

    const auto ya = luminance(a);
    const auto yb = luminance(b);
    const int h = a.height, w = a.width;
    const size_t n = ya.size();

    std::vector<double> aa(n), bb(n), ab(n);
    for (size_t i = 0; i < n; ++i) {
        aa[i] = ya[i] * ya[i];
        bb[i] = yb[i] * yb[i];
        ab[i] = ya[i] * yb[i];
    }

    const auto k = gaussian_kernel();
    const auto mu_a = filter_valid(ya, h, w, k);
    const auto mu_b = filter_valid(yb, h, w, k);
    const auto m_aa = filter_valid(aa, h, w, k);
    const auto m_bb = filter_valid(bb, h, w, k);
    const auto m_ab = filter_valid(ab, h, w, k);

    double total = 0.0;
    for (size_t i = 0; i < mu_a.size(); ++i) {
        // shaped so that a==b gives num==den bitwise, ssim(x,x) == 1 exactly
        const double mu_ab = mu_a[i] * mu_b[i];
        const double mu_a2 = mu_a[i] * mu_a[i];
        const double mu_b2 = mu_b[i] * mu_b[i];
        const double va = m_aa[i] - mu_a2;
        const double vb = m_bb[i] - mu_b2;
        const double cov = m_ab[i] - mu_ab;
        const double num = (mu_ab + mu_ab + kC1) * (cov + cov + kC2);
        const double den = (mu_a2 + mu_b2 + kC1) * (va + vb + kC2);
        total += num / den;
    }
    return total / static_cast<double>(mu_a.size());
}

namespace {

struct ScorerEntry {
    std::string tag;
    PerceptualScorer fn;
};

std::map<std::string, ScorerEntry>& scorer_registry() {
    static std::map<std::string, ScorerEntry> reg;
    return reg;
}

}  // namespace

void register_perceptual_scorer(const std::string& name, const std::string& backbone_tag,
                                PerceptualScorer scorer) {
    scorer_registry()[name] = {backbone_tag, std::move(scorer)};
}

void clear_perceptual_scorers() { scorer_registry().clear(); }

PerceptualResult perceptual_distance(const ImageTensor& a, const ImageTensor& b,
                                     const std::string& scorer_name) {
    PerceptualResult res;
    const auto it = scorer_registry().find(scorer_name);
    if (it == scorer_registry().end()) {
        res.reason = "unavailable";
        return res;
    }
    res.value = it->second.fn(a, b);
    res.backbone_tag = it->second.tag;
    return res;
}

ImagePairScore score_image_pair(const ImageTensor& ref, const ImageTensor& test,
                                const std::string& perceptual_scorer) {
    ImagePairScore s;
    s.psnr = psnr(ref, test);
    s.ssim = ssim(ref, test);
    if (!perceptual_scorer.empty()) s.perceptual = perceptual_distance(ref, test, perceptual_scorer);
    else s.perceptual.reason = "unavailable";
    return s;
}

}  // namespace mesa
