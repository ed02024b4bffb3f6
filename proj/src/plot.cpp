#include "mesa/plot.hpp"

#include "mesa/char_weights.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mesa {

namespace {

constexpr int kPlotW = 640;
constexpr int kPlotH = 420;
constexpr int kMarginL = 50;
constexpr int kMarginB = 40;
constexpr int kMarginT = 36;
constexpr int kMarginR = 16;

cv::Mat blank_canvas() {
    return cv::Mat(kPlotH, kPlotW, CV_8UC3, cv::Scalar(255, 255, 255));
}

void draw_axes(cv::Mat& img, const std::string& title) {
    const cv::Scalar black(0, 0, 0);
    cv::line(img, {kMarginL, kPlotH - kMarginB}, {kPlotW - kMarginR, kPlotH - kMarginB}, black, 1);
    cv::line(img, {kMarginL, kMarginT}, {kMarginL, kPlotH - kMarginB}, black, 1);
    cv::putText(img, title, {kMarginL, 24}, cv::FONT_HERSHEY_SIMPLEX, 0.55, black, 1, cv::LINE_AA);
}

void write_canvas(const cv::Mat& img, const std::string& path) {
    if (!cv::imwrite(path, img)) throw std::runtime_error("cannot write plot: " + path);
}

int to_px_x(double x, double x0, double x1) {
    const double f = (x - x0) / (x1 - x0);
    return kMarginL + static_cast<int>(f * (kPlotW - kMarginL - kMarginR));
}

int to_px_y(double y, double y1) {
    const double f = y1 > 0 ? y / y1 : 0.0;
    return kPlotH - kMarginB - static_cast<int>(f * (kPlotH - kMarginT - kMarginB));
}

}  // namespace

void plot_width_distribution(const std::vector<double>& widths, const WidthDistribution& dist,
                             const std::string& path) {
    cv::Mat img = blank_canvas();
    draw_axes(img, std::string("letter widths (px), fit: ") + family_name(dist.family));

    double x0 = dist.mu - 4.0 * dist.sigma, x1 = dist.mu + 4.0 * dist.sigma;
    if (!widths.empty()) {
        const auto [mn, mx] = std::minmax_element(widths.begin(), widths.end());
        x0 = std::min(x0, *mn);
        x1 = std::max(x1, *mx);
    }
    x0 = std::min(x0, 0.0);
    if (x1 <= x0) x1 = x0 + 1.0;

    // density-normalized histogram
    const int bins = std::max(8, static_cast<int>(std::ceil(std::log2(std::max<size_t>(widths.size(), 2)) + 1)));
    std::vector<double> hist(bins, 0.0);
    double peak = 0.0;
    if (!widths.empty()) {
        const double bw = (x1 - x0) / bins;
        for (double w : widths) {
            int b = static_cast<int>((w - x0) / bw);
            b = std::clamp(b, 0, bins - 1);
            hist[b] += 1.0;
        }
        for (double& h : hist) h /= widths.size() * bw;
        peak = *std::max_element(hist.begin(), hist.end());
    }
    for (double x = x0; x <= x1; x += (x1 - x0) / 256.0) peak = std::max(peak, dist.pdf(x));
    if (peak <= 0) peak = 1.0;

    if (!widths.empty()) {
        const double bw = (x1 - x0) / bins;
        for (int b = 0; b < bins; ++b) {
            const int px0 = to_px_x(x0 + b * bw, x0, x1);
            const int px1 = to_px_x(x0 + (b + 1) * bw, x0, x1);
            const int py = to_px_y(hist[b], peak);
            cv::rectangle(img, {px0, py}, {px1 - 1, kPlotH - kMarginB - 1}, cv::Scalar(220, 170, 110), cv::FILLED);
            cv::rectangle(img, {px0, py}, {px1 - 1, kPlotH - kMarginB - 1}, cv::Scalar(160, 110, 60), 1);
        }
    }

    std::vector<cv::Point> curve;
    for (int i = 0; i <= 256; ++i) {
        const double x = x0 + (x1 - x0) * i / 256.0;
        curve.emplace_back(to_px_x(x, x0, x1), to_px_y(dist.pdf(x), peak));
    }
    cv::polylines(img, curve, false, cv::Scalar(40, 40, 200), 2, cv::LINE_AA);

    char buf[96];
    std::snprintf(buf, sizeof(buf), "mu=%.2f sigma=%.2f ks=%.3f", dist.mu, dist.sigma, dist.fit_score);
    cv::putText(img, buf, {kPlotW - 300, 24}, cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(60, 60, 60), 1,
                cv::LINE_AA);
    write_canvas(img, path);
}

void plot_bars(const std::vector<std::string>& labels, const std::vector<double>& values,
               const std::string& title, const std::string& path) {
    if (labels.size() != values.size()) throw std::invalid_argument("plot_bars: label/value size mismatch");
    cv::Mat img = blank_canvas();
    draw_axes(img, title);
    const int n = static_cast<int>(values.size());
    if (n == 0) {
        write_canvas(img, path);
        return;
    }
    double peak = *std::max_element(values.begin(), values.end());
    if (peak <= 0) peak = 1.0;
    const int span = kPlotW - kMarginL - kMarginR;
    const int slot = span / n;
    for (int i = 0; i < n; ++i) {
        const int bx0 = kMarginL + i * slot + slot / 6;
        const int bx1 = kMarginL + (i + 1) * slot - slot / 6;
        const int by = to_px_y(std::max(values[i], 0.0), peak);
        cv::rectangle(img, {bx0, by}, {bx1, kPlotH - kMarginB - 1}, cv::Scalar(190, 120, 60), cv::FILLED);
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.3g", values[i]);
        cv::putText(img, buf, {bx0, by - 5}, cv::FONT_HERSHEY_SIMPLEX, 0.42, cv::Scalar(60, 60, 60), 1,
                    cv::LINE_AA);
        cv::putText(img, labels[i], {bx0, kPlotH - kMarginB + 18}, cv::FONT_HERSHEY_SIMPLEX, 0.42,
                    cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    }
    write_canvas(img, path);
}

ImageTensor contact_sheet(const std::vector<ImageTensor>& tiles, const std::vector<std::string>& labels,
                          int columns, int tile_px) {
    if (tiles.empty()) throw std::invalid_argument("contact_sheet: no tiles");
    if (columns < 1) throw std::invalid_argument("contact_sheet: columns must be >= 1");
    const int rows = (static_cast<int>(tiles.size()) + columns - 1) / columns;
    const int label_h = 16;
    const int cell = tile_px + label_h;
    cv::Mat sheet(rows * cell, columns * tile_px, CV_8UC3, cv::Scalar(245, 245, 245));

    for (size_t i = 0; i < tiles.size(); ++i) {
        const auto& t = tiles[i];
        cv::Mat m(t.height, t.width, CV_8UC3);
        for (int y = 0; y < t.height; ++y) {
            auto* row = m.ptr<std::uint8_t>(y);
            for (int x = 0; x < t.width; ++x) {
                row[x * 3 + 0] = static_cast<std::uint8_t>(std::llround(clamp01(t.at(y, x, 2)) * 255));
                row[x * 3 + 1] = static_cast<std::uint8_t>(std::llround(clamp01(t.at(y, x, 1)) * 255));
                row[x * 3 + 2] = static_cast<std::uint8_t>(std::llround(clamp01(t.at(y, x, 0)) * 255));
            }
        }
        cv::Mat resized;
        cv::resize(m, resized, {tile_px, tile_px}, 0, 0, cv::INTER_AREA);
        const int r = static_cast<int>(i) / columns, c = static_cast<int>(i) % columns;
        resized.copyTo(sheet(cv::Rect(c * tile_px, r * cell, tile_px, tile_px)));
        if (i < labels.size())
            cv::putText(sheet, labels[i], {c * tile_px + 2, r * cell + tile_px + 12},
                        cv::FONT_HERSHEY_SIMPLEX, 0.38, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    }

    ImageTensor out(sheet.rows, sheet.cols);
    for (int y = 0; y < sheet.rows; ++y) {
        const auto* row = sheet.ptr<std::uint8_t>(y);
        for (int x = 0; x < sheet.cols; ++x) {
            out.at(y, x, 0) = row[x * 3 + 2] / 255.0;
            out.at(y, x, 1) = row[x * 3 + 1] / 255.0;
            out.at(y, x, 2) = row[x * 3 + 0] / 255.0;
        }
    }
    return out;
}

}  // namespace mesa
