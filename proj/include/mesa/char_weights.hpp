#pragma once

#include "mesa/char_weights_types.hpp"
#include "mesa/ocr_boxes.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace mesa {

/// Per-letter pixel widths pooled over the damaged input and the exemplars.
struct LetterWidthSample {
    struct Provenance {
        std::string image_id;
        std::string box_id;
    };
    std::vector<double> widths;          // all > 0
    std::vector<Provenance> source;      // parallel to widths
    int skipped_boxes = 0;
};

enum class DistFamily { Normal, Lognormal, Gamma };
const char* family_name(DistFamily f);
DistFamily family_from_name(const std::string& name);

/// Parametric model fitted to letter widths; mu/sigma are the distribution's
/// mean and standard deviation regardless of family.
struct WidthDistribution {
    DistFamily family = DistFamily::Normal;
    double p1 = 0.0;  // normal: mean | lognormal: log-mean | gamma: shape
    double p2 = 1.0;  // normal: sd   | lognormal: log-sd   | gamma: scale
    double mu = 0.0;
    double sigma = 0.0;
    double fit_score = 0.0;  // Kolmogorov–Smirnov statistic of the chosen fit

    double cdf(double x) const;
    double pdf(double x) const;

    nlohmann::json to_json() const;
    static WidthDistribution from_json(const nlohmann::json& j);
};

/// Each box contributes width/character_count once per character; boxes with
/// empty text are skipped. Throws if no usable boxes remain.
LetterWidthSample extract_letter_widths(const BoxTable& boxes);

inline constexpr int kMinFitSample = 8;

/// Maximum-likelihood fit of each candidate family, selected by the smallest
/// KS statistic. Throws on samples smaller than kMinFitSample or with zero
/// variance.
WidthDistribution fit_distribution(const LetterWidthSample& sample);

enum class WeightScheme { RfPartition, SigmaIntervals };
WeightScheme scheme_from_name(const std::string& name);
const char* scheme_name(WeightScheme s);

/// rf-partition: consecutive intervals [0,rf_1], (rf_1,rf_2], ..., (rf_{L-1},inf).
/// sigma-intervals: the centered sigma brackets around the mean, mapped to the
/// layers in receptive-field order.
LayerWeighting derive_weights(const WidthDistribution& dist, const std::vector<LayerId>& layers,
                              WeightScheme scheme = WeightScheme::RfPartition);

/// JSON document with family, params, per-layer intervals and weights; when
/// plot_path is non-empty also renders the width histogram with the fitted
/// density curve (sample may be null if no histogram is wanted).
nlohmann::json weights_report(const LayerWeighting& weighting, const WidthDistribution& dist,
                              const LetterWidthSample* sample = nullptr,
                              const std::string& plot_path = "");

/// Inverse of weights_report for the machine-readable part.
void parse_weights_report(const nlohmann::json& j, LayerWeighting& weighting, WidthDistribution& dist);

}  // namespace mesa
