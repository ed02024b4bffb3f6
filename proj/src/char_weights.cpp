#include "mesa/char_weights.hpp"

#include "mesa/plot.hpp"
#include "mesa/text_metrics.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mesa {

LayerWeighting LayerWeighting::uniform(const std::vector<LayerId>& layers) {
    if (layers.empty()) throw std::invalid_argument("uniform weights: no layers");
    LayerWeighting w;
    const double share = 1.0 / static_cast<double>(layers.size());
    for (LayerId id : layers)
        w.entries.push_back({id, 0.0, std::numeric_limits<double>::infinity(), share, share});
    return w;
}

const LayerWeighting::Entry* LayerWeighting::find(LayerId id) const {
    for (const auto& e : entries)
        if (e.layer == id) return &e;
    return nullptr;
}

double LayerWeighting::weight_of(LayerId id) const {
    const Entry* e = find(id);
    if (!e) throw std::invalid_argument(std::string("weighting does not cover layer ") + layer_info(id).name);
    return e->normalized;
}

std::vector<LayerId> LayerWeighting::layers() const {
    std::vector<LayerId> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.layer);
    return out;
}

void LayerWeighting::validate() const {
    if (entries.empty()) throw std::invalid_argument("weighting: no layers");
    double sum = 0.0;
    for (const auto& e : entries) {
        if (!(e.normalized >= 0.0)) throw std::invalid_argument("weighting: negative weight");
        sum += e.normalized;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("weighting: weights do not sum to 1");
    for (size_t i = 0; i < entries.size(); ++i)
        for (size_t j = i + 1; j < entries.size(); ++j)
            if (entries[i].layer == entries[j].layer)
                throw std::invalid_argument("weighting: duplicate layer");
}

nlohmann::json LayerWeighting::to_json() const {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
        nlohmann::ordered_json je;
        je["layer"] = layer_info(e.layer).name;
        je["interval"] = nlohmann::ordered_json::array();
        je["interval"].push_back(e.interval_lo);
        if (std::isinf(e.interval_hi))
            je["interval"].push_back(nullptr);
        else
            je["interval"].push_back(e.interval_hi);
        je["raw"] = e.raw;
        je["normalized"] = e.normalized;
        arr.push_back(std::move(je));
    }
    return arr;
}

LayerWeighting LayerWeighting::from_json(const nlohmann::json& j) {
    LayerWeighting w;
    for (const auto& je : j) {
        Entry e;
        e.layer = layer_from_name(je.at("layer").get<std::string>());
        const auto& iv = je.at("interval");
        e.interval_lo = iv.at(0).get<double>();
        e.interval_hi = iv.at(1).is_null() ? std::numeric_limits<double>::infinity() : iv.at(1).get<double>();
        e.raw = je.at("raw").get<double>();
        e.normalized = je.at("normalized").get<double>();
        w.entries.push_back(e);
    }
    return w;
}

const char* family_name(DistFamily f) {
    switch (f) {
        case DistFamily::Normal: return "normal";
        case DistFamily::Lognormal: return "lognormal";
        case DistFamily::Gamma: return "gamma";
    }
    return "?";
}

DistFamily family_from_name(const std::string& name) {
    if (name == "normal") return DistFamily::Normal;
    if (name == "lognormal") return DistFamily::Lognormal;
    if (name == "gamma") return DistFamily::Gamma;
    throw std::invalid_argument("unknown distribution family: " + name);
}

namespace {

double normal_cdf(double x, double mean, double sd) {
    return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

double normal_pdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
}

}  // namespace

double WidthDistribution::cdf(double x) const {
    switch (family) {
        case DistFamily::Normal:
            return normal_cdf(x, p1, p2);
        case DistFamily::Lognormal:
            return x <= 0.0 ? 0.0 : normal_cdf(std::log(x), p1, p2);
        case DistFamily::Gamma:
            return x <= 0.0 ? 0.0 : boost::math::gamma_p(p1, x / p2);
    }
    return 0.0;
}

double WidthDistribution::pdf(double x) const {
    switch (family) {
        case DistFamily::Normal:
            return normal_pdf(x, p1, p2);
        case DistFamily::Lognormal:
            return x <= 0.0 ? 0.0 : normal_pdf(std::log(x), p1, p2) / x;
        case DistFamily::Gamma: {
            if (x <= 0.0) return 0.0;
            const double k = p1, theta = p2;
            return std::exp((k - 1.0) * std::log(x) - x / theta - std::lgamma(k) - k * std::log(theta));
        }
    }
    return 0.0;
}

nlohmann::json WidthDistribution::to_json() const {
    nlohmann::ordered_json j;
    j["family"] = family_name(family);
    j["p1"] = p1;
    j["p2"] = p2;
    j["mu"] = mu;
    j["sigma"] = sigma;
    j["fit_score"] = fit_score;
    return j;
}

WidthDistribution WidthDistribution::from_json(const nlohmann::json& j) {
    WidthDistribution d;
    d.family = family_from_name(j.at("family").get<std::string>());
    d.p1 = j.at("p1").get<double>();
    d.p2 = j.at("p2").get<double>();
    d.mu = j.at("mu").get<double>();
    d.sigma = j.at("sigma").get<double>();
    d.fit_score = j.at("fit_score").get<double>();
    return d;
}

LetterWidthSample extract_letter_widths(const BoxTable& boxes) {
    LetterWidthSample sample;
    sample.skipped_boxes = boxes.skipped_rows;
    for (const auto& box : boxes.boxes) {
        if (box.width <= 0) {
            ++sample.skipped_boxes;
            continue;
        }
        const auto cps = utf8_codepoints(box.text);
        size_t chars = 0;
        for (char32_t c : cps)
            if (c != U' ' && c != U'\t') ++chars;
        if (chars == 0) continue;  // empty transcription: no width evidence
        const double per_char = static_cast<double>(box.width) / static_cast<double>(chars);
        for (size_t i = 0; i < chars; ++i) {
            sample.widths.push_back(per_char);
            sample.source.push_back({box.image_id, box.box_id});
        }
    }
    if (sample.widths.empty()) throw std::runtime_error("extract_letter_widths: no usable boxes");
    return sample;
}

namespace {

double ks_statistic(std::vector<double> sorted, const WidthDistribution& dist) {
    const size_t n = sorted.size();
    double d = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double f = dist.cdf(sorted[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    return d;
}

WidthDistribution fit_normal(const std::vector<double>& w, double mean, double var) {
    WidthDistribution d;
    d.family = DistFamily::Normal;
    d.p1 = mean;
    d.p2 = std::sqrt(var);
    d.mu = mean;
    d.sigma = d.p2;
    (void)w;
    return d;
}

WidthDistribution fit_lognormal(const std::vector<double>& w) {
    double m = 0.0;
    for (double x : w) m += std::log(x);
    m /= static_cast<double>(w.size());
    double v = 0.0;
    for (double x : w) {
        const double d = std::log(x) - m;
        v += d * d;
    }
    v /= static_cast<double>(w.size());
    WidthDistribution d;
    d.family = DistFamily::Lognormal;
    d.p1 = m;
    d.p2 = std::sqrt(std::max(v, 1e-12));
    d.mu = std::exp(m + v / 2.0);
    d.sigma = d.mu * std::sqrt(std::max(std::exp(v) - 1.0, 0.0));
    return d;
}

WidthDistribution fit_gamma(const std::vector<double>& w, double mean) {
    double mean_log = 0.0;
    for (double x : w) mean_log += std::log(x);
    mean_log /= static_cast<double>(w.size());
    const double s = std::log(mean) - mean_log;  // >= 0, 0 only for constant samples
    double k = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * std::max(s, 1e-12));
    for (int it = 0; it < 50; ++it) {
        const double f = std::log(k) - boost::math::digamma(k) - s;
        const double fp = 1.0 / k - boost::math::trigamma(k);
        const double step = f / fp;
        k -= step;
        if (k <= 0.0) {
            k = 1e-6;
            break;
        }
        if (std::abs(step) < 1e-12 * k) break;
    }
    WidthDistribution d;
    d.family = DistFamily::Gamma;
    d.p1 = k;
    d.p2 = mean / k;
    d.mu = mean;
    d.sigma = std::sqrt(k) * d.p2;
    return d;
}

}  // namespace

WidthDistribution fit_distribution(const LetterWidthSample& sample) {
    const auto& w = sample.widths;
    if (static_cast<int>(w.size()) < kMinFitSample)
        throw std::runtime_error("fit_distribution: sample too small (need >= " +
                                 std::to_string(kMinFitSample) + ", got " + std::to_string(w.size()) + ")");
    for (double x : w)
        if (!(x > 0.0)) throw std::runtime_error("fit_distribution: non-positive width");

    const double n = static_cast<double>(w.size());
    const double mean = std::accumulate(w.begin(), w.end(), 0.0) / n;
    double var = 0.0;
    for (double x : w) var += (x - mean) * (x - mean);
    var /= n;
    if (var <= 1e-12 * mean * mean)
        throw std::runtime_error("fit_distribution: zero-variance sample");

    std::vector<double> sorted = w;
    std::sort(sorted.begin(), sorted.end());

    WidthDistribution best;
    double best_ks = std::numeric_limits<double>::infinity();
    for (WidthDistribution cand : {fit_normal(w, mean, var), fit_lognormal(w), fit_gamma(w, mean)}) {
        cand.fit_score = ks_statistic(sorted, cand);
        if (cand.fit_score < best_ks) {
            best_ks = cand.fit_score;
            best = cand;
        }
    }
    return best;
}

WeightScheme scheme_from_name(const std::string& name) {
    if (name == "rf-partition") return WeightScheme::RfPartition;
    if (name == "sigma-intervals") return WeightScheme::SigmaIntervals;
    throw std::invalid_argument("unknown weights scheme: " + name);
}

const char* scheme_name(WeightScheme s) {
    return s == WeightScheme::RfPartition ? "rf-partition" : "sigma-intervals";
}

LayerWeighting derive_weights(const WidthDistribution& dist, const std::vector<LayerId>& layers,
                              WeightScheme scheme) {
    if (layers.empty()) throw std::invalid_argument("derive_weights: no layers");
    for (size_t i = 1; i < layers.size(); ++i)
        if (layer_info(layers[i]).receptive_field <= layer_info(layers[i - 1]).receptive_field)
            throw std::invalid_argument("derive_weights: layers must be ordered by receptive field");

    const double inf = std::numeric_limits<double>::infinity();
    LayerWeighting w;
    const size_t count = layers.size();

    if (scheme == WeightScheme::RfPartition) {
        double lo = 0.0;
        for (size_t i = 0; i < count; ++i) {
            const double hi = i + 1 == count ? inf : static_cast<double>(layer_info(layers[i]).receptive_field);
            w.entries.push_back({layers[i], lo, hi, 0.0, 0.0});
            lo = hi;
        }
    } else {
        if (count > 5) throw std::invalid_argument("derive_weights: sigma-intervals supports at most 5 layers");
        const double mu = dist.mu, sg = dist.sigma;
        const std::array<std::pair<double, double>, 5> brackets = {{
            {mu - 2 * sg, mu - sg}, {mu - sg, mu}, {mu, mu + sg}, {mu + sg, mu + 2 * sg}, {mu + 2 * sg, inf},
        }};
        const size_t start = (5 - count) / 2;  // keep the central brackets
        for (size_t i = 0; i < count; ++i)
            w.entries.push_back({layers[i], brackets[start + i].first, brackets[start + i].second, 0.0, 0.0});
    }

    double sum = 0.0;
    for (auto& e : w.entries) {
        const double hi_cdf = std::isinf(e.interval_hi) ? 1.0 : dist.cdf(e.interval_hi);
        e.raw = std::max(0.0, hi_cdf - dist.cdf(e.interval_lo));
        sum += e.raw;
    }
    if (sum <= 1e-12) {
        // no probability mass over the intervals: degenerate fit, spread evenly
        for (auto& e : w.entries) e.normalized = 1.0 / static_cast<double>(count);
    } else {
        for (auto& e : w.entries) e.normalized = e.raw / sum;
    }
    w.validate();
    return w;
}

nlohmann::json weights_report(const LayerWeighting& weighting, const WidthDistribution& dist,
                              const LetterWidthSample* sample, const std::string& plot_path) {
    nlohmann::ordered_json j;
    j["distribution"] = dist.to_json();
    j["weights"] = weighting.to_json();
    if (sample) j["sample_size"] = sample->widths.size();
    if (!plot_path.empty()) {
        plot_width_distribution(sample ? sample->widths : std::vector<double>{}, dist, plot_path);
        j["plot"] = plot_path;
    }
    return j;
}

void parse_weights_report(const nlohmann::json& j, LayerWeighting& weighting, WidthDistribution& dist) {
    dist = WidthDistribution::from_json(j.at("distribution"));
    weighting = LayerWeighting::from_json(j.at("weights"));
    weighting.validate();
}

}  // namespace mesa
