#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mesa/char_weights.hpp"
#include "mesa/image_io.hpp"
#include "mesa/ocr_boxes.hpp"

#include "test_util.hpp"

#include <fstream>
#include <random>

using namespace mesa;
using mesa::testing::TempDir;

namespace {

const std::vector<LayerId> kAllLayers = {LayerId::Layer1, LayerId::AvgPool1, LayerId::AvgPool2,
                                         LayerId::AvgPool3, LayerId::AvgPool4};

BoxTable table_of(std::initializer_list<OcrBox> boxes) {
    BoxTable t;
    t.boxes = boxes;
    return t;
}

LetterWidthSample sample_of(std::vector<double> widths) {
    LetterWidthSample s;
    s.widths = std::move(widths);
    s.source.resize(s.widths.size());
    return s;
}

WidthDistribution normal_dist(double mu, double sigma) {
    WidthDistribution d;
    d.family = DistFamily::Normal;
    d.p1 = mu;
    d.p2 = sigma;
    d.mu = mu;
    d.sigma = sigma;
    return d;
}

}  // namespace

TEST_CASE("letter widths per character") {
    const auto s = extract_letter_widths(table_of({{"img", "b1", 0, 0, 60, 20, "ABC"}}));
    REQUIRE(s.widths.size() == 3);
    for (double w : s.widths) CHECK(w == doctest::Approx(20.0));

    const auto one = extract_letter_widths(table_of({{"img", "b2", 0, 0, 20, 18, "A"}}));
    CHECK(one.widths == std::vector<double>{20.0});

    // multi-byte text counts code points
    const auto greek = extract_letter_widths(table_of({{"img", "b3", 0, 0, 30, 18, "ΑΒΓ"}}));
    CHECK(greek.widths.size() == 3);
    CHECK(greek.widths[0] == doctest::Approx(10.0));

    CHECK_THROWS_WITH_AS(extract_letter_widths(BoxTable{}), doctest::Contains("no usable boxes"),
                         std::runtime_error);
    // boxes with empty transcription are skipped, not errors
    CHECK_THROWS_AS(extract_letter_widths(table_of({{"img", "b4", 0, 0, 25, 10, ""}})), std::runtime_error);
}

TEST_CASE("box table parsing skips malformed rows") {
    TempDir tmp;
    {
        std::ofstream f(tmp.str("boxes.tsv"));
        f << "image_id\tbox_id\tleft\ttop\twidth\theight\ttext\n";
        f << "img\tb1\t0\t0\t60\t20\tABC\n";
        f << "img\tb2\t0\t0\t-5\t20\tBAD\n";       // negative width
        f << "img\tb3\t0\t0\tx\t20\tBAD\n";        // non-numeric
        f << "img\tb4\t0\t0\t30\t20\n";            // missing text column
        f << "img\tb5\t10\t4\t40\t20\tDE\n";
    }
    const BoxTable t = parse_box_table(tmp.str("boxes.tsv"));
    CHECK(t.boxes.size() == 2);
    CHECK(t.skipped_rows == 3);
    CHECK(t.boxes[1].text == "DE");

    std::ofstream(tmp.str("bad.tsv")) << "wrong\theader\n";
    CHECK_THROWS_AS(parse_box_table(tmp.str("bad.tsv")), std::runtime_error);
}

TEST_CASE("tesseract tsv adapter keeps word rows") {
    TempDir tmp;
    {
        std::ofstream f(tmp.str("tess.tsv"));
        f << "level\tpage_num\tblock_num\tpar_num\tline_num\tword_num\tleft\ttop\twidth\theight\tconf\ttext\n";
        f << "1\t1\t0\t0\t0\t0\t0\t0\t640\t480\t-1\t\n";
        f << "5\t1\t1\t1\t1\t1\t12\t20\t55\t18\t91\tKAI\n";
        f << "5\t1\t1\t1\t1\t2\t80\t20\t40\t18\t88\tTO\n";
        f << "5\t1\t1\t1\t1\t3\t130\t20\t33\t18\t45\t\n";  // empty text dropped
    }
    const BoxTable t = parse_tesseract_tsv(tmp.str("tess.tsv"), "page1");
    REQUIRE(t.boxes.size() == 2);
    CHECK(t.boxes[0].image_id == "page1");
    CHECK(t.boxes[0].width == 55);
    CHECK(t.boxes[0].text == "KAI");
    const auto widths = extract_letter_widths(t);
    REQUIRE(widths.widths.size() == 5);
    CHECK(widths.widths[0] == doctest::Approx(55.0 / 3));
    CHECK(widths.widths[3] == doctest::Approx(20.0));
}

TEST_CASE("fit recovers a normal sample") {
    std::mt19937_64 rng(2025);
    std::normal_distribution<double> n(20.0, 4.0);
    LetterWidthSample s;
    for (int i = 0; i < 1000; ++i) s.widths.push_back(std::max(0.5, n(rng)));
    s.source.resize(s.widths.size());
    const WidthDistribution d = fit_distribution(s);
    CHECK(d.family == DistFamily::Normal);
    CHECK(d.mu > 19.0);
    CHECK(d.mu < 21.0);
    CHECK(d.sigma > 3.6);
    CHECK(d.sigma < 4.4);
    CHECK(d.fit_score < 0.05);
}

TEST_CASE("fit selects lognormal for lognormal data") {
    std::mt19937_64 rng(11);
    std::lognormal_distribution<double> ln(2.5, 0.6);
    LetterWidthSample s;
    for (int i = 0; i < 1000; ++i) s.widths.push_back(ln(rng));
    s.source.resize(s.widths.size());
    const WidthDistribution d = fit_distribution(s);
    CHECK(d.family == DistFamily::Lognormal);
}

TEST_CASE("fit selects gamma for gamma data") {
    std::mt19937_64 rng(17);
    std::gamma_distribution<double> gm(2.0, 9.0);
    LetterWidthSample s;
    for (int i = 0; i < 2000; ++i) s.widths.push_back(std::max(1e-3, gm(rng)));
    s.source.resize(s.widths.size());
    const WidthDistribution d = fit_distribution(s);
    CHECK(d.family == DistFamily::Gamma);
    CHECK(d.mu == doctest::Approx(18.0).epsilon(0.1));
}

TEST_CASE("fit rejects degenerate samples") {
    CHECK_THROWS_WITH_AS(fit_distribution(sample_of({20, 20, 20})), doctest::Contains("too small"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(fit_distribution(sample_of(std::vector<double>(30, 20.0))),
                         doctest::Contains("zero-variance"), std::runtime_error);
}

TEST_CASE("distribution cdf properties") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> umu(5.0, 60.0), usd(0.5, 15.0);
    for (int t = 0; t < 50; ++t) {
        WidthDistribution d;
        const int fam = static_cast<int>(rng() % 3);
        const double mu = umu(rng), sd = usd(rng);
        if (fam == 0) d = normal_dist(mu, sd);
        if (fam == 1) {
            d.family = DistFamily::Lognormal;
            d.p2 = std::sqrt(std::log(1 + sd * sd / (mu * mu)));
            d.p1 = std::log(mu) - d.p2 * d.p2 / 2;
            d.mu = mu;
            d.sigma = sd;
        }
        if (fam == 2) {
            d.family = DistFamily::Gamma;
            d.p1 = mu * mu / (sd * sd);
            d.p2 = sd * sd / mu;
            d.mu = mu;
            d.sigma = sd;
        }
        CHECK(d.cdf(0.0) >= 0.0);
        double prev = -1.0;
        for (double x = -10; x <= 200; x += 5) {
            const double f = d.cdf(x);
            CHECK(f >= prev - 1e-12);
            CHECK(f >= 0.0);
            CHECK(f <= 1.0);
            prev = f;
        }
        CHECK(d.cdf(1e8) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("rf-partition weights for a frozen normal case") {
    const auto w = derive_weights(normal_dist(20.0, 6.0), kAllLayers, WeightScheme::RfPartition);
    REQUIRE(w.entries.size() == 5);
    // frozen CDF evaluations of Normal(20,6) over [0,3],[3,6],[6,16],[16,52],[52,inf)
    const double expected_raw[] = {0.0018742, 0.0075121, 0.2426772, 0.7475074, 0.0000000};
    for (int i = 0; i < 5; ++i) CHECK(w.entries[i].raw == doctest::Approx(expected_raw[i]).epsilon(1e-4));
    double sum = 0.0;
    for (const auto& e : w.entries) sum += e.normalized;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    // interval partition covers (0, inf): raw sum is 1 - F(0)
    double raw_sum = 0.0;
    for (const auto& e : w.entries) raw_sum += e.raw;
    CHECK(raw_sum == doctest::Approx(1.0 - normal_dist(20, 6).cdf(0.0)).epsilon(1e-9));
}

TEST_CASE("single layer gets weight one") {
    const auto w = derive_weights(normal_dist(33.0, 3.0), {LayerId::AvgPool2}, WeightScheme::RfPartition);
    REQUIRE(w.entries.size() == 1);
    CHECK(w.entries[0].normalized == 1.0);
    CHECK(std::isinf(w.entries[0].interval_hi));
}

TEST_CASE("sigma-intervals: symmetric two-layer case splits evenly") {
    const auto w = derive_weights(normal_dist(20.0, 6.0), {LayerId::AvgPool1, LayerId::AvgPool2},
                                  WeightScheme::SigmaIntervals);
    REQUIRE(w.entries.size() == 2);
    // centered brackets: [mu-sigma, mu] and [mu, mu+sigma]
    CHECK(w.entries[0].interval_lo == doctest::Approx(14.0));
    CHECK(w.entries[0].interval_hi == doctest::Approx(20.0));
    CHECK(w.entries[1].interval_lo == doctest::Approx(20.0));
    CHECK(w.entries[1].interval_hi == doctest::Approx(26.0));
    CHECK(w.entries[0].normalized == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(w.entries[1].normalized == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("weights normalization invariant over random distributions") {
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> umu(2.0, 120.0), usd(0.3, 40.0);
    for (int t = 0; t < 200; ++t) {
        WidthDistribution d = normal_dist(umu(rng), usd(rng));
        for (const auto scheme : {WeightScheme::RfPartition, WeightScheme::SigmaIntervals}) {
            const auto w = derive_weights(d, kAllLayers, scheme);
            double sum = 0.0;
            for (const auto& e : w.entries) {
                CHECK(e.normalized >= 0.0);
                sum += e.normalized;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("larger mean never shrinks the last layer's rf-partition weight") {
    double prev = -1.0;
    for (double mu = 5.0; mu <= 120.0; mu += 2.5) {
        const auto w = derive_weights(normal_dist(mu, 7.0), kAllLayers, WeightScheme::RfPartition);
        const double last = w.entries.back().normalized;
        CHECK(last >= prev - 1e-12);
        prev = last;
    }
}

TEST_CASE("derive_weights input validation") {
    CHECK_THROWS_AS(derive_weights(normal_dist(20, 5), {}, WeightScheme::RfPartition),
                    std::invalid_argument);
    CHECK_THROWS_AS(derive_weights(normal_dist(20, 5), {LayerId::AvgPool2, LayerId::Layer1},
                                   WeightScheme::RfPartition),
                    std::invalid_argument);
}

TEST_CASE("weights report round trip and plot artifact") {
    TempDir tmp;
    std::mt19937_64 rng(12);
    std::normal_distribution<double> n(22.0, 5.0);
    LetterWidthSample s;
    for (int i = 0; i < 300; ++i) s.widths.push_back(std::max(0.5, n(rng)));
    s.source.resize(s.widths.size());
    const WidthDistribution d = fit_distribution(s);
    const LayerWeighting w = derive_weights(d, kAllLayers, WeightScheme::RfPartition);

    const std::string plot = tmp.str("dist.png");
    const auto doc = weights_report(w, d, &s, plot);

    double sum = 0.0;
    for (const auto& e : doc.at("weights")) sum += e.at("normalized").get<double>();
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

    LayerWeighting w2;
    WidthDistribution d2;
    parse_weights_report(doc, w2, d2);
    REQUIRE(w2.entries.size() == w.entries.size());
    for (size_t i = 0; i < w.entries.size(); ++i) {
        CHECK(w2.entries[i].layer == w.entries[i].layer);
        CHECK(w2.entries[i].interval_lo == w.entries[i].interval_lo);
        CHECK(w2.entries[i].interval_hi == w.entries[i].interval_hi);
        CHECK(w2.entries[i].raw == w.entries[i].raw);
        CHECK(w2.entries[i].normalized == w.entries[i].normalized);
    }
    CHECK(d2.family == d.family);
    CHECK(d2.mu == d.mu);

    // the plot exists and decodes as an image
    const ImageTensor img = load_image(plot);
    CHECK(img.height > 100);
    CHECK(img.width > 100);
}

TEST_CASE("uniform fallback weighting") {
    const auto w = LayerWeighting::uniform(kAllLayers);
    CHECK(w.entries.size() == 5);
    for (const auto& e : w.entries) CHECK(e.normalized == doctest::Approx(0.2));
    CHECK_NOTHROW(w.validate());
    CHECK(w.weight_of(LayerId::AvgPool3) == doctest::Approx(0.2));
    CHECK_THROWS_AS(LayerWeighting::uniform({}).validate(), std::invalid_argument);
}
