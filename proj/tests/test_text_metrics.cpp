#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mesa/text_metrics.hpp"

#include <random>

using namespace mesa;

namespace {

// Brute-force recursion exploring every edit path (no memoization).
long long lev_oracle(const std::vector<char32_t>& a, size_t i, const std::vector<char32_t>& b, size_t j) {
    if (i == a.size()) return static_cast<long long>(b.size() - j);
    if (j == b.size()) return static_cast<long long>(a.size() - i);
    if (a[i] == b[j]) return lev_oracle(a, i + 1, b, j + 1);
    const long long subst = lev_oracle(a, i + 1, b, j + 1);
    const long long del = lev_oracle(a, i + 1, b, j);
    const long long ins = lev_oracle(a, i, b, j + 1);
    return 1 + std::min({subst, del, ins});
}

std::string random_string(std::mt19937_64& rng, int max_len, const char* alphabet, int alpha_size) {
    const int len = static_cast<int>(rng() % (max_len + 1));
    std::string s;
    for (int i = 0; i < len; ++i) s.push_back(alphabet[rng() % alpha_size]);
    return s;
}

}  // namespace

TEST_CASE("edit distance reference pairs") {
    CHECK(levenshtein("CAT", "CUT") == 1);
    CHECK(levenshtein("HELLO WORLD", "HELLO") == 6);
    CHECK(levenshtein("HELLO", "HELLO ABCDEF") == 7);  // " ABCDEF" is seven insertions
    CHECK(levenshtein("", "abc") == 3);
    CHECK(levenshtein("abc", "") == 3);
    CHECK(levenshtein("", "") == 0);
    CHECK(levenshtein("INTERNATIONALIZATION", "INTERNAT1ONALIZAT1ON") == 2);
}

TEST_CASE("edit distance counts code points, not bytes") {
    CHECK(levenshtein("ΑΒΓ", "ΑΒΔ") == 1);      // Greek, 2-byte encodings
    CHECK(levenshtein("ΑΒΓ", "ΑΒ") == 1);
    CHECK(levenshtein("αβγδε", "αβγδε") == 0);
}

TEST_CASE("edit distance against the exhaustive-recursion oracle") {
    std::mt19937_64 rng(1234);
    for (int t = 0; t < 200; ++t) {
        const std::string a = random_string(rng, 6, "abc", 3);
        const std::string b = random_string(rng, 6, "abc", 3);
        const auto ca = utf8_codepoints(a);
        const auto cb = utf8_codepoints(b);
        CHECK(levenshtein(a, b) == lev_oracle(ca, 0, cb, 0));
    }
}

TEST_CASE("edit distance is a metric") {
    std::mt19937_64 rng(77);
    for (int t = 0; t < 300; ++t) {
        const std::string a = random_string(rng, 12, "abz", 3);
        const std::string b = random_string(rng, 12, "abz", 3);
        const std::string c = random_string(rng, 12, "abz", 3);
        const auto dab = levenshtein(a, b);
        const auto dba = levenshtein(b, a);
        const auto dac = levenshtein(a, c);
        const auto dcb = levenshtein(c, b);
        CHECK(dab == dba);
        CHECK(dab >= 0);
        CHECK((dab == 0) == (a == b));
        CHECK(dab <= dac + dcb);
    }
}

TEST_CASE("text recovery score") {
    CHECK(text_recovery_score(7, 100) == doctest::Approx(0.93).epsilon(1e-12));
    CHECK(text_recovery_score(101, 100) == 0.0);
    CHECK(text_recovery_score(0, 100) == 1.0);
    CHECK(text_recovery_score(6, 100) == doctest::Approx(0.94).epsilon(1e-12));
    CHECK(text_recovery_score(100, 100) == 0.0);  // exactly at the cap
    CHECK(text_recovery_score("CAT", "CAT") == 1.0);
    CHECK_THROWS_AS(text_recovery_score(3, 0), std::invalid_argument);
}

TEST_CASE("log-scaled similarity") {
    CHECK(log_lev_similarity(0) == 1.0);
    CHECK(log_lev_similarity(1) == doctest::Approx(0.7686217868).epsilon(1e-9));
    CHECK(log_lev_similarity(2) == doctest::Approx(0.6769924925).epsilon(1e-9));
    CHECK(log_lev_similarity(6) == doctest::Approx(0.5419766204).epsilon(1e-9));
    CHECK_THROWS_AS(log_lev_similarity(-1), std::invalid_argument);
}

TEST_CASE("score monotonicity and bounds") {
    double prev_trs = 2.0, prev_lls = 2.0;
    for (long long ld = 0; ld <= 250; ++ld) {
        const double trs = text_recovery_score(ld, 100);
        const double lls = log_lev_similarity(ld);
        CHECK(trs >= 0.0);
        CHECK(trs <= 1.0);
        CHECK(lls > 0.0);
        CHECK(lls <= 1.0);
        CHECK(trs <= prev_trs);
        CHECK(lls < prev_lls);
        if (ld >= 100) CHECK(trs == 0.0);
        prev_trs = trs;
        prev_lls = lls;
    }
}

TEST_CASE("normalization preprocessing") {
    CHECK(normalize_text("  Hello \t worLD \n") == "HELLO WORLD");
    CHECK(normalize_text("") == "");
    CHECK(normalize_text("a  b") == "A B");
    const MetricScore raw = score_text_pair("Hello World", "hello  world", 100, false);
    const MetricScore norm = score_text_pair("Hello World", "hello  world", 100, true);
    CHECK(raw.ld > 0);
    CHECK(norm.ld == 0);
    CHECK(norm.trs == 1.0);
}
