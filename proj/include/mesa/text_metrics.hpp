#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mesa {

/// Decodes UTF-8 into code points. Lenient: invalid bytes are kept as
/// single code points so damaged transcription files never abort a run.
std::vector<char32_t> utf8_codepoints(std::string_view s);

/// Unit-cost insert/delete/substitute edit distance over code points.
long long levenshtein(std::string_view original, std::string_view recovered);
long long levenshtein(const std::vector<char32_t>& a, const std::vector<char32_t>& b);

/// 1 - min(1, ld/s): bounded to [0,1], 1 iff the strings match.
double text_recovery_score(long long ld, long long s = 100);
double text_recovery_score(std::string_view original, std::string_view recovered, long long s = 100);

/// 1 / (1 + log10(1 + ld)): strictly decreasing, in (0,1].
double log_lev_similarity(long long ld);

/// ASCII uppercase + whitespace-run collapse + trim (optional preprocessing
/// for OCR output comparison; non-ASCII bytes pass through unchanged).
std::string normalize_text(std::string_view s);

struct MetricScore {
    long long ld = 0;
    double trs = 0.0;
    double lls = 0.0;
    long long s_cap = 100;
};

MetricScore score_text_pair(std::string_view original, std::string_view recovered, long long s = 100,
                            bool normalize = false);

}  // namespace mesa
