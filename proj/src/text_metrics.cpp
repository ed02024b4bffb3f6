#include "mesa/text_metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mesa {

std::vector<char32_t> utf8_codepoints(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        int len = 1;
        char32_t cp = b0;
        if ((b0 & 0x80) == 0x00) {
            len = 1;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            out.push_back(b0);
            ++i;
            continue;
        }
        if (i + len > s.size()) {
            out.push_back(b0);
            ++i;
            continue;
        }
        bool ok = true;
        char32_t acc = cp;
        for (int k = 1; k < len; ++k) {
            const auto b = static_cast<unsigned char>(s[i + k]);
            if ((b & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            acc = (acc << 6) | (b & 0x3F);
        }
        if (!ok) {
            out.push_back(b0);
            ++i;
            continue;
        }
        out.push_back(acc);
        i += len;
    }
    return out;
}

long long levenshtein(const std::vector<char32_t>& a, const std::vector<char32_t>& b) {
    const size_t m = a.size(), n = b.size();
    if (m == 0) return static_cast<long long>(n);
    if (n == 0) return static_cast<long long>(m);
    std::vector<long long> row(n + 1);
    std::iota(row.begin(), row.end(), 0LL);
    for (size_t i = 0; i < m; ++i) {
        long long corner = row[0];
        row[0] = static_cast<long long>(i) + 1;
        for (size_t j = 0; j < n; ++j) {
            const long long up = row[j + 1];
            const long long subst = corner + (a[i] == b[j] ? 0 : 1);
            row[j + 1] = std::min({subst, up + 1, row[j] + 1});
            corner = up;
        }
    }
    return row[n];
}

long long levenshtein(std::string_view original, std::string_view recovered) {
    return levenshtein(utf8_codepoints(original), utf8_codepoints(recovered));
}

double text_recovery_score(long long ld, long long s) {
    if (s < 1) throw std::invalid_argument("text_recovery_score: s must be >= 1");
    if (ld < 0) throw std::invalid_argument("text_recovery_score: negative distance");
    return 1.0 - std::min(1.0, static_cast<double>(ld) / static_cast<double>(s));
}

double text_recovery_score(std::string_view original, std::string_view recovered, long long s) {
    return text_recovery_score(levenshtein(original, recovered), s);
}

double log_lev_similarity(long long ld) {
    if (ld < 0) throw std::invalid_argument("log_lev_similarity: negative distance");
    return 1.0 / (1.0 + std::log10(1.0 + static_cast<double>(ld)));
}

std::string normalize_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_space = true;  // leading whitespace is dropped
    for (char ch : s) {
        const auto uc = static_cast<unsigned char>(ch);
        if (uc < 0x80 && std::isspace(uc)) {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(uc < 0x80 ? static_cast<char>(std::toupper(uc)) : ch);
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

MetricScore score_text_pair(std::string_view original, std::string_view recovered, long long s,
                            bool normalize) {
    std::string o, r;
    if (normalize) {
        o = normalize_text(original);
        r = normalize_text(recovered);
        original = o;
        recovered = r;
    }
    MetricScore score;
    score.ld = levenshtein(original, recovered);
    score.s_cap = s;
    score.trs = text_recovery_score(score.ld, s);
    score.lls = log_lev_similarity(score.ld);
    return score;
}

}  // namespace mesa
