#pragma once

// Rank-frequency coverage curves and the nine vocabulary predictors.

#include <wordorder/bpe.hpp>
#include <wordorder/corpus.hpp>
#include <wordorder/errors.hpp>
#include <wordorder/utf8.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace wordorder {

enum class CoverageUnit { word, subword };

inline std::string to_string(CoverageUnit u) { return u == CoverageUnit::word ? "word" : "subword"; }

inline constexpr std::size_t kDefaultRankMax = 100000;

/// Cumulative percentage of corpus tokens covered by the r most frequent types.
class CoverageCurve {
public:
    CoverageCurve() = default;

    /// `counts` are type frequencies already in rank order (descending).
    CoverageCurve(CoverageUnit unit, const std::vector<std::uint64_t>& ranked_counts) : unit_(unit) {
        for (const auto c : ranked_counts) total_ += c;
        if (total_ == 0) throw DataError("coverage_curve: no tokens");
        cumulative_.reserve(ranked_counts.size());
        std::uint64_t running = 0;
        for (const auto c : ranked_counts) {
            running += c;
            cumulative_.push_back(running == total_ ? 100.0
                                                    : 100.0 * static_cast<double>(running) / static_cast<double>(total_));
        }
    }

    CoverageUnit unit() const noexcept { return unit_; }
    std::size_t types() const noexcept { return cumulative_.size(); }
    std::uint64_t total() const noexcept { return total_; }

    /// C(r) in percent for rank r >= 1; 100 beyond the type count.
    double at(std::size_t r) const {
        if (r == 0) throw UsageError("coverage rank must be >= 1");
        return r <= cumulative_.size() ? cumulative_[r - 1] : 100.0;
    }

    const std::vector<double>& values() const noexcept { return cumulative_; }

private:
    CoverageUnit unit_ = CoverageUnit::word;
    std::uint64_t total_ = 0;
    std::vector<double> cumulative_;
};

namespace detail {

template <class Key>
struct FrequencyTable {
    std::unordered_map<Key, std::size_t> index;
    std::vector<std::uint64_t> counts;  // by first occurrence

    void add(const Key& k) {
        const auto [it, inserted] = index.try_emplace(k, counts.size());
        if (inserted) counts.push_back(0);
        ++counts[it->second];
    }

    /// Descending frequency, ties by first occurrence.
    std::vector<std::uint64_t> ranked() const {
        std::vector<std::size_t> order(counts.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
        std::vector<std::uint64_t> out;
        out.reserve(order.size());
        for (const auto i : order) out.push_back(counts[i]);
        return out;
    }
};

}  // namespace detail

inline CoverageCurve coverage_curve(const Corpus& corpus, CoverageUnit unit, const TokenizerModel* tokenizer = nullptr) {
    if (corpus.word_count() == 0) throw DataError("coverage_curve: corpus is empty");
    if (unit == CoverageUnit::word) {
        detail::FrequencyTable<std::string> table;
        for (const auto& s : corpus.sentences)
            for (const auto& w : s) table.add(w);
        return CoverageCurve(unit, table.ranked());
    }
    if (!tokenizer) throw UsageError("coverage_curve: subword coverage needs a tokenizer");
    detail::FrequencyTable<TokenId> table;
    BpeEncoder enc(*tokenizer);
    for (const auto& s : corpus.sentences)
        for (const TokenId id : enc.encode_words(s)) table.add(id);
    return CoverageCurve(unit, table.ranked());
}

/// (1 / log r_max) * integral_1^{r_max} C(r) d(log r), with C the right-continuous
/// step function C(r) = C(floor(r)), integrated exactly per segment [k, k+1).
inline double coverage_integral(const CoverageCurve& curve, std::size_t r_max = kDefaultRankMax) {
    if (r_max < 2) throw UsageError("coverage_integral: r_max must be >= 2");
    const std::size_t last_step = std::min(curve.types(), r_max);
    double area = 0.0;
    for (std::size_t k = 1; k < last_step; ++k) area += curve.at(k) * std::log1p(1.0 / static_cast<double>(k));
    // From max(types, 1) on, C is constant (100 beyond the type count, or C(last) up to r_max).
    area += curve.at(last_step) * (std::log(static_cast<double>(r_max)) - std::log(static_cast<double>(last_step)));
    return area / std::log(static_cast<double>(r_max));
}

/// No-intercept slope of C_s on C_w with weights log(r), over ranks 1..r_max.
inline double coverage_similarity(const CoverageCurve& word, const CoverageCurve& subword,
                                  std::size_t r_max = kDefaultRankMax) {
    if (r_max < 2) throw UsageError("coverage_similarity: r_max must be >= 2");
    double num = 0.0, den = 0.0;
    for (std::size_t r = 2; r <= r_max; ++r) {  // w_1 = log 1 = 0
        const double w = std::log(static_cast<double>(r));
        const double cw = word.at(r);
        num += w * cw * subword.at(r);
        den += w * cw * cw;
    }
    if (den == 0.0) throw DataError("coverage_similarity: word coverage curve is all zero");
    return num / den;
}

struct VocabStatsRecord {
    double c_w_100 = 0.0;
    double c_s_100 = 0.0;
    double coverage_similarity = 0.0;
    double coverage_integral = 0.0;
    double subwords_per_sentence = 0.0;
    double words_per_sentence = 0.0;
    double fertility = 0.0;
    double word_length = 0.0;
    double types = 0.0;

    static constexpr std::size_t kFieldCount = 9;

    /// Column names in predictor order.
    static const std::vector<std::string>& field_names() {
        static const std::vector<std::string> names{"c_w_100",         "c_s_100",   "coverage_similarity",
                                                    "coverage_integral", "subwords_per_sentence",
                                                    "words_per_sentence", "fertility", "word_length", "types"};
        return names;
    }

    std::vector<double> as_vector() const {
        return {c_w_100, c_s_100, coverage_similarity, coverage_integral, subwords_per_sentence,
                words_per_sentence, fertility, word_length, types};
    }

    friend bool operator==(const VocabStatsRecord&, const VocabStatsRecord&) = default;
};

struct VocabStatsOptions {
    std::size_t r_max = kDefaultRankMax;
    std::size_t coverage_rank = 100;
};

inline VocabStatsRecord stats_record(const Corpus& corpus, const TokenizerModel& tokenizer,
                                     const VocabStatsOptions& opt = {}) {
    if (corpus.word_count() == 0) throw DataError("stats_record: corpus is empty");
    const auto cw = coverage_curve(corpus, CoverageUnit::word);
    const auto cs = coverage_curve(corpus, CoverageUnit::subword, &tokenizer);

    std::uint64_t chars = 0;
    for (const auto& s : corpus.sentences)
        for (const auto& w : s) chars += utf8::length(w);

    const double sentences = static_cast<double>(corpus.size());
    const double words = static_cast<double>(cw.total());
    const double subwords = static_cast<double>(cs.total());

    VocabStatsRecord r;
    r.c_w_100 = cw.at(opt.coverage_rank);
    r.c_s_100 = cs.at(opt.coverage_rank);
    r.coverage_similarity = coverage_similarity(cw, cs, opt.r_max);
    r.coverage_integral = coverage_integral(cw, opt.r_max);
    r.subwords_per_sentence = subwords / sentences;
    r.words_per_sentence = words / sentences;
    r.fertility = subwords / words;
    r.word_length = static_cast<double>(chars) / words;
    r.types = static_cast<double>(cw.types());
    return r;
}

}  // namespace wordorder
