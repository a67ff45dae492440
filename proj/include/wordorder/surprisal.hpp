#pragma once

// Per-token surprisal S = (1/N) sum -log p(w_i | w_<i) in nats, surprisal
// deltas against the original order, and the per-token log-prob CSV used to
// exchange scores with external models.
//
// Log-prob CSV (one row per predicted token, header required):
//   variant,theta,seed,sentence_id,position,token_id,logprob
// theta is a decimal number or "original"; logprob is the natural log of the
// model probability (<= 0). Position 0 is the first token after the
// sentence-start context; the sentence's closing end-of-text is included.
//
// Aggregate CSV (one row per variant, theta, seed):
//   variant,theta,seed,S,N,delta_S
// delta_S is empty when no baseline was available.

#include <wordorder/bpe.hpp>
#include <wordorder/errors.hpp>
#include <wordorder/manifest.hpp>
#include <wordorder/stats.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace wordorder {

struct SurprisalResult {
    std::string variant;
    Order order;
    std::uint64_t seed = 0;
    double S = 0.0;
    std::uint64_t N = 0;
    std::optional<double> delta_S;
    std::vector<double> per_sentence;  // mean surprisal per sentence, when requested
};

template <class M>
concept LanguageModelLike = requires(const M& m, std::span<const TokenId> ctx, TokenId w) {
    { m.log_prob(ctx, w) } -> std::convertible_to<double>;
    { m.boundary() } -> std::convertible_to<TokenId>;
    { m.order() } -> std::convertible_to<std::size_t>;
    { m.vocab_size() } -> std::convertible_to<std::size_t>;
};

/// Calls fn(sentence_id, position, token, log_prob) for every predicted token.
/// Context resets at each sentence and starts from the boundary token.
template <LanguageModelLike M, class Fn>
void for_each_token_logprob(const M& lm, const std::vector<TokenSequence>& sentences, Fn&& fn) {
    const std::size_t window = lm.order() > 1 ? lm.order() - 1 : 0;
    std::vector<TokenId> seq;
    for (std::size_t sid = 0; sid < sentences.size(); ++sid) {
        seq.assign(1, lm.boundary());
        seq.insert(seq.end(), sentences[sid].begin(), sentences[sid].end());
        seq.push_back(lm.boundary());
        for (std::size_t i = 1; i < seq.size(); ++i) {
            if (seq[i] >= lm.vocab_size()) {
                throw DataError("surprisal: token id " + std::to_string(seq[i]) + " outside the model vocabulary");
            }
            const std::size_t from = i > window ? i - window : 0;
            const std::span<const TokenId> ctx(seq.data() + from, i - from);
            fn(sid, i - 1, seq[i], static_cast<double>(lm.log_prob(ctx, seq[i])));
        }
    }
}

template <LanguageModelLike M>
SurprisalResult surprisal(const M& lm, const std::vector<TokenSequence>& test, bool per_sentence = false) {
    SurprisalResult r;
    double total = 0.0;
    double sentence_total = 0.0;
    std::size_t sentence_tokens = 0;
    std::size_t current = 0;
    auto flush = [&] {
        if (per_sentence && sentence_tokens) r.per_sentence.push_back(sentence_total / static_cast<double>(sentence_tokens));
        sentence_total = 0.0;
        sentence_tokens = 0;
    };
    for_each_token_logprob(lm, test, [&](std::size_t sid, std::size_t, TokenId, double lp) {
        if (sid != current) {
            flush();
            current = sid;
        }
        total += -lp;
        sentence_total += -lp;
        ++sentence_tokens;
        ++r.N;
    });
    flush();
    if (r.N == 0) throw DataError("surprisal: empty test set");
    r.S = total / static_cast<double>(r.N);
    return r;
}

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

template <class T>
T parse_number(std::string_view s, std::size_t line_no, const char* what) {
    T v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw DataError("line " + std::to_string(line_no) + ": cannot parse " + what + " '" + std::string(s) + "'");
    }
    return v;
}

}  // namespace detail

inline constexpr const char* kLogprobHeader = "variant,theta,seed,sentence_id,position,token_id,logprob";
inline constexpr const char* kAggregateHeader = "variant,theta,seed,S,N,delta_S";

/// Writes the per-token log-prob CSV for `lm` on `test` (header included).
template <LanguageModelLike M>
void export_logprobs(std::ostream& out, const M& lm, const std::vector<TokenSequence>& test, const std::string& variant,
                     const Order& order, std::uint64_t seed, bool header = true) {
    if (variant.find(',') != std::string::npos || variant.find('\n') != std::string::npos)
        throw UsageError("variant names may not contain commas or newlines");
    if (header) out << kLogprobHeader << '\n';
    const std::string prefix = variant + "," + order.str() + "," + std::to_string(seed) + ",";
    for_each_token_logprob(lm, test, [&](std::size_t sid, std::size_t pos, TokenId tok, double lp) {
        out << prefix << sid << ',' << pos << ',' << tok << ',' << detail::format_double(lp) << '\n';
    });
}

/// Aggregates a log-prob CSV into one result per (variant, theta, seed), in
/// order of first appearance.
inline std::vector<SurprisalResult> ingest_external(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw DataError("ingest: empty file");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kLogprobHeader) throw DataError("line 1: expected header '" + std::string(kLogprobHeader) + "'");

    std::vector<SurprisalResult> results;
    std::vector<double> sums;
    std::map<std::tuple<std::string, std::string, std::uint64_t>, std::size_t> index;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 7) {
            throw DataError("line " + std::to_string(line_no) + ": expected 7 fields, got " + std::to_string(f.size()));
        }
        const auto seed = detail::parse_number<std::uint64_t>(f[2], line_no, "seed");
        detail::parse_number<std::uint64_t>(f[3], line_no, "sentence_id");
        detail::parse_number<std::uint64_t>(f[4], line_no, "position");
        detail::parse_number<std::uint64_t>(f[5], line_no, "token_id");
        const auto lp = detail::parse_number<double>(f[6], line_no, "logprob");
        if (!(lp <= 0.0) || std::isnan(lp)) {
            throw DataError("line " + std::to_string(line_no) + ": logprob must be <= 0");
        }
        const auto key = std::make_tuple(std::string(f[0]), std::string(f[1]), seed);
        auto it = index.find(key);
        if (it == index.end()) {
            Order order;
            try {
                order = Order::parse(std::string(f[1]));
            } catch (const UsageError& e) {
                throw DataError("line " + std::to_string(line_no) + ": " + e.what());
            }
            it = index.emplace(key, results.size()).first;
            results.push_back({std::string(f[0]), order, seed, 0.0, 0, std::nullopt, {}});
            sums.push_back(0.0);
        }
        sums[it->second] += -lp;
        ++results[it->second].N;
    }
    if (results.empty()) throw DataError("ingest: no records");
    for (std::size_t i = 0; i < results.size(); ++i) results[i].S = sums[i] / static_cast<double>(results[i].N);
    return results;
}

// --- aggregate results ---------------------------------------------------------

inline void write_results_csv(std::ostream& out, const std::vector<SurprisalResult>& results) {
    out << kAggregateHeader << '\n';
    for (const auto& r : results) {
        out << r.variant << ',' << r.order.str() << ',' << r.seed << ',' << detail::format_double(r.S) << ',' << r.N
            << ',' << (r.delta_S ? detail::format_double(*r.delta_S) : std::string{}) << '\n';
    }
}

inline std::vector<SurprisalResult> read_results_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw DataError("results: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kAggregateHeader) throw DataError("line 1: expected header '" + std::string(kAggregateHeader) + "'");
    std::vector<SurprisalResult> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 6) throw DataError("line " + std::to_string(line_no) + ": expected 6 fields");
        SurprisalResult r;
        r.variant = std::string(f[0]);
        try {
            r.order = Order::parse(std::string(f[1]));
        } catch (const UsageError& e) {
            throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        }
        r.seed = detail::parse_number<std::uint64_t>(f[2], line_no, "seed");
        r.S = detail::parse_number<double>(f[3], line_no, "S");
        r.N = detail::parse_number<std::uint64_t>(f[4], line_no, "N");
        if (!f[5].empty()) r.delta_S = detail::parse_number<double>(f[5], line_no, "delta_S");
        out.push_back(std::move(r));
    }
    return out;
}

// --- deltas ------------------------------------------------------------------

struct DeltaPoint {
    std::string variant;
    Order order;
    stats::Summary delta;      // across seeds
    stats::Summary surprisal;  // across seeds
};

/// Fills delta_S = S - S_orig for every result, matching the baseline by
/// (variant, seed) among `baselines` (results with the original order).
inline std::vector<SurprisalResult> with_deltas(std::vector<SurprisalResult> results,
                                                const std::vector<SurprisalResult>& baselines) {
    std::map<std::pair<std::string, std::uint64_t>, double> base;
    for (const auto& b : baselines)
        if (b.order.is_original()) base[{b.variant, b.seed}] = b.S;
    for (auto& r : results) {
        const auto it = base.find({r.variant, r.seed});
        if (it == base.end()) {
            throw DataError("no original-order baseline for variant '" + r.variant + "' seed " + std::to_string(r.seed));
        }
        r.delta_S = r.S - it->second;
    }
    return results;
}

namespace detail {
// Sorting key for theta columns: numeric order, "original" last.
inline std::pair<int, double> order_sort_key(const Order& o) {
    return o.is_original() ? std::pair{1, 0.0} : std::pair{0, o.theta()};
}
}  // namespace detail

/// Delta-S curve per (variant, theta): median and interquartile range over seeds.
inline std::vector<DeltaPoint> delta_surprisal(const std::vector<SurprisalResult>& results,
                                               const std::vector<SurprisalResult>& baselines) {
    const auto filled = with_deltas(results, baselines);
    std::map<std::tuple<std::string, std::pair<int, double>>, std::pair<Order, std::pair<std::vector<double>, std::vector<double>>>>
        groups;
    for (const auto& r : filled) {
        auto& g = groups[{r.variant, detail::order_sort_key(r.order)}];
        g.first = r.order;
        g.second.first.push_back(*r.delta_S);
        g.second.second.push_back(r.S);
    }
    std::vector<DeltaPoint> out;
    for (const auto& [key, g] : groups) {
        out.push_back({std::get<0>(key), g.first, stats::summarize(g.second.first), stats::summarize(g.second.second)});
    }
    return out;
}

struct AsymmetryPoint {
    std::string variant;
    double theta = 0.0;       // > 0
    double asymmetry = 0.0;   // median dS(+theta) - median dS(-theta)
};

/// Paired differences dS(+theta) - dS(-theta) for every variant and theta > 0
/// present with both signs.
inline std::vector<AsymmetryPoint> surprisal_asymmetry(const std::vector<DeltaPoint>& curve) {
    std::map<std::pair<std::string, double>, double> lookup;
    for (const auto& p : curve)
        if (!p.order.is_original()) lookup[{p.variant, p.order.theta()}] = p.delta.median;
    std::vector<AsymmetryPoint> out;
    for (const auto& [key, dpos] : lookup) {
        if (key.second <= 0.0) continue;
        const auto neg = lookup.find({key.first, -key.second});
        if (neg != lookup.end()) out.push_back({key.first, key.second, dpos - neg->second});
    }
    return out;
}

/// Median of the paired asymmetries across variants and theta.
inline double median_asymmetry(const std::vector<AsymmetryPoint>& points) {
    std::vector<double> v;
    for (const auto& p : points) v.push_back(p.asymmetry);
    return stats::median(v);
}

}  // namespace wordorder
