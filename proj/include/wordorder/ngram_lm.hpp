#pragma once

// Interpolated Kneser-Ney n-gram model over token ids.
//
// Each sentence is modelled as <eot> w1 ... wm <eot>: the leading end-of-text
// token is the start-of-sentence context and the trailing one is predicted.
// The highest order and n-grams that begin with the sentence-start token use
// raw counts; every other lower order uses continuation counts (number of
// distinct left extensions). With a fixed discount D in (0, 1):
//
//   p_1(w)     = (max(c_1(w) - D, 0) + D * N1+(.) / |V|) / sum_w c_1(w)
//   p_k(w | h) = (max(c_k(h w) - D, 0) + D * N1+(h .) * p_{k-1}(w | h')) / sum_w c_k(h w)
//
// and p_k(w | h) = p_{k-1}(w | h') when h was never seen as a context.
// N-grams are stored in sorted arrays of packed keys (first token in the
// high bits), so tables are compact and identical across runs.

#include <wordorder/bpe.hpp>
#include <wordorder/errors.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace wordorder {

class KneserNeyModel {
public:
    static constexpr double kDefaultDiscount = 0.75;
    static constexpr std::size_t kDefaultOrder = 4;

    KneserNeyModel() = default;

    std::size_t order() const noexcept { return order_; }
    double discount() const noexcept { return discount_; }
    std::size_t vocab_size() const noexcept { return vocab_size_; }
    TokenId boundary() const noexcept { return boundary_; }

    /// Number of stored n-grams of length k (1 <= k <= order).
    std::size_t ngram_count(std::size_t k) const { return tables_.at(k - 1).size(); }

    /// p(w | context); only the last order-1 tokens of the context are used.
    double prob(std::span<const TokenId> context, TokenId w) const {
        if (w >= vocab_size_) throw DataError("token id " + std::to_string(w) + " outside the model vocabulary");
        const double v = static_cast<double>(vocab_size_);
        double p = (std::max(static_cast<double>(lookup(0, w)) - discount_, 0.0) +
                    discount_ * static_cast<double>(unigram_types_) / v) /
                   static_cast<double>(unigram_total_);
        const std::size_t usable = std::min(context.size(), order_ - 1);
        for (std::size_t k = 2; k <= usable + 1; ++k) {
            const auto ctx = context.subspan(context.size() - (k - 1));
            std::uint64_t ckey = 0;
            bool fits = true;
            for (const TokenId t : ctx) {
                if (t >= vocab_size_) {
                    fits = false;
                    break;
                }
                ckey = (ckey << bits_) | t;
            }
            if (!fits) break;
            const auto* stats = find_context(k - 1, ckey);
            if (!stats) continue;
            const double num = static_cast<double>(lookup(k - 1, (ckey << bits_) | w));
            p = (std::max(num - discount_, 0.0) + discount_ * static_cast<double>(stats->followers) * p) /
                static_cast<double>(stats->total);
        }
        return p;
    }

    double log_prob(std::span<const TokenId> context, TokenId w) const { return std::log(prob(context, w)); }

    /// Trains on sentence-bounded token sequences.
    static KneserNeyModel train(const std::vector<TokenSequence>& sentences, std::size_t vocab_size,
                                std::size_t order = kDefaultOrder, double discount = kDefaultDiscount,
                                TokenId boundary = kEndOfText) {
        if (order < 1) throw UsageError("train_lm: order must be >= 1");
        if (!(discount > 0.0 && discount < 1.0)) throw UsageError("train_lm: discount must lie in (0, 1)");
        if (vocab_size < 1 || boundary >= vocab_size) throw UsageError("train_lm: boundary token outside vocabulary");
        KneserNeyModel m;
        m.order_ = order;
        m.discount_ = discount;
        m.vocab_size_ = vocab_size;
        m.boundary_ = boundary;
        m.bits_ = std::max<unsigned>(1, static_cast<unsigned>(std::bit_width(vocab_size - 1)));
        if (m.bits_ * order > 64) {
            throw UsageError("train_lm: order " + std::to_string(order) + " with vocabulary " +
                             std::to_string(vocab_size) + " exceeds the 64-bit n-gram key");
        }

        // Raw n-gram occurrences per order.
        std::vector<std::vector<std::uint64_t>> raw(order);
        std::size_t predicted = 0;
        std::vector<TokenId> seq;
        for (const auto& s : sentences) {
            seq.assign(1, boundary);
            seq.insert(seq.end(), s.begin(), s.end());
            seq.push_back(boundary);
            for (const TokenId t : seq)
                if (t >= vocab_size) throw DataError("train_lm: token id " + std::to_string(t) + " outside vocabulary");
            for (std::size_t i = 1; i < seq.size(); ++i) {
                ++predicted;
                std::uint64_t key = 0;
                for (std::size_t k = 1; k <= std::min(order, i + 1); ++k) {
                    // key of seq[i-k+1 .. i], first token in the high bits
                    key |= static_cast<std::uint64_t>(seq[i - k + 1]) << (m.bits_ * (k - 1));
                    raw[k - 1].push_back(key);
                }
            }
        }
        if (predicted == 0) throw DataError("train_lm: empty training stream");

        std::vector<std::vector<Entry>> counted(order);
        for (std::size_t k = 0; k < order; ++k) {
            counted[k] = count_sorted(raw[k]);
            std::vector<std::uint64_t>().swap(raw[k]);
        }

        m.tables_.resize(order);
        m.contexts_.resize(order);
        m.tables_[order - 1] = counted[order - 1];
        for (std::size_t k = order - 1; k >= 1; --k) {
            // Continuation counts for length-k n-grams from distinct left extensions.
            const std::uint64_t mask = k * m.bits_ >= 64 ? ~0ULL : ((1ULL << (k * m.bits_)) - 1);
            std::vector<std::uint64_t> suffixes;
            suffixes.reserve(counted[k].size());
            for (const auto& e : counted[k]) suffixes.push_back(e.key & mask);
            const auto cont = count_sorted(suffixes);
            auto& table = m.tables_[k - 1];
            table.reserve(counted[k - 1].size());
            const unsigned first_shift = m.bits_ * static_cast<unsigned>(k - 1);
            for (const auto& e : counted[k - 1]) {
                const bool starts_sentence = k >= 2 && (e.key >> first_shift) == boundary;
                if (starts_sentence) {
                    table.push_back(e);
                } else {
                    const auto it = std::lower_bound(cont.begin(), cont.end(), e.key,
                                                     [](const Entry& x, std::uint64_t key) { return x.key < key; });
                    if (it != cont.end() && it->key == e.key) table.push_back({e.key, it->count});
                }
            }
        }

        m.finish();
        return m;
    }

    /// Binary serialization (little-endian host layout, versioned header).
    void save(std::ostream& out) const {
        out.write(kMagic, 4);
        put(out, std::uint64_t{kFormatVersion});
        put(out, static_cast<std::uint64_t>(order_));
        put(out, discount_);
        put(out, static_cast<std::uint64_t>(vocab_size_));
        put(out, static_cast<std::uint64_t>(boundary_));
        for (const auto& t : tables_) {
            put(out, static_cast<std::uint64_t>(t.size()));
            out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(Entry)));
        }
        if (!out) throw DataError("failed to write language model");
    }

    static KneserNeyModel load(std::istream& in) {
        char magic[4] = {};
        in.read(magic, 4);
        if (!in || std::string(magic, 4) != std::string(kMagic, 4)) throw DataError("not a language model file");
        if (get<std::uint64_t>(in) != kFormatVersion) throw DataError("unsupported language model version");
        KneserNeyModel m;
        m.order_ = get<std::uint64_t>(in);
        m.discount_ = get<double>(in);
        m.vocab_size_ = get<std::uint64_t>(in);
        m.boundary_ = static_cast<TokenId>(get<std::uint64_t>(in));
        if (m.order_ < 1 || m.order_ > 64 || m.vocab_size_ < 1 || m.boundary_ >= m.vocab_size_)
            throw DataError("corrupt language model header");
        m.bits_ = std::max<unsigned>(1, static_cast<unsigned>(std::bit_width(m.vocab_size_ - 1)));
        m.tables_.resize(m.order_);
        m.contexts_.resize(m.order_);
        for (auto& t : m.tables_) {
            const auto n = get<std::uint64_t>(in);
            if (n > (1ULL << 40)) throw DataError("corrupt language model table");
            t.resize(n);
            in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(n * sizeof(Entry)));
            if (!in) throw DataError("truncated language model");
        }
        m.finish();
        return m;
    }

private:
    static constexpr char kMagic[4] = {'W', 'O', 'K', 'N'};
    static constexpr std::uint64_t kFormatVersion = 1;

    template <class T>
    static void put(std::ostream& out, T v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    template <class T>
    static T get(std::istream& in) {
        T v{};
        in.read(reinterpret_cast<char*>(&v), sizeof v);
        if (!in) throw DataError("truncated language model");
        return v;
    }

    void finish() {
        for (const auto& e : tables_[0]) {
            unigram_total_ += e.count;
            ++unigram_types_;
        }
        for (std::size_t k = 2; k <= order_; ++k) {
            auto& ctx = contexts_[k - 1];
            for (const auto& e : tables_[k - 1]) {
                const std::uint64_t ckey = e.key >> bits_;
                if (ctx.empty() || ctx.back().key != ckey) ctx.push_back({ckey, 0, 0});
                ctx.back().total += e.count;
                ++ctx.back().followers;
            }
        }
        if (unigram_total_ == 0) throw DataError("language model has no unigrams");
    }

    struct Entry {
        std::uint64_t key;
        std::uint64_t count;
    };
    struct ContextStats {
        std::uint64_t key;
        std::uint64_t total;
        std::uint64_t followers;
    };

    static std::vector<Entry> count_sorted(std::vector<std::uint64_t>& keys) {
        std::sort(keys.begin(), keys.end());
        std::vector<Entry> out;
        for (std::size_t i = 0; i < keys.size();) {
            std::size_t j = i;
            while (j < keys.size() && keys[j] == keys[i]) ++j;
            out.push_back({keys[i], j - i});
            i = j;
        }
        return out;
    }

    std::uint64_t lookup(std::size_t idx, std::uint64_t key) const {
        const auto& t = tables_[idx];
        const auto it = std::lower_bound(t.begin(), t.end(), key, [](const Entry& e, std::uint64_t k) { return e.key < k; });
        return it != t.end() && it->key == key ? it->count : 0;
    }

    const ContextStats* find_context(std::size_t ctx_len, std::uint64_t key) const {
        const auto& c = contexts_[ctx_len];
        const auto it =
            std::lower_bound(c.begin(), c.end(), key, [](const ContextStats& e, std::uint64_t k) { return e.key < k; });
        return it != c.end() && it->key == key ? &*it : nullptr;
    }

    std::size_t order_ = 1;
    double discount_ = kDefaultDiscount;
    std::size_t vocab_size_ = 0;
    TokenId boundary_ = kEndOfText;
    unsigned bits_ = 1;
    std::vector<std::vector<Entry>> tables_;           // [k-1]: length-k n-grams
    std::vector<std::vector<ContextStats>> contexts_;  // [k-1]: contexts of length k-1
    std::uint64_t unigram_total_ = 0;
    std::uint64_t unigram_types_ = 0;
};

/// p(w | context) = 1 / |V| for every context.
class UniformLanguageModel {
public:
    explicit UniformLanguageModel(std::size_t vocab_size) : vocab_size_(vocab_size) {
        if (vocab_size == 0) throw UsageError("uniform model needs a non-empty vocabulary");
    }
    std::size_t vocab_size() const noexcept { return vocab_size_; }
    TokenId boundary() const noexcept { return kEndOfText; }
    std::size_t order() const noexcept { return 1; }
    double prob(std::span<const TokenId>, TokenId) const { return 1.0 / static_cast<double>(vocab_size_); }
    double log_prob(std::span<const TokenId>, TokenId) const { return -std::log(static_cast<double>(vocab_size_)); }

private:
    std::size_t vocab_size_;
};

}  // namespace wordorder
