#pragma once

// Byte-level BPE tokenizer.
//
// Ids 0..255 are the raw bytes, 256 is padding, 257 is end-of-text; id
// 258 + k is produced by merge k. Text is pre-tokenized losslessly into
// chunks of "optional single space + non-whitespace run" (other whitespace
// runs form their own chunks), and merges never cross chunk boundaries.
// Corpus sentences are encoded with one leading space per word (" the",
// " cat"), so a word's segmentation does not depend on its position.

#include <wordorder/corpus.hpp>
#include <wordorder/errors.hpp>

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace wordorder {

using TokenId = std::uint32_t;
using TokenSequence = std::vector<TokenId>;

inline constexpr TokenId kPadToken = 256;
inline constexpr TokenId kEndOfText = 257;
inline constexpr std::size_t kByteVocabSize = 258;

struct TokenizerModel {
    static constexpr int kVersion = 1;

    /// Byte content per id; specials are empty.
    std::vector<std::string> vocab;
    std::vector<std::pair<TokenId, TokenId>> merges;
    std::size_t vocab_size = kByteVocabSize;  // configured upper bound
    std::size_t min_frequency = 2;

    std::size_t size() const noexcept { return vocab.size(); }

    friend bool operator==(const TokenizerModel&, const TokenizerModel&) = default;
};

namespace detail {

inline std::uint64_t pair_key(TokenId a, TokenId b) { return (static_cast<std::uint64_t>(a) << 32) | b; }

inline bool is_ws_byte(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

inline std::vector<std::string> base_vocab() {
    std::vector<std::string> v;
    v.reserve(kByteVocabSize);
    for (int b = 0; b < 256; ++b) v.emplace_back(1, static_cast<char>(b));
    v.emplace_back();  // pad
    v.emplace_back();  // eot
    return v;
}

// Replaces non-overlapping occurrences of (a, b), left to right.
inline bool merge_in_place(std::vector<TokenId>& syms, TokenId a, TokenId b, TokenId merged) {
    bool changed = false;
    std::size_t w = 0;
    for (std::size_t r = 0; r < syms.size();) {
        if (r + 1 < syms.size() && syms[r] == a && syms[r + 1] == b) {
            syms[w++] = merged;
            r += 2;
            changed = true;
        } else {
            syms[w++] = syms[r++];
        }
    }
    syms.resize(w);
    return changed;
}

}  // namespace detail

/// Lossless split of `text` into merge chunks.
inline std::vector<std::string_view> pretokenize(std::string_view text) {
    std::vector<std::string_view> chunks;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t start = i;
        if (detail::is_ws_byte(text[i])) {
            std::size_t j = i;
            while (j < text.size() && detail::is_ws_byte(text[j])) ++j;
            if (j < text.size() && text[j - 1] == ' ') {
                if (j - 1 > i) chunks.push_back(text.substr(i, j - 1 - i));
                start = j - 1;
                i = j;
            } else {
                chunks.push_back(text.substr(i, j - i));
                i = j;
                continue;
            }
        }
        while (i < text.size() && !detail::is_ws_byte(text[i])) ++i;
        chunks.push_back(text.substr(start, i - start));
    }
    return chunks;
}

/// Encodes text with a precomputed merge-rank table. Not thread-safe when
/// caching is enabled; use one encoder per thread.
class BpeEncoder {
public:
    explicit BpeEncoder(const TokenizerModel& model, bool cache = true) : model_(&model), use_cache_(cache) {
        ranks_.reserve(model.merges.size() * 2);
        for (std::size_t k = 0; k < model.merges.size(); ++k) {
            ranks_.emplace(detail::pair_key(model.merges[k].first, model.merges[k].second), static_cast<TokenId>(k));
        }
    }

    const TokenizerModel& model() const noexcept { return *model_; }

    void encode_chunk(std::string_view chunk, TokenSequence& out) {
        if (use_cache_) {
            if (const auto it = cache_.find(std::string(chunk)); it != cache_.end()) {
                out.insert(out.end(), it->second.begin(), it->second.end());
                return;
            }
        }
        std::vector<TokenId> syms(chunk.size());
        for (std::size_t i = 0; i < chunk.size(); ++i) syms[i] = static_cast<unsigned char>(chunk[i]);
        while (syms.size() > 1) {
            TokenId best = ~TokenId{0};
            for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
                if (const auto it = ranks_.find(detail::pair_key(syms[i], syms[i + 1])); it != ranks_.end())
                    best = std::min(best, it->second);
            }
            if (best == ~TokenId{0}) break;
            const auto [a, b] = model_->merges[best];
            detail::merge_in_place(syms, a, b, static_cast<TokenId>(kByteVocabSize + best));
        }
        out.insert(out.end(), syms.begin(), syms.end());
        if (use_cache_) cache_.emplace(std::string(chunk), std::move(syms));
    }

    TokenSequence encode(std::string_view text) {
        TokenSequence out;
        for (const auto chunk : pretokenize(text)) encode_chunk(chunk, out);
        return out;
    }

    /// Encodes a corpus sentence as the text " w1 w2 ... wn" (one leading space per word).
    TokenSequence encode_words(const Sentence& words) {
        TokenSequence out;
        std::string chunk;
        for (const auto& w : words) {
            chunk.assign(1, ' ');
            chunk += w;
            encode_chunk(chunk, out);
        }
        return out;
    }

    /// Number of tokens for the chunk " " + word.
    std::size_t word_token_count(const std::string& word) {
        TokenSequence tmp;
        encode_chunk(" " + word, tmp);
        return tmp.size();
    }

private:
    const TokenizerModel* model_;
    bool use_cache_;
    std::unordered_map<std::uint64_t, TokenId> ranks_;
    std::unordered_map<std::string, std::vector<TokenId>> cache_;
};

inline TokenSequence encode(const TokenizerModel& model, std::string_view text) {
    return BpeEncoder(model, false).encode(text);
}

inline std::string decode(const TokenizerModel& model, std::span<const TokenId> ids) {
    std::string out;
    for (const TokenId id : ids) {
        if (id >= model.vocab.size()) {
            throw DataError("decode: token id " + std::to_string(id) + " out of range (vocab size " +
                            std::to_string(model.vocab.size()) + ")");
        }
        out += model.vocab[id];
    }
    return out;
}

/// Decodes a sequence produced by encode_words back to a space-joined sentence.
inline std::string decode_words(const TokenizerModel& model, std::span<const TokenId> ids) {
    std::string s = decode(model, ids);
    if (!s.empty() && s.front() == ' ') s.erase(0, 1);
    return s;
}

/// Trains from chunk frequencies (chunk bytes -> count).
inline TokenizerModel train_bpe_from_counts(const std::unordered_map<std::string, std::uint64_t>& chunk_counts,
                                            std::size_t vocab_size, std::size_t min_frequency) {
    if (vocab_size < kByteVocabSize) {
        throw UsageError("train_bpe: vocab_size must be >= " + std::to_string(kByteVocabSize) + ", got " +
                         std::to_string(vocab_size));
    }
    if (min_frequency < 1) min_frequency = 1;
    TokenizerModel model;
    model.vocab = detail::base_vocab();
    model.vocab_size = vocab_size;
    model.min_frequency = min_frequency;

    // Sort chunk types so that every internal order is reproducible.
    std::vector<std::pair<std::string, std::uint64_t>> sorted(chunk_counts.begin(), chunk_counts.end());
    std::sort(sorted.begin(), sorted.end());
    struct WordType {
        std::vector<TokenId> syms;
        std::int64_t count;
    };
    std::vector<WordType> words;
    words.reserve(sorted.size());
    for (const auto& [chunk, count] : sorted) {
        WordType w{{}, static_cast<std::int64_t>(count)};
        for (const char c : chunk) w.syms.push_back(static_cast<unsigned char>(c));
        words.push_back(std::move(w));
    }

    std::unordered_map<std::uint64_t, std::int64_t> pair_counts;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> where;
    for (std::uint32_t wi = 0; wi < words.size(); ++wi) {
        const auto& s = words[wi].syms;
        for (std::size_t i = 0; i + 1 < s.size(); ++i) {
            const auto key = detail::pair_key(s[i], s[i + 1]);
            pair_counts[key] += words[wi].count;
            auto& ws = where[key];
            if (ws.empty() || ws.back() != wi) ws.push_back(wi);
        }
    }

    struct Candidate {
        std::int64_t count;
        std::uint64_t key;
    };
    const auto& vocab = model.vocab;
    // Highest count first; ties go to the lexicographically smallest (left bytes, right bytes).
    auto worse = [&vocab](const Candidate& x, const Candidate& y) {
        if (x.count != y.count) return x.count < y.count;
        const auto& xl = vocab[x.key >> 32];
        const auto& yl = vocab[y.key >> 32];
        if (xl != yl) return xl > yl;
        return vocab[x.key & 0xFFFFFFFFu] > vocab[y.key & 0xFFFFFFFFu];
    };
    std::priority_queue<Candidate, std::vector<Candidate>, decltype(worse)> heap(worse);
    for (const auto& [key, count] : pair_counts) heap.push({count, key});

    std::vector<std::uint64_t> touched;
    while (model.vocab.size() < vocab_size && !heap.empty()) {
        const Candidate top = heap.top();
        heap.pop();
        const auto it = pair_counts.find(top.key);
        if (it == pair_counts.end() || it->second != top.count || top.count <= 0) continue;  // stale
        if (static_cast<std::size_t>(top.count) < min_frequency) break;

        const TokenId a = static_cast<TokenId>(top.key >> 32);
        const TokenId b = static_cast<TokenId>(top.key & 0xFFFFFFFFu);
        const TokenId merged = static_cast<TokenId>(model.vocab.size());
        model.merges.emplace_back(a, b);
        model.vocab.push_back(model.vocab[a] + model.vocab[b]);

        touched.clear();
        auto bump = [&](std::uint64_t key, std::int64_t delta) {
            pair_counts[key] += delta;
            touched.push_back(key);
        };
        const std::vector<std::uint32_t> affected = std::move(where[top.key]);
        where.erase(top.key);
        for (const std::uint32_t wi : affected) {
            auto& w = words[wi];
            bool present = false;
            for (std::size_t i = 0; i + 1 < w.syms.size(); ++i)
                if (w.syms[i] == a && w.syms[i + 1] == b) present = true;
            if (!present) continue;
            for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) bump(detail::pair_key(w.syms[i], w.syms[i + 1]), -w.count);
            detail::merge_in_place(w.syms, a, b, merged);
            for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
                const auto key = detail::pair_key(w.syms[i], w.syms[i + 1]);
                bump(key, w.count);
                if (w.syms[i] == merged || w.syms[i + 1] == merged) {
                    auto& ws = where[key];
                    if (ws.empty() || ws.back() != wi) ws.push_back(wi);
                }
            }
        }
        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
        for (const auto key : touched) {
            const auto c = pair_counts[key];
            if (c > 0) {
                heap.push({c, key});
            } else {
                pair_counts.erase(key);
            }
        }
    }
    return model;
}

/// Trains on a corpus; every word contributes the chunk " " + word.
inline TokenizerModel train_bpe(const Corpus& corpus, std::size_t vocab_size, std::size_t min_frequency = 2) {
    if (vocab_size < kByteVocabSize) {
        throw UsageError("train_bpe: vocab_size must be >= " + std::to_string(kByteVocabSize) + ", got " +
                         std::to_string(vocab_size));
    }
    if (corpus.word_count() == 0) throw DataError("train_bpe: corpus is empty");
    std::unordered_map<std::string, std::uint64_t> counts;
    for (const auto& s : corpus.sentences)
        for (const auto& w : s) ++counts[" " + w];
    return train_bpe_from_counts(counts, vocab_size, min_frequency);
}

// --- JSON ------------------------------------------------------------------

namespace detail {
inline std::string to_hex(std::string_view bytes) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    for (const char c : bytes) {
        const auto b = static_cast<unsigned char>(c);
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 15]);
    }
    return out;
}
}  // namespace detail

inline nlohmann::ordered_json tokenizer_to_json(const TokenizerModel& m) {
    nlohmann::ordered_json j;
    j["version"] = TokenizerModel::kVersion;
    j["type"] = "byte-level-bpe";
    j["vocab_size"] = m.vocab_size;
    j["min_frequency"] = m.min_frequency;
    j["special_tokens"] = {{"pad", kPadToken}, {"eot", kEndOfText}};
    auto vocab = nlohmann::ordered_json::array();
    for (const auto& v : m.vocab) vocab.push_back(detail::to_hex(v));
    j["vocab"] = std::move(vocab);
    auto merges = nlohmann::ordered_json::array();
    for (const auto& [a, b] : m.merges) merges.push_back({a, b});
    j["merges"] = std::move(merges);
    return j;
}

inline TokenizerModel tokenizer_from_json(const nlohmann::json& j) {
    try {
        if (j.at("version").get<int>() != TokenizerModel::kVersion) throw DataError("unsupported tokenizer version");
        TokenizerModel m;
        m.vocab = detail::base_vocab();
        m.vocab_size = j.at("vocab_size").get<std::size_t>();
        m.min_frequency = j.at("min_frequency").get<std::size_t>();
        for (const auto& pr : j.at("merges")) {
            const auto a = pr.at(0).get<TokenId>();
            const auto b = pr.at(1).get<TokenId>();
            if (a >= m.vocab.size() || b >= m.vocab.size() || a == kPadToken || a == kEndOfText ||
                b == kPadToken || b == kEndOfText)
                throw DataError("tokenizer: merge refers to an invalid id");
            m.merges.emplace_back(a, b);
            m.vocab.push_back(m.vocab[a] + m.vocab[b]);
        }
        const auto& vocab = j.at("vocab");
        if (vocab.size() != m.vocab.size()) throw DataError("tokenizer: vocab table does not match merges");
        for (std::size_t i = 0; i < m.vocab.size(); ++i) {
            if (vocab[i].get<std::string>() != detail::to_hex(m.vocab[i]))
                throw DataError("tokenizer: vocab entry " + std::to_string(i) + " does not match merges");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed tokenizer: ") + e.what());
    }
}

inline void write_tokenizer_file(const std::string& path, const TokenizerModel& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write tokenizer: " + path);
    out << tokenizer_to_json(m).dump() << '\n';
}

inline TokenizerModel read_tokenizer_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open tokenizer: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("tokenizer " + path + ": " + e.what());
    }
    return tokenizer_from_json(j);
}

// --- corpus-level helpers ------------------------------------------------------

using TokenCorpus = std::vector<TokenSequence>;

inline TokenCorpus encode_corpus(const TokenizerModel& model, const Corpus& corpus) {
    BpeEncoder enc(model);
    TokenCorpus out;
    out.reserve(corpus.size());
    for (const auto& s : corpus.sentences) out.push_back(enc.encode_words(s));
    return out;
}

/// Token-id corpus text format: one sentence per line, ids separated by spaces.
inline void write_token_corpus(std::ostream& out, const TokenCorpus& tokens) {
    for (const auto& s : tokens) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) out << ' ';
            out << s[i];
        }
        out << '\n';
    }
}

inline TokenCorpus read_token_corpus(std::istream& in) {
    TokenCorpus out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        TokenSequence seq;
        const char* p = line.data();
        const char* end = p + line.size();
        while (p < end) {
            if (*p == ' ') {
                ++p;
                continue;
            }
            TokenId v = 0;
            const auto res = std::from_chars(p, end, v);
            if (res.ec != std::errc{} || (res.ptr != end && *res.ptr != ' ')) {
                throw DataError("token corpus line " + std::to_string(line_no) + ": expected space-separated ids");
            }
            seq.push_back(v);
            p = res.ptr;
        }
        out.push_back(std::move(seq));
    }
    return out;
}

}  // namespace wordorder
