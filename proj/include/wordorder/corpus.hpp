#pragma once

// Corpus container, line-level preprocessing, and deterministic splitting.

#include <wordorder/errors.hpp>
#include <wordorder/rng.hpp>
#include <wordorder/utf8.hpp>

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

namespace wordorder {

using Sentence = std::vector<std::string>;

struct Corpus {
    std::vector<Sentence> sentences;
    std::string language;

    std::size_t size() const noexcept { return sentences.size(); }
    bool empty() const noexcept { return sentences.empty(); }

    std::size_t word_count() const noexcept {
        std::size_t n = 0;
        for (const auto& s : sentences) n += s.size();
        return n;
    }

    std::size_t max_length() const noexcept {
        std::size_t n = 0;
        for (const auto& s : sentences) n = std::max(n, s.size());
        return n;
    }

    friend bool operator==(const Corpus&, const Corpus&) = default;
};

inline Sentence split_words(std::string_view line) {
    Sentence words;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) words.emplace_back(line.substr(start, i - start));
    }
    return words;
}

inline std::string join_words(const Sentence& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out.push_back(' ');
        out += words[i];
    }
    return out;
}

/// Reads an already-preprocessed corpus: one sentence per line, words separated
/// by single spaces. Blank lines are skipped.
inline Corpus read_corpus(std::istream& in, std::string language = {}) {
    Corpus c;
    c.language = std::move(language);
    std::string line;
    while (std::getline(in, line)) {
        auto words = split_words(line);
        if (!words.empty()) c.sentences.push_back(std::move(words));
    }
    return c;
}

inline Corpus read_corpus_file(const std::string& path, std::string language = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open corpus file: " + path);
    return read_corpus(in, std::move(language));
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
    for (const auto& s : corpus.sentences) out << join_words(s) << '\n';
}

inline void write_corpus_file(const std::string& path, const Corpus& corpus) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write corpus file: " + path);
    write_corpus(out, corpus);
}

// ---------------------------------------------------------------------------
// Preprocessing rules

enum class RuleKind {
    drop_if_match,          // regex: drop the line when it matches
    regex_replace,          // regex -> replacement (ECMAScript, byte-level)
    repair_unicode,         // U+00AD -> '-', delete U+FFFD, U+200B, U+FEFF
    strip_brackets_quotes,  // delete brackets, quotes, apostrophes; keep enclosed text
    normalize_punctuation,  // ';' ':' outside words, bullets, dashes -> separators
    collapse_whitespace,
    lowercase,
    strip_punctuation,      // trim punctuation from word edges, drop punctuation-only words
};

NLOHMANN_JSON_SERIALIZE_ENUM(RuleKind, {
                                           {RuleKind::drop_if_match, "drop_if_match"},
                                           {RuleKind::regex_replace, "regex_replace"},
                                           {RuleKind::repair_unicode, "repair_unicode"},
                                           {RuleKind::strip_brackets_quotes, "strip_brackets_quotes"},
                                           {RuleKind::normalize_punctuation, "normalize_punctuation"},
                                           {RuleKind::collapse_whitespace, "collapse_whitespace"},
                                           {RuleKind::lowercase, "lowercase"},
                                           {RuleKind::strip_punctuation, "strip_punctuation"},
                                       })

struct PreprocessRule {
    std::string name;
    RuleKind kind = RuleKind::collapse_whitespace;
    std::string pattern;
    std::string replacement;
    /// Language tags the rule applies to; empty means all languages.
    std::vector<std::string> languages;
};

inline void to_json(nlohmann::json& j, const PreprocessRule& r) {
    j = {{"name", r.name}, {"kind", r.kind}};
    if (!r.pattern.empty()) j["pattern"] = r.pattern;
    if (!r.replacement.empty()) j["replacement"] = r.replacement;
    if (!r.languages.empty()) j["languages"] = r.languages;
}

inline void from_json(const nlohmann::json& j, PreprocessRule& r) {
    r.name = j.value("name", std::string{});
    r.kind = j.at("kind").get<RuleKind>();
    r.pattern = j.value("pattern", std::string{});
    r.replacement = j.value("replacement", std::string{});
    r.languages = j.value("languages", std::vector<std::string>{});
}

struct PreprocessConfig {
    std::string language;
    std::size_t max_words = 80;
    std::vector<PreprocessRule> rules;
};

/// The shared rule set, in application order, plus the Finnish abbreviation fix.
inline std::vector<PreprocessRule> default_rules() {
    using K = RuleKind;
    return {
        {"markup-line", K::drop_if_match, R"(^\s*<[^>]*>\s*$)", "", {}},
        {"url-line", K::drop_if_match, R"((https?://|www\.)\S)", "", {}},
        {"unicode-artifacts", K::repair_unicode, "", "", {}},
        {"language-label", K::regex_replace, R"(^\s*\([A-Z]{2}\)\s*)", "", {}},
        {"speaker-label", K::regex_replace, R"(^\s*(Mr|Mrs|Ms|Madam)\.?\s+President\s*[,.:]\s*$)", "", {}},
        {"fi-abbreviation-suffix", K::regex_replace, R"(((?:[A-Z]|Ä|Ö|Å){2,}): (\S))", "$1:$2", {"fi"}},
        {"brackets-quotes", K::strip_brackets_quotes, "", "", {}},
        {"punctuation", K::normalize_punctuation, "", "", {}},
        {"whitespace", K::collapse_whitespace, "", "", {}},
        {"lowercase", K::lowercase, "", "", {}},
        {"strip-punctuation", K::strip_punctuation, "", "", {}},
    };
}

inline PreprocessConfig default_preprocess_config(std::string language = {}) {
    return {std::move(language), 80, default_rules()};
}

struct PreprocessReport {
    std::size_t lines_read = 0;
    std::size_t kept = 0;
    std::size_t invalid_utf8 = 0;
    std::size_t dropped_by_rule = 0;
    std::size_t dropped_empty = 0;
    std::size_t dropped_too_long = 0;
};

struct PreprocessResult {
    Corpus corpus;
    PreprocessReport report;
};

namespace detail {

inline bool is_bracket_or_quote(char32_t c) {
    switch (c) {
        case U'(': case U')': case U'[': case U']': case U'{': case U'}':
        case U'"': case U'\'': case U'`': case 0xB4: case 0xAB: case 0xBB:
        case 0x2018: case 0x2019: case 0x201A: case 0x201B:
        case 0x201C: case 0x201D: case 0x201E: case 0x201F:
        case 0x2039: case 0x203A:
            return true;
        default:
            return false;
    }
}

inline std::vector<char32_t> normalize_punctuation(const std::vector<char32_t>& in) {
    std::vector<char32_t> out;
    out.reserve(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        const char32_t c = in[i];
        const bool inside = i > 0 && i + 1 < in.size() && utf8::is_alnum_like(in[i - 1]) &&
                            utf8::is_alnum_like(in[i + 1]);
        if ((c == U';' || c == U':') && !inside) {
            out.push_back(U' ');
        } else if (c == U',' && !inside) {
            out.push_back(U' ');
        } else if (c == 0x2022 || c == 0x25CF || c == 0x25AA || c == 0x00B7 || c == 0x2023) {
            out.push_back(U' ');
        } else if (c == 0x2013 || c == 0x2014 || c == 0x2015 || c == 0x2212) {
            // Dashes between words become hyphens; free-standing ones separate words.
            if (inside) {
                out.push_back(U'-');
            } else {
                out.push_back(U' ');
            }
        } else {
            out.push_back(c);
        }
    }
    return out;
}

inline bool rule_applies(const PreprocessRule& r, const std::string& language) {
    return r.languages.empty() || std::find(r.languages.begin(), r.languages.end(), language) != r.languages.end();
}

}  // namespace detail

/// Compiled, reusable form of a PreprocessConfig.
class Preprocessor {
public:
    explicit Preprocessor(PreprocessConfig config) : config_(std::move(config)) {
        for (const auto& r : config_.rules) {
            if (!detail::rule_applies(r, config_.language)) continue;
            Step step{r, {}};
            if (r.kind == RuleKind::drop_if_match || r.kind == RuleKind::regex_replace) {
                try {
                    step.re = std::regex(r.pattern, std::regex::ECMAScript | std::regex::optimize);
                } catch (const std::regex_error& e) {
                    throw UsageError("preprocess rule '" + r.name + "': bad regex: " + e.what());
                }
            }
            steps_.push_back(std::move(step));
        }
    }

    const PreprocessConfig& config() const noexcept { return config_; }

    enum class Outcome { kept, invalid_utf8, dropped_by_rule, empty, too_long };

    /// Cleans one raw line. On Outcome::kept `words` holds the result.
    Outcome clean(std::string_view raw, Sentence& words) const {
        words.clear();
        std::string line(raw);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!utf8::valid(line)) return Outcome::invalid_utf8;
        for (const auto& step : steps_) {
            switch (step.rule.kind) {
                case RuleKind::drop_if_match:
                    if (std::regex_search(line, step.re)) return Outcome::dropped_by_rule;
                    break;
                case RuleKind::regex_replace:
                    line = std::regex_replace(line, step.re, step.rule.replacement);
                    break;
                case RuleKind::repair_unicode: {
                    std::vector<char32_t> out;
                    for (const char32_t c : utf8::code_points(line)) {
                        if (c == 0xAD) {
                            out.push_back(U'-');
                        } else if (c != 0xFFFD && c != 0x200B && c != 0xFEFF) {
                            out.push_back(c);
                        }
                    }
                    line = utf8::encode(out);
                    break;
                }
                case RuleKind::strip_brackets_quotes: {
                    const auto cps = utf8::code_points(line);
                    std::vector<char32_t> out;
                    for (std::size_t i = 0; i < cps.size(); ++i) {
                        const char32_t c = cps[i];
                        // an apostrophe between letters belongs to the word (it's, l'homme)
                        const bool apostrophe = (c == U'\'' || c == 0x2019) && i > 0 && i + 1 < cps.size() &&
                                                utf8::is_alnum_like(cps[i - 1]) && utf8::is_alnum_like(cps[i + 1]);
                        if (apostrophe || !detail::is_bracket_or_quote(c)) out.push_back(c);
                    }
                    line = utf8::encode(out);
                    break;
                }
                case RuleKind::normalize_punctuation:
                    line = utf8::encode(detail::normalize_punctuation(utf8::code_points(line)));
                    break;
                case RuleKind::collapse_whitespace: {
                    std::string out;
                    bool pending = false;
                    for (const char32_t c : utf8::code_points(line)) {
                        if (utf8::is_space(c)) {
                            pending = !out.empty();
                        } else {
                            if (pending) out.push_back(' ');
                            pending = false;
                            utf8::append(out, c);
                        }
                    }
                    line = std::move(out);
                    break;
                }
                case RuleKind::lowercase: {
                    auto cps = utf8::code_points(line);
                    for (auto& c : cps) c = utf8::to_lower(c);
                    line = utf8::encode(cps);
                    break;
                }
                case RuleKind::strip_punctuation: {
                    std::string out;
                    for (const auto& w : split_words(line)) {
                        const auto cps = utf8::code_points(w);
                        std::size_t b = 0, e = cps.size();
                        while (b < e && utf8::is_punct(cps[b])) ++b;
                        while (e > b && utf8::is_punct(cps[e - 1])) --e;
                        if (b == e) continue;
                        if (!out.empty()) out.push_back(' ');
                        out += utf8::encode(std::vector<char32_t>(cps.begin() + static_cast<std::ptrdiff_t>(b),
                                                                   cps.begin() + static_cast<std::ptrdiff_t>(e)));
                    }
                    line = std::move(out);
                    break;
                }
            }
        }
        words = split_words(line);
        if (words.empty()) return Outcome::empty;
        if (words.size() > config_.max_words) return Outcome::too_long;
        return Outcome::kept;
    }

private:
    struct Step {
        PreprocessRule rule;
        std::regex re;
    };
    PreprocessConfig config_;
    std::vector<Step> steps_;
};

inline PreprocessResult preprocess(std::istream& raw_lines, const PreprocessConfig& config) {
    const Preprocessor pp(config);
    PreprocessResult result;
    result.corpus.language = config.language;
    std::string line;
    Sentence words;
    while (std::getline(raw_lines, line)) {
        ++result.report.lines_read;
        switch (pp.clean(line, words)) {
            case Preprocessor::Outcome::kept:
                ++result.report.kept;
                result.corpus.sentences.push_back(words);
                break;
            case Preprocessor::Outcome::invalid_utf8: ++result.report.invalid_utf8; break;
            case Preprocessor::Outcome::dropped_by_rule: ++result.report.dropped_by_rule; break;
            case Preprocessor::Outcome::empty: ++result.report.dropped_empty; break;
            case Preprocessor::Outcome::too_long: ++result.report.dropped_too_long; break;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitSizes {
    std::size_t train = 650000;
    std::size_t valid = 5000;
    std::size_t test = 5000;
};

struct CorpusSplit {
    Corpus train;
    Corpus valid;
    Corpus test;
};

/// Seeded disjoint split. Sentences are drawn by a Fisher-Yates shuffle of the
/// indices; each part keeps the original corpus order.
inline CorpusSplit split(const Corpus& corpus, const SplitSizes& sizes, std::uint64_t seed) {
    const std::size_t need = sizes.train + sizes.valid + sizes.test;
    if (corpus.size() < need) {
        throw DataError("split: corpus has " + std::to_string(corpus.size()) + " sentences but " +
                        std::to_string(need) + " are required (short by " + std::to_string(need - corpus.size()) +
                        ")");
    }
    std::vector<std::size_t> idx(corpus.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(substream_seed(seed, 0x5EED5));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);

    auto take = [&](std::size_t from, std::size_t count) {
        std::vector<std::size_t> part(idx.begin() + static_cast<std::ptrdiff_t>(from),
                                      idx.begin() + static_cast<std::ptrdiff_t>(from + count));
        std::sort(part.begin(), part.end());
        Corpus c;
        c.language = corpus.language;
        c.sentences.reserve(count);
        for (const auto i : part) c.sentences.push_back(corpus.sentences[i]);
        return c;
    };
    return {take(0, sizes.train), take(sizes.train, sizes.valid), take(sizes.train + sizes.valid, sizes.test)};
}

}  // namespace wordorder
