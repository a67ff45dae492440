#pragma once

// Permutation manifests (one Mallows permutation per sequence length) and
// the shuffle / unshuffle operations that apply them.

#include <wordorder/corpus.hpp>
#include <wordorder/errors.hpp>
#include <wordorder/mallows.hpp>
#include <wordorder/rng.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace wordorder {

enum class Granularity { word, subword };

inline std::string to_string(Granularity g) { return g == Granularity::word ? "word" : "subword"; }

inline Granularity parse_granularity(const std::string& s) {
    if (s == "word") return Granularity::word;
    if (s == "subword") return Granularity::subword;
    throw UsageError("granularity must be 'word' or 'subword', got '" + s + "'");
}

/// Order parameter; an empty value is the original order (theta -> +inf).
class Order {
public:
    Order() = default;  // original
    explicit Order(double theta) : theta_(theta) {
        if (!std::isfinite(theta)) throw UsageError("theta must be finite; use 'original' for the unshuffled order");
    }
    static Order original() { return Order(); }

    bool is_original() const noexcept { return !theta_.has_value(); }
    double theta() const {
        if (!theta_) throw UsageError("order 'original' has no finite theta");
        return *theta_;
    }

    /// "original" or the shortest round-tripping decimal form of theta.
    std::string str() const {
        if (!theta_) return "original";
        return nlohmann::json(*theta_).dump();
    }

    static Order parse(const std::string& s) {
        if (s == "original" || s == "orig" || s == "inf" || s == "+inf") return original();
        std::size_t pos = 0;
        double v = 0;
        try {
            v = std::stod(s, &pos);
        } catch (const std::exception&) {
            throw UsageError("cannot parse theta '" + s + "'");
        }
        if (pos != s.size()) throw UsageError("cannot parse theta '" + s + "'");
        return Order(v);
    }

    friend bool operator==(const Order&, const Order&) = default;

private:
    std::optional<double> theta_;
};

struct PermutationManifest {
    static constexpr int kVersion = 1;

    Order order;
    Granularity granularity = Granularity::word;
    std::uint64_t seed = 0;
    std::size_t max_len = 0;
    /// perms[n - 1] has length n.
    std::vector<Permutation> perms;

    const Permutation& for_length(std::size_t n) const {
        if (n < 1 || n > perms.size()) {
            throw DataError("sequence length " + std::to_string(n) + " not covered by manifest (max_len " +
                            std::to_string(max_len) + ")");
        }
        return perms[n - 1];
    }

    friend bool operator==(const PermutationManifest&, const PermutationManifest&) = default;
};

/// One Mallows sample per length 1..max_len. Length n draws from substream
/// (seed, n), so raising max_len leaves earlier permutations unchanged.
inline PermutationManifest build_manifest(Order order, std::size_t max_len, Granularity granularity,
                                          std::uint64_t seed) {
    if (max_len < 1) throw UsageError("build_manifest: max_len must be >= 1");
    PermutationManifest m{order, granularity, seed, max_len, {}};
    m.perms.reserve(max_len);
    for (std::size_t n = 1; n <= max_len; ++n) {
        if (order.is_original()) {
            m.perms.push_back(Permutation::identity(n));
        } else {
            Rng rng = Rng::substream(seed, n);
            m.perms.push_back(sample_permutation(MallowsDistribution(n, order.theta()), rng));
        }
    }
    return m;
}

// --- JSON ------------------------------------------------------------------

inline nlohmann::ordered_json manifest_to_json(const PermutationManifest& m) {
    nlohmann::ordered_json j;
    j["version"] = PermutationManifest::kVersion;
    if (m.order.is_original()) {
        j["theta"] = "original";
    } else {
        j["theta"] = m.order.theta();
    }
    j["granularity"] = to_string(m.granularity);
    j["seed"] = m.seed;
    j["rng"] = Rng::kAlgorithm;
    j["max_len"] = m.max_len;
    nlohmann::ordered_json perms = nlohmann::ordered_json::object();
    for (const auto& p : m.perms) {
        perms[std::to_string(p.size())] = std::vector<std::uint32_t>(p.mapping().begin(), p.mapping().end());
    }
    j["perms"] = std::move(perms);
    return j;
}

inline PermutationManifest manifest_from_json(const nlohmann::json& j) {
    try {
        if (j.at("version").get<int>() != PermutationManifest::kVersion) {
            throw DataError("unsupported manifest version " + j.at("version").dump());
        }
        PermutationManifest m;
        const auto& t = j.at("theta");
        m.order = t.is_string() ? Order::parse(t.get<std::string>()) : Order(t.get<double>());
        m.granularity = parse_granularity(j.at("granularity").get<std::string>());
        m.seed = j.at("seed").get<std::uint64_t>();
        m.max_len = j.at("max_len").get<std::size_t>();
        const auto& perms = j.at("perms");
        if (perms.size() != m.max_len) throw DataError("manifest: expected one permutation per length 1..max_len");
        for (std::size_t n = 1; n <= m.max_len; ++n) {
            auto p = Permutation(perms.at(std::to_string(n)).get<std::vector<std::uint32_t>>());
            if (p.size() != n) throw DataError("manifest: permutation for length " + std::to_string(n) + " has wrong size");
            m.perms.push_back(std::move(p));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    } catch (const UsageError& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    }
}

inline std::string dump_manifest(const PermutationManifest& m) { return manifest_to_json(m).dump() + "\n"; }

inline void write_manifest_file(const std::string& path, const PermutationManifest& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write manifest: " + path);
    out << dump_manifest(m);
}

inline PermutationManifest read_manifest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open manifest: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest " + path + ": " + e.what());
    }
    return manifest_from_json(j);
}

// --- shuffling ---------------------------------------------------------------

/// Reorders every sequence by the manifest permutation of its length.
template <class T>
std::vector<std::vector<T>> permute_sequences(const std::vector<std::vector<T>>& seqs,
                                              const PermutationManifest& manifest) {
    std::vector<std::vector<T>> out;
    out.reserve(seqs.size());
    for (const auto& s : seqs) {
        if (s.empty()) {
            out.emplace_back();
            continue;
        }
        out.push_back(manifest.for_length(s.size()).apply(std::span<const T>(s)));
    }
    return out;
}

template <class T>
std::vector<std::vector<T>> unpermute_sequences(const std::vector<std::vector<T>>& seqs,
                                                const PermutationManifest& manifest) {
    std::vector<std::vector<T>> out;
    out.reserve(seqs.size());
    for (const auto& s : seqs) {
        if (s.empty()) {
            out.emplace_back();
            continue;
        }
        out.push_back(manifest.for_length(s.size()).unapply(std::span<const T>(s)));
    }
    return out;
}

/// Word-granularity shuffle.
inline Corpus apply_shuffle(const Corpus& corpus, const PermutationManifest& manifest) {
    if (manifest.granularity != Granularity::word) {
        throw UsageError("apply_shuffle: subword manifests need a tokenizer (use the token-sequence overload)");
    }
    return {permute_sequences(corpus.sentences, manifest), corpus.language};
}

inline Corpus invert_shuffle(const Corpus& corpus, const PermutationManifest& manifest) {
    return {unpermute_sequences(corpus.sentences, manifest), corpus.language};
}

}  // namespace wordorder
