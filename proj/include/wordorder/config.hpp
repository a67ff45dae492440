#pragma once

// Experiment configuration in a plain key/value text format:
//
//   # comment
//   languages     = en, fi
//   corpus.en     = data/en.txt        # preprocessed, one sentence per line
//   corpus.fi     = data/fi.txt
//   thetas        = original, -9, -1, 0, 1, 9   # or "default" for the 28-point grid
//   granularity   = word               # word | subword
//   seeds         = 1, 2, 3, 4, 5
//   vocab_sizes   = 16000
//   split.train   = 650000
//   split.valid   = 5000
//   split.test    = 5000
//   split.seed    = 0
//   max_len       = 80
//   bpe.min_frequency = 2
//   lm.order      = 4
//   lm.discount   = 0.75
//   workers       = 1
//   out           = results
//   predictors    = predictors.csv     # optional, used by the pls report
//
// Relative paths are resolved against the directory of the config file.
// Lists are comma separated; unknown keys are rejected.

#include <wordorder/corpus.hpp>
#include <wordorder/errors.hpp>
#include <wordorder/manifest.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace wordorder {

/// 28 points: "original", 0, and +/- 13 log-spaced magnitudes from 0.1 to 9.
inline std::vector<Order> default_theta_grid() {
    std::vector<Order> grid{Order::original()};
    std::vector<double> mags;
    constexpr int kMagnitudes = 13;
    const double lo = std::log(0.1), hi = std::log(9.0);
    for (int i = 0; i < kMagnitudes; ++i) {
        const double v = std::exp(lo + (hi - lo) * i / (kMagnitudes - 1));
        mags.push_back(std::round(v * 1000.0) / 1000.0);
    }
    for (auto it = mags.rbegin(); it != mags.rend(); ++it) grid.emplace_back(-*it);
    grid.emplace_back(0.0);
    for (const double m : mags) grid.emplace_back(m);
    return grid;
}

struct ExperimentConfig {
    std::vector<std::string> languages;
    std::map<std::string, std::string> corpora;  // language -> preprocessed corpus path
    std::vector<Order> thetas = default_theta_grid();
    Granularity granularity = Granularity::word;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::vector<std::size_t> vocab_sizes{16000};
    SplitSizes split;
    std::uint64_t split_seed = 0;
    std::size_t max_len = 80;
    std::size_t min_frequency = 2;
    std::size_t lm_order = 4;
    double lm_discount = 0.75;
    std::size_t workers = 1;
    std::string out_dir = "results";
    std::string predictors;  // optional

    /// Checks invariants and that every corpus path exists.
    void validate() const {
        if (languages.empty()) throw UsageError("config: no languages");
        if (thetas.empty()) throw UsageError("config: theta grid is empty");
        if (seeds.empty()) throw UsageError("config: no seeds");
        if (vocab_sizes.empty()) throw UsageError("config: no vocab sizes");
        for (const auto v : vocab_sizes)
            if (v < 258) throw UsageError("config: vocab size " + std::to_string(v) + " < 258");
        if (workers < 1) throw UsageError("config: workers must be >= 1");
        if (!(lm_discount > 0.0 && lm_discount < 1.0)) throw UsageError("config: lm.discount must lie in (0, 1)");
        for (const auto& lang : languages) {
            const auto it = corpora.find(lang);
            if (it == corpora.end()) throw UsageError("config: no corpus.<" + lang + "> entry");
            if (!std::filesystem::exists(it->second)) throw UsageError("config: corpus not found: " + it->second);
        }
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T>
T parse_unsigned(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
        const auto x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return static_cast<T>(x);
    } catch (const std::exception&) {
        throw UsageError("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
    }
}

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
    ExperimentConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    auto resolve = [&](const std::string& p) {
        const std::filesystem::path path(p);
        return (path.is_relative() && !base_dir.empty() ? base_dir / path : path).lexically_normal().string();
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key == "languages") {
            cfg.languages = detail::split_list(value);
        } else if (key.rfind("corpus.", 0) == 0) {
            cfg.corpora[key.substr(7)] = resolve(value);
        } else if (key == "thetas") {
            if (value == "default") {
                cfg.thetas = default_theta_grid();
            } else {
                cfg.thetas.clear();
                for (const auto& t : detail::split_list(value)) cfg.thetas.push_back(Order::parse(t));
            }
        } else if (key == "granularity") {
            cfg.granularity = parse_granularity(value);
        } else if (key == "seeds") {
            cfg.seeds.clear();
            for (const auto& s : detail::split_list(value)) cfg.seeds.push_back(detail::parse_unsigned<std::uint64_t>(key, s));
        } else if (key == "vocab_sizes") {
            cfg.vocab_sizes.clear();
            for (const auto& s : detail::split_list(value)) cfg.vocab_sizes.push_back(detail::parse_unsigned<std::size_t>(key, s));
        } else if (key == "split.train") {
            cfg.split.train = detail::parse_unsigned<std::size_t>(key, value);
        } else if (key == "split.valid") {
            cfg.split.valid = detail::parse_unsigned<std::size_t>(key, value);
        } else if (key == "split.test") {
            cfg.split.test = detail::parse_unsigned<std::size_t>(key, value);
        } else if (key == "split.seed") {
            cfg.split_seed = detail::parse_unsigned<std::uint64_t>(key, value);
        } else if (key == "max_len") {
            cfg.max_len = detail::parse_unsigned<std::size_t>(key, value);
        } else if (key == "bpe.min_frequency") {
            cfg.min_frequency = detail::parse_unsigned<std::size_t>(key, value);
        } else if (key == "lm.order") {
            cfg.lm_order = detail::parse_unsigned<std::size_t>(key, value);
        } else if (key == "lm.discount") {
            try {
                cfg.lm_discount = std::stod(value);
            } catch (const std::exception&) {
                throw UsageError("config: lm.discount expects a number");
            }
        } else if (key == "workers") {
            cfg.workers = detail::parse_unsigned<std::size_t>(key, value);
        } else if (key == "out") {
            cfg.out_dir = resolve(value);
        } else if (key == "predictors") {
            cfg.predictors = resolve(value);
        } else {
            throw UsageError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config: " + path);
    return parse_config(in, std::filesystem::path(path).parent_path());
}

}  // namespace wordorder
