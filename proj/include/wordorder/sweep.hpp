#pragma once

// Experiment sweeps over (language, theta, seed, vocab size) cells and the
// append-only result store they write to.
//
// The store is newline-delimited JSON, one object per finished cell attempt.
// The latest record for a key wins; cells whose latest record has status
// "ok" are skipped on rerun. A truncated final line (e.g. after a crash) is
// ignored when loading.

#include <wordorder/bpe.hpp>
#include <wordorder/config.hpp>
#include <wordorder/corpus.hpp>
#include <wordorder/manifest.hpp>
#include <wordorder/ngram_lm.hpp>
#include <wordorder/subword_shuffle.hpp>
#include <wordorder/surprisal.hpp>

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace wordorder {

struct CellKey {
    std::string language;
    Granularity granularity = Granularity::word;
    Order order;
    std::uint64_t seed = 0;
    std::size_t vocab_size = 16000;
    std::size_t lm_order = 4;
    double lm_discount = 0.75;

    std::string str() const {
        return language + "|" + to_string(granularity) + "|" + order.str() + "|" + std::to_string(seed) + "|" +
               std::to_string(vocab_size) + "|" + std::to_string(lm_order) + "|" + nlohmann::json(lm_discount).dump();
    }
};

struct ResultRecord {
    CellKey cell;
    bool ok = false;
    double S = 0.0;
    std::uint64_t N = 0;
    std::uint64_t train_tokens = 0;
    double seconds = 0.0;
    std::string error;
};

inline nlohmann::ordered_json record_to_json(const ResultRecord& r) {
    nlohmann::ordered_json j;
    j["key"] = r.cell.str();
    j["language"] = r.cell.language;
    j["granularity"] = to_string(r.cell.granularity);
    if (r.cell.order.is_original()) {
        j["theta"] = "original";
    } else {
        j["theta"] = r.cell.order.theta();
    }
    j["seed"] = r.cell.seed;
    j["vocab_size"] = r.cell.vocab_size;
    j["lm_order"] = r.cell.lm_order;
    j["lm_discount"] = r.cell.lm_discount;
    j["status"] = r.ok ? "ok" : "error";
    if (r.ok) {
        j["S"] = r.S;
        j["N"] = r.N;
        j["train_tokens"] = r.train_tokens;
    } else {
        j["error"] = r.error;
    }
    j["seconds"] = r.seconds;
    return j;
}

inline ResultRecord record_from_json(const nlohmann::json& j) {
    ResultRecord r;
    r.cell.language = j.at("language").get<std::string>();
    r.cell.granularity = parse_granularity(j.at("granularity").get<std::string>());
    const auto& t = j.at("theta");
    r.cell.order = t.is_string() ? Order::parse(t.get<std::string>()) : Order(t.get<double>());
    r.cell.seed = j.at("seed").get<std::uint64_t>();
    r.cell.vocab_size = j.at("vocab_size").get<std::size_t>();
    r.cell.lm_order = j.at("lm_order").get<std::size_t>();
    r.cell.lm_discount = j.at("lm_discount").get<double>();
    r.ok = j.at("status").get<std::string>() == "ok";
    if (r.ok) {
        r.S = j.at("S").get<double>();
        r.N = j.at("N").get<std::uint64_t>();
        r.train_tokens = j.value("train_tokens", std::uint64_t{0});
    } else {
        r.error = j.value("error", std::string{});
    }
    r.seconds = j.value("seconds", 0.0);
    return r;
}

class ResultStore {
public:
    explicit ResultStore(std::filesystem::path path) : path_(std::move(path)) {
        std::ifstream in(path_);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                auto rec = record_from_json(nlohmann::json::parse(line));
                latest_[rec.cell.str()] = records_.size();
                records_.push_back(std::move(rec));
            } catch (const std::exception&) {
                ++skipped_lines_;
            }
        }
    }

    const std::filesystem::path& path() const noexcept { return path_; }

    bool completed(const CellKey& key) const {
        std::lock_guard lock(mu_);
        const auto it = latest_.find(key.str());
        return it != latest_.end() && records_[it->second].ok;
    }

    void append(const ResultRecord& rec) {
        std::lock_guard lock(mu_);
        if (!path_.parent_path().empty()) std::filesystem::create_directories(path_.parent_path());
        std::ofstream out(path_, std::ios::app | std::ios::binary);
        if (!out) throw DataError("cannot append to result store " + path_.string());
        out << record_to_json(rec).dump() << '\n';
        out.flush();
        latest_[rec.cell.str()] = records_.size();
        records_.push_back(rec);
    }

    /// Latest record per key, sorted by key.
    std::vector<ResultRecord> latest() const {
        std::lock_guard lock(mu_);
        std::vector<ResultRecord> out;
        for (const auto& [key, idx] : latest_) out.push_back(records_[idx]);
        return out;
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return records_.size();
    }
    std::size_t skipped_lines() const noexcept { return skipped_lines_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mu_;
    std::vector<ResultRecord> records_;
    std::map<std::string, std::size_t> latest_;
    std::size_t skipped_lines_ = 0;
};

inline std::filesystem::path store_path(const ExperimentConfig& cfg) {
    return std::filesystem::path(cfg.out_dir) / "store.ndjson";
}

/// Result of one cell computation (train tokenizer -> shuffle -> LM -> score).
struct CellOutcome {
    double S = 0.0;
    std::uint64_t N = 0;
    std::uint64_t train_tokens = 0;
};

/// Runs one cell on an already split corpus.
inline CellOutcome run_cell(const CorpusSplit& data, const CellKey& key, const TokenizerModel& tokenizer,
                            std::size_t max_len) {
    TokenCorpus train_tokens, test_tokens;
    if (key.granularity == Granularity::word) {
        const auto manifest = build_manifest(key.order, max_len, Granularity::word, key.seed);
        train_tokens = apply_shuffle(data.train, manifest, tokenizer);
        test_tokens = apply_shuffle(data.test, manifest, tokenizer);
    } else {
        const auto train_enc = encode_corpus(tokenizer, data.train);
        const auto test_enc = encode_corpus(tokenizer, data.test);
        const std::size_t len = std::max({max_token_length(train_enc), max_token_length(test_enc), std::size_t{1}});
        const auto manifest = build_manifest(key.order, len, Granularity::subword, key.seed);
        train_tokens = apply_shuffle(train_enc, manifest);
        test_tokens = apply_shuffle(test_enc, manifest);
    }
    const auto lm = KneserNeyModel::train(train_tokens, tokenizer.size(), key.lm_order, key.lm_discount);
    const auto res = surprisal(lm, test_tokens);
    std::uint64_t n_train = 0;
    for (const auto& s : train_tokens) n_train += s.size() + 1;
    return {res.S, res.N, n_train};
}

struct SweepSummary {
    std::size_t computed = 0;
    std::size_t skipped = 0;
    std::size_t failed = 0;
};

inline std::vector<CellKey> sweep_cells(const ExperimentConfig& cfg) {
    std::vector<CellKey> cells;
    for (const auto& lang : cfg.languages)
        for (const auto v : cfg.vocab_sizes)
            for (const auto& t : cfg.thetas)
                for (const auto s : cfg.seeds)
                    cells.push_back({lang, cfg.granularity, t, s, v, cfg.lm_order, cfg.lm_discount});
    return cells;
}

/// Runs every pending cell of the sweep. Failures are recorded and the sweep
/// continues. `log` receives one progress line per cell.
inline SweepSummary run_sweep(const ExperimentConfig& cfg, ResultStore& store,
                              const std::function<void(const std::string&)>& log = {}) {
    cfg.validate();
    SweepSummary summary;
    std::vector<CellKey> pending;
    for (auto& c : sweep_cells(cfg)) {
        if (store.completed(c)) {
            ++summary.skipped;
        } else {
            pending.push_back(std::move(c));
        }
    }
    if (pending.empty()) return summary;

    // Splits and tokenizers are shared by all cells of a language. Word-level
    // shuffles keep each sentence's word multiset, so the tokenizer trained on
    // the original training split is the one every word-level variant would train.
    std::map<std::string, CorpusSplit> splits;
    std::map<std::pair<std::string, std::size_t>, TokenizerModel> tokenizers;
    std::map<std::string, std::string> prep_errors;
    for (const auto& c : pending) {
        if (prep_errors.count(c.language)) continue;
        try {
            if (!splits.count(c.language)) {
                const auto corpus = read_corpus_file(cfg.corpora.at(c.language), c.language);
                splits.emplace(c.language, split(corpus, cfg.split, cfg.split_seed));
            }
            const auto tk = std::make_pair(c.language, c.vocab_size);
            if (!tokenizers.count(tk)) {
                tokenizers.emplace(tk, train_bpe(splits.at(c.language).train, c.vocab_size, cfg.min_frequency));
            }
        } catch (const std::exception& e) {
            prep_errors[c.language] = e.what();
        }
    }

    std::mutex log_mu;
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> computed{0}, failed{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < pending.size(); i = next++) {
            const auto& c = pending[i];
            ResultRecord rec;
            rec.cell = c;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                if (const auto it = prep_errors.find(c.language); it != prep_errors.end()) throw DataError(it->second);
                const auto out = run_cell(splits.at(c.language), c, tokenizers.at({c.language, c.vocab_size}), cfg.max_len);
                rec.ok = true;
                rec.S = out.S;
                rec.N = out.N;
                rec.train_tokens = out.train_tokens;
            } catch (const std::exception& e) {
                rec.ok = false;
                rec.error = e.what();
            }
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            store.append(rec);
            (rec.ok ? computed : failed)++;
            if (log) {
                std::lock_guard lock(log_mu);
                log(c.str() + (rec.ok ? "  S=" + detail::format_double(rec.S) : "  FAILED: " + rec.error));
            }
        }
    };
    const std::size_t n_workers = std::min(cfg.workers, pending.size());
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    }
    summary.computed = computed;
    summary.failed = failed;
    return summary;
}

/// Successful records as surprisal results; `variant` is the language tag.
inline std::vector<SurprisalResult> to_surprisal_results(const std::vector<ResultRecord>& records) {
    std::vector<SurprisalResult> out;
    for (const auto& r : records)
        if (r.ok) out.push_back({r.cell.language, r.cell.order, r.cell.seed, r.S, r.N, std::nullopt, {}});
    return out;
}

}  // namespace wordorder
