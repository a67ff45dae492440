#pragma once

// Figure-ready CSV tables from a result store.
//
// Kinds and their columns:
//   surprisal  language,theta,median_S,q25,q75
//   delta      language,theta,median_dS,q25,q75
//   irregular  language,median_S_orig,q25_S_orig,q75_S_orig,median_dS_irreg,q25_dS_irreg,q75_dS_irreg
//   vocab      language,vocab_size,theta,median_S,q25,q75
//   asymmetry  language,theta,asymmetry      (last row: all,all,<median>)
//   pls        section,row,column,value      (long format, see pls_tables)
//   coverage   language,unit,rank,coverage
// Aggregates are over seeds (median and 25th/75th percentiles). Rows are
// sorted by language, then vocab size, then theta ("original" last).

#include <wordorder/config.hpp>
#include <wordorder/pls.hpp>
#include <wordorder/stats.hpp>
#include <wordorder/surprisal.hpp>
#include <wordorder/sweep.hpp>
#include <wordorder/vocab_stats.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace wordorder {

struct ReportOptions {
    std::optional<std::size_t> vocab_size;
    std::optional<Granularity> granularity;
    int max_components = 5;
    std::size_t r_max = kDefaultRankMax;
};

namespace detail {

inline std::string fmt(double v) { return format_double(v); }

struct CellGroupKey {
    std::string language;
    std::size_t vocab_size;
    std::pair<int, double> order_key;
    auto operator<=>(const CellGroupKey&) const = default;
};

// Picks the (granularity, vocab size) slice a single-panel report refers to.
inline std::vector<ResultRecord> select_slice(const std::vector<ResultRecord>& records, const ReportOptions& opt,
                                              const ExperimentConfig* cfg, bool all_vocab_sizes = false) {
    std::set<std::size_t> sizes;
    std::set<std::string> grans;
    for (const auto& r : records) {
        if (!r.ok) continue;
        sizes.insert(r.cell.vocab_size);
        grans.insert(to_string(r.cell.granularity));
    }
    std::optional<Granularity> g = opt.granularity;
    if (!g) {
        if (grans.size() == 1) {
            g = parse_granularity(*grans.begin());
        } else if (cfg) {
            g = cfg->granularity;
        } else if (grans.size() > 1) {
            throw UsageError("report: store mixes granularities; choose one");
        }
    }
    std::optional<std::size_t> v = opt.vocab_size;
    if (!v && !all_vocab_sizes) {
        if (sizes.size() == 1) {
            v = *sizes.begin();
        } else if (cfg && !cfg->vocab_sizes.empty()) {
            v = cfg->vocab_sizes.front();
        } else if (sizes.size() > 1) {
            throw UsageError("report: store has several vocab sizes; choose one");
        }
    }
    std::vector<ResultRecord> out;
    for (const auto& r : records) {
        if (!r.ok) continue;
        if (g && r.cell.granularity != *g) continue;
        if (v && r.cell.vocab_size != *v) continue;
        out.push_back(r);
    }
    if (out.empty()) throw DataError("report: no successful results for the requested selection");
    return out;
}

inline std::map<CellGroupKey, std::pair<Order, std::vector<double>>> group_values(
    const std::vector<ResultRecord>& recs, const std::function<std::optional<double>(const ResultRecord&)>& value) {
    std::map<CellGroupKey, std::pair<Order, std::vector<double>>> groups;
    for (const auto& r : recs) {
        const auto v = value(r);
        if (!v) continue;
        auto& g = groups[{r.cell.language, r.cell.vocab_size, order_sort_key(r.cell.order)}];
        g.first = r.cell.order;
        g.second.push_back(*v);
    }
    return groups;
}

// S_orig per (language, vocab size, seed).
inline std::map<std::tuple<std::string, std::size_t, std::uint64_t>, double> baselines(const std::vector<ResultRecord>& recs) {
    std::map<std::tuple<std::string, std::size_t, std::uint64_t>, double> base;
    for (const auto& r : recs)
        if (r.cell.order.is_original()) base[{r.cell.language, r.cell.vocab_size, r.cell.seed}] = r.S;
    return base;
}

}  // namespace detail

/// Median S per (language, theta) over seeds, one row per language and theta
/// columns in grid order. Used as the PLS response matrix.
inline pls::LabeledMatrix response_matrix(const std::vector<ResultRecord>& recs) {
    std::set<std::string> languages;
    std::map<std::pair<int, double>, Order> orders;
    std::map<std::pair<std::string, std::pair<int, double>>, std::vector<double>> values;
    for (const auto& r : recs) {
        languages.insert(r.cell.language);
        const auto ok = detail::order_sort_key(r.cell.order);
        orders.emplace(ok, r.cell.order);
        values[{r.cell.language, ok}].push_back(r.S);
    }
    pls::LabeledMatrix m;
    m.label_header = "language";
    m.rows.assign(languages.begin(), languages.end());
    for (const auto& [k, o] : orders) m.columns.push_back(o.str());
    m.values.resize(static_cast<Eigen::Index>(m.rows.size()), static_cast<Eigen::Index>(orders.size()));
    Eigen::Index i = 0;
    for (const auto& lang : m.rows) {
        Eigen::Index j = 0;
        for (const auto& [k, o] : orders) {
            const auto it = values.find({lang, k});
            if (it == values.end()) throw DataError("response matrix: missing S for " + lang + " theta " + o.str());
            m.values(i, j++) = stats::median(it->second);
        }
        ++i;
    }
    return m;
}

/// Vocabulary predictors for every configured language (training split,
/// tokenizer trained at `vocab_size`).
inline pls::LabeledMatrix compute_predictors(const ExperimentConfig& cfg, std::size_t vocab_size, std::size_t r_max) {
    pls::LabeledMatrix m;
    m.label_header = "language";
    m.columns = VocabStatsRecord::field_names();
    m.rows = cfg.languages;
    std::sort(m.rows.begin(), m.rows.end());
    m.values.resize(static_cast<Eigen::Index>(m.rows.size()), static_cast<Eigen::Index>(VocabStatsRecord::kFieldCount));
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        const auto corpus = read_corpus_file(cfg.corpora.at(m.rows[i]), m.rows[i]);
        const auto data = split(corpus, cfg.split, cfg.split_seed);
        const auto tok = train_bpe(data.train, vocab_size, cfg.min_frequency);
        const auto rec = stats_record(data.train, tok, {r_max, 100}).as_vector();
        for (std::size_t j = 0; j < rec.size(); ++j)
            m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rec[j];
    }
    return m;
}

/// All PLS outputs as named tables.
struct PlsReport {
    int components = 0;
    std::vector<double> cv_r2_by_k;
    pls::CrossValidation cv;
    pls::PlsModel model;
    std::map<std::string, pls::LabeledMatrix> tables;
};

/// Fits PLS with k (or LOO-selected k when `k` is empty) and produces the
/// tables behind the prediction, score, loading, and R^2 figures.
inline PlsReport pls_tables(const pls::LabeledMatrix& predictors, const pls::LabeledMatrix& responses_unaligned,
                            std::optional<int> k, int k_max = 5) {
    const auto responses = pls::align_rows(predictors, responses_unaligned);
    PlsReport rep;
    if (k) {
        rep.components = *k;
    } else {
        const auto sel = pls::select_components(predictors.values, responses.values, k_max, predictors.columns);
        rep.components = sel.best;
        rep.cv_r2_by_k = sel.overall_r2;
    }
    rep.cv = pls::loo_cv(predictors.values, responses.values, rep.components, predictors.columns);
    rep.model = pls::fit(predictors.values, responses.values, rep.components, predictors.columns);

    auto comp_names = [](Eigen::Index n) {
        std::vector<std::string> c;
        for (Eigen::Index a = 0; a < n; ++a) c.push_back("component_" + std::to_string(a + 1));
        return c;
    };
    auto& t = rep.tables;
    t["r2_overall"] = {"metric", {"overall_r2"}, {"value"}, Eigen::MatrixXd::Constant(1, 1, rep.cv.overall_r2)};
    t["r2_language"] = {"language", predictors.rows, {"r2"}, rep.cv.row_r2};
    t["r2_slice"] = {"theta", responses.columns, {"r2"}, rep.cv.column_r2};
    t["predictions"] = {"language", predictors.rows, responses.columns, rep.cv.predictions};
    t["observed"] = {"language", predictors.rows, responses.columns, responses.values};
    t["scores"] = {"language", predictors.rows, comp_names(rep.model.scores.cols()), rep.model.scores};
    t["x_loadings"] = {"predictor", predictors.columns, comp_names(rep.model.x_loadings.cols()), rep.model.x_loadings};
    t["x_weights"] = {"predictor", predictors.columns, comp_names(rep.model.x_weights.cols()), rep.model.x_weights};
    t["y_loadings"] = {"theta", responses.columns, comp_names(rep.model.y_loadings.cols()), rep.model.y_loadings};
    t["coefficients"] = {"predictor", predictors.columns, responses.columns, rep.model.coefficients};
    t["correlation"] = {"predictor", predictors.columns, predictors.columns,
                        pls::correlation_matrix(predictors.values, predictors.columns)};
    if (!rep.cv_r2_by_k.empty()) {
        std::vector<std::string> ks;
        Eigen::MatrixXd v(static_cast<Eigen::Index>(rep.cv_r2_by_k.size()), 1);
        for (std::size_t i = 0; i < rep.cv_r2_by_k.size(); ++i) {
            ks.push_back(std::to_string(i + 1));
            v(static_cast<Eigen::Index>(i), 0) = rep.cv_r2_by_k[i];
        }
        t["r2_by_components"] = {"components", ks, {"overall_r2"}, v};
    }
    return rep;
}

inline std::string pls_long_csv(const PlsReport& rep) {
    std::ostringstream out;
    out << "section,row,column,value\n";
    for (const auto& [name, tab] : rep.tables) {
        for (Eigen::Index i = 0; i < tab.values.rows(); ++i)
            for (Eigen::Index j = 0; j < tab.values.cols(); ++j)
                out << name << ',' << tab.rows[static_cast<std::size_t>(i)] << ',' << tab.columns[static_cast<std::size_t>(j)]
                    << ',' << detail::fmt(tab.values(i, j)) << '\n';
    }
    return out.str();
}

inline std::vector<std::size_t> coverage_report_ranks(std::size_t r_max) {
    std::set<std::size_t> ranks;
    for (std::size_t r = 1; r <= std::min<std::size_t>(100, r_max); ++r) ranks.insert(r);
    for (double x = 2.0; x <= std::log10(static_cast<double>(r_max)) + 1e-12; x += 0.05)
        ranks.insert(static_cast<std::size_t>(std::llround(std::pow(10.0, x))));
    ranks.insert(r_max);
    return {ranks.begin(), ranks.end()};
}

/// Renders one report kind as CSV text.
inline std::string report(const std::vector<ResultRecord>& records, const std::string& kind,
                          const ExperimentConfig* cfg = nullptr, const ReportOptions& opt = {}) {
    std::ostringstream out;
    using detail::fmt;
    if (kind == "surprisal" || kind == "vocab") {
        const bool vocab = kind == "vocab";
        const auto recs = detail::select_slice(records, opt, cfg, vocab);
        out << (vocab ? "language,vocab_size,theta,median_S,q25,q75\n" : "language,theta,median_S,q25,q75\n");
        for (const auto& [k, g] : detail::group_values(recs, [](const ResultRecord& r) { return std::optional(r.S); })) {
            const auto s = stats::summarize(g.second);
            out << k.language << ',';
            if (vocab) out << k.vocab_size << ',';
            out << g.first.str() << ',' << fmt(s.median) << ',' << fmt(s.q25) << ',' << fmt(s.q75) << '\n';
        }
    } else if (kind == "delta") {
        const auto recs = detail::select_slice(records, opt, cfg);
        const auto base = detail::baselines(recs);
        out << "language,theta,median_dS,q25,q75\n";
        auto delta = [&](const ResultRecord& r) -> std::optional<double> {
            const auto it = base.find({r.cell.language, r.cell.vocab_size, r.cell.seed});
            if (it == base.end()) return std::nullopt;
            return r.S - it->second;
        };
        const auto groups = detail::group_values(recs, delta);
        if (groups.empty()) throw DataError("report delta: no original-order baselines in the store");
        for (const auto& [k, g] : groups) {
            const auto s = stats::summarize(g.second);
            out << k.language << ',' << g.first.str() << ',' << fmt(s.median) << ',' << fmt(s.q25) << ',' << fmt(s.q75) << '\n';
        }
    } else if (kind == "irregular") {
        const auto recs = detail::select_slice(records, opt, cfg);
        const auto base = detail::baselines(recs);
        std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> per_lang;
        for (const auto& r : recs) {
            if (r.cell.order.is_original() || r.cell.order.theta() != 0.0) continue;
            const auto it = base.find({r.cell.language, r.cell.vocab_size, r.cell.seed});
            if (it == base.end()) continue;
            per_lang[r.cell.language].first.push_back(it->second);
            per_lang[r.cell.language].second.push_back(r.S - it->second);
        }
        if (per_lang.empty()) throw DataError("report irregular: needs theta = 0 and original cells with matching seeds");
        out << "language,median_S_orig,q25_S_orig,q75_S_orig,median_dS_irreg,q25_dS_irreg,q75_dS_irreg\n";
        for (const auto& [lang, v] : per_lang) {
            const auto a = stats::summarize(v.first);
            const auto b = stats::summarize(v.second);
            out << lang << ',' << fmt(a.median) << ',' << fmt(a.q25) << ',' << fmt(a.q75) << ',' << fmt(b.median) << ','
                << fmt(b.q25) << ',' << fmt(b.q75) << '\n';
        }
    } else if (kind == "asymmetry") {
        const auto recs = detail::select_slice(records, opt, cfg);
        const auto curve = delta_surprisal(to_surprisal_results(recs), to_surprisal_results(recs));
        const auto pts = surprisal_asymmetry(curve);
        if (pts.empty()) throw DataError("report asymmetry: no theta present with both signs");
        out << "language,theta,asymmetry\n";
        for (const auto& p : pts) out << p.variant << ',' << Order(p.theta).str() << ',' << fmt(p.asymmetry) << '\n';
        out << "all,all," << fmt(median_asymmetry(pts)) << '\n';
    } else if (kind == "pls") {
        const auto recs = detail::select_slice(records, opt, cfg);
        const auto responses = response_matrix(recs);
        pls::LabeledMatrix predictors;
        if (cfg && !cfg->predictors.empty()) {
            std::ifstream in(cfg->predictors);
            if (!in) throw DataError("cannot open predictors: " + cfg->predictors);
            predictors = pls::read_labeled_csv(in);
        } else if (cfg) {
            predictors = compute_predictors(*cfg, recs.front().cell.vocab_size, opt.r_max);
        } else {
            throw UsageError("report pls: needs a config (predictors file or corpora)");
        }
        out << pls_long_csv(pls_tables(predictors, responses, std::nullopt, opt.max_components));
    } else if (kind == "coverage") {
        if (!cfg) throw UsageError("report coverage: needs a config with corpora");
        const std::size_t v = opt.vocab_size.value_or(cfg->vocab_sizes.front());
        auto langs = cfg->languages;
        std::sort(langs.begin(), langs.end());
        out << "language,unit,rank,coverage\n";
        const auto ranks = coverage_report_ranks(opt.r_max);
        for (const auto& lang : langs) {
            const auto data = split(read_corpus_file(cfg->corpora.at(lang), lang), cfg->split, cfg->split_seed);
            const auto tok = train_bpe(data.train, v, cfg->min_frequency);
            const auto cw = coverage_curve(data.train, CoverageUnit::word);
            const auto cs = coverage_curve(data.train, CoverageUnit::subword, &tok);
            for (const auto* c : {&cw, &cs})
                for (const auto r : ranks) out << lang << ',' << to_string(c->unit()) << ',' << r << ',' << fmt(c->at(r)) << '\n';
        }
    } else {
        throw UsageError("unknown report kind '" + kind +
                         "' (expected surprisal, delta, irregular, vocab, asymmetry, pls, coverage)");
    }
    return out.str();
}

}  // namespace wordorder
