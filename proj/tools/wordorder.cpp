// wordorder command-line interface.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <wordorder/wordorder.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace wordorder;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return in;
}

// Writes to `path`, or stdout when the path is empty or "-".
class Output {
public:
    explicit Output(const std::string& path) {
        if (path.empty() || path == "-") return;
        if (const auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
        file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
        if (!*file_) throw DataError("cannot write " + path);
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }
    ~Output() {
        if (file_) file_->close();
    }

private:
    std::unique_ptr<std::ofstream> file_;
};

std::optional<ExperimentConfig> maybe_config(const Globals& g) {
    if (g.config.empty()) return std::nullopt;
    auto cfg = load_config(g.config);
    if (g.seed) cfg.seeds = {*g.seed};
    if (!g.out.empty()) cfg.out_dir = g.out;
    return cfg;
}

ExperimentConfig require_config(const Globals& g, const char* verb) {
    auto cfg = maybe_config(g);
    if (!cfg) throw UsageError(std::string(verb) + " needs --config");
    return *cfg;
}

TokenCorpus load_tokens(const std::string& path, const std::string& tokenizer_path) {
    auto in = open_in(path);
    if (tokenizer_path.empty()) return read_token_corpus(in);
    return encode_corpus(read_tokenizer_file(tokenizer_path), read_corpus(in));
}

void print_vocab_stats_header(std::ostream& out) {
    out << "language";
    for (const auto& n : VocabStatsRecord::field_names()) out << ',' << n;
    out << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Word-order shuffling experiments: Mallows shuffles, BPE, n-gram surprisal, PLS"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed_value = 0;
    app.add_option("--config", g.config, "Experiment config file");
    auto* seed_opt = app.add_option("--seed", seed_value, "Seed (overrides config seeds)");
    app.add_option("--out", g.out, "Output file or directory");

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "Clean raw text into one sentence per line");
    std::string pre_in, pre_lang, pre_rules, pre_report;
    std::size_t pre_max_words = 80;
    pre->add_option("--in", pre_in, "Raw text, one sentence per line")->required();
    pre->add_option("--lang", pre_lang, "Language code (enables language-specific rules)");
    pre->add_option("--rules", pre_rules, "JSON rule list replacing the defaults");
    pre->add_option("--max-words", pre_max_words, "Drop sentences longer than this");
    pre->add_option("--report", pre_report, "Write filtering counts as JSON here");

    // split
    auto* spl = app.add_subcommand("split", "Random train/valid/test split");
    std::string spl_in;
    SplitSizes spl_sizes;
    spl->add_option("--in", spl_in, "Preprocessed corpus")->required();
    spl->add_option("--train", spl_sizes.train, "Training sentences");
    spl->add_option("--valid", spl_sizes.valid, "Validation sentences");
    spl->add_option("--test", spl_sizes.test, "Test sentences");

    // shuffle
    auto* shf = app.add_subcommand("shuffle", "Reorder sentences with Mallows permutations");
    std::string shf_in, shf_theta = "original", shf_gran = "word", shf_manifest_out, shf_tok;
    std::size_t shf_max_len = 0;
    shf->add_option("--in", shf_in, "Corpus (text, or token ids for subword)")->required();
    shf->add_option("--theta", shf_theta, "Order parameter or 'original'");
    shf->add_option("--granularity", shf_gran, "word | subword");
    shf->add_option("--manifest-out", shf_manifest_out, "Write the permutation manifest here");
    shf->add_option("--tokenizer", shf_tok, "Tokenizer JSON (subword: encode text input first)");
    shf->add_option("--max-len", shf_max_len, "Longest sentence covered (default: longest in input)");

    // unshuffle
    auto* uns = app.add_subcommand("unshuffle", "Invert a shuffle using its manifest");
    std::string uns_in, uns_manifest;
    uns->add_option("--in", uns_in, "Shuffled corpus")->required();
    uns->add_option("--manifest", uns_manifest, "Permutation manifest")->required();

    // train-bpe
    auto* tb = app.add_subcommand("train-bpe", "Train a byte-level BPE tokenizer");
    std::string tb_in;
    std::size_t tb_vocab = 16000, tb_min_freq = 2;
    tb->add_option("--in", tb_in, "Training corpus")->required();
    tb->add_option("--vocab-size", tb_vocab, "Total vocabulary size including bytes and specials");
    tb->add_option("--min-freq", tb_min_freq, "Minimum pair frequency for a merge");

    // stats
    auto* st = app.add_subcommand("stats", "Vocabulary statistics and coverage curves");
    std::vector<std::string> st_corpora;
    std::string st_unit = "both", st_curves, st_tok;
    std::size_t st_r_max = kDefaultRankMax, st_vocab = 16000, st_min_freq = 2;
    st->add_option("--corpus", st_corpora, "LANG=PATH, repeatable; row order follows the arguments");
    st->add_option("--tokenizer", st_tok, "Tokenizer JSON (otherwise trained per corpus)");
    st->add_option("--vocab-size", st_vocab, "Vocabulary size when training");
    st->add_option("--min-freq", st_min_freq, "Minimum pair frequency when training");
    st->add_option("--unit", st_unit, "Curve unit: word | subword | both");
    st->add_option("--r-max", st_r_max, "Largest rank for integral and similarity");
    st->add_option("--curves", st_curves, "Write coverage curves CSV here");

    // train-lm
    auto* tl = app.add_subcommand("train-lm", "Train an interpolated Kneser-Ney model");
    std::string tl_in, tl_tok;
    std::size_t tl_order = KneserNeyModel::kDefaultOrder, tl_vocab = 0;
    double tl_discount = KneserNeyModel::kDefaultDiscount;
    tl->add_option("--in", tl_in, "Training sentences (text with --tokenizer, else token ids)")->required();
    tl->add_option("--tokenizer", tl_tok, "Tokenizer JSON");
    tl->add_option("--vocab-size", tl_vocab, "Vocabulary size for token-id input");
    tl->add_option("--order", tl_order, "N-gram order");
    tl->add_option("--discount", tl_discount, "Absolute discount in (0, 1)");

    // surprisal
    auto* su = app.add_subcommand("surprisal", "Per-token surprisal of a test set");
    std::string su_lm, su_test, su_tok, su_variant = "default", su_theta = "original", su_logprobs;
    std::uint64_t su_seed = 0;
    su->add_option("--lm", su_lm, "Model from train-lm")->required();
    su->add_option("--test", su_test, "Test sentences (text with --tokenizer, else token ids)")->required();
    su->add_option("--tokenizer", su_tok, "Tokenizer JSON");
    su->add_option("--variant", su_variant, "Variant label");
    su->add_option("--theta", su_theta, "Order label for the output row");
    su->add_option("--run-seed", su_seed, "Seed label for the output row");
    su->add_option("--logprobs", su_logprobs, "Write per-token log-prob CSV here");

    // delta
    auto* de = app.add_subcommand("delta", "Surprisal deltas against original-order baselines");
    std::string de_results, de_baseline;
    bool de_summary = false;
    de->add_option("--results", de_results, "Aggregate results CSV")->required();
    de->add_option("--baseline", de_baseline, "Baseline results CSV (default: original rows of --results)");
    de->add_flag("--summary", de_summary, "Median and quartiles over seeds instead of per-run rows");

    // ingest
    auto* in = app.add_subcommand("ingest", "Aggregate external per-token log-probs");
    std::string in_file;
    in->add_option("--in", in_file, "Log-prob CSV")->required();

    // pls
    auto* pl = app.add_subcommand("pls", "Partial least squares from predictors to surprisal");
    std::string pl_x, pl_y, pl_k = "auto";
    int pl_kmax = 5;
    bool pl_loo = false;
    pl->add_option("--predictors", pl_x, "Predictor table CSV (label column first)")->required();
    pl->add_option("--responses", pl_y, "Response table CSV (label column first)")->required();
    pl->add_option("--components", pl_k, "Number of components or 'auto'");
    pl->add_option("--max-components", pl_kmax, "Upper bound for 'auto'");
    pl->add_flag("--loo", pl_loo, "Only print leave-one-out R^2 per component count");

    // sweep
    auto* sw = app.add_subcommand("sweep", "Run all pending cells of the configured sweep");

    // report
    auto* re = app.add_subcommand("report", "Figure-ready CSV from the result store");
    std::string re_kind = "surprisal", re_gran;
    std::size_t re_vocab = 0;
    re->add_option("--kind", re_kind, "surprisal | delta | irregular | vocab | asymmetry | pls | coverage");
    re->add_option("--vocab-size", re_vocab, "Vocabulary-size slice");
    re->add_option("--granularity", re_gran, "Granularity slice");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    if (*seed_opt) g.seed = seed_value;

    try {
        if (*pre) {
            auto raw = open_in(pre_in);
            auto pc = default_preprocess_config(pre_lang);
            pc.max_words = pre_max_words;
            if (!pre_rules.empty()) {
                auto rin = open_in(pre_rules);
                pc.rules = nlohmann::json::parse(rin).get<std::vector<PreprocessRule>>();
            }
            const auto res = preprocess(raw, pc);
            Output out(g.out);
            write_corpus(out.stream(), res.corpus);
            const nlohmann::ordered_json rep{{"lines_read", res.report.lines_read},
                                             {"kept", res.report.kept},
                                             {"invalid_utf8", res.report.invalid_utf8},
                                             {"dropped_by_rule", res.report.dropped_by_rule},
                                             {"dropped_empty", res.report.dropped_empty},
                                             {"dropped_too_long", res.report.dropped_too_long}};
            if (!pre_report.empty()) {
                Output r(pre_report);
                r.stream() << rep.dump(2) << '\n';
            }
            std::cerr << rep.dump() << '\n';
        } else if (*spl) {
            const auto corpus = read_corpus_file(spl_in);
            const auto parts = split(corpus, spl_sizes, g.seed.value_or(0));
            const fs::path dir = g.out.empty() ? fs::path(".") : fs::path(g.out);
            fs::create_directories(dir);
            write_corpus_file((dir / "train.txt").string(), parts.train);
            write_corpus_file((dir / "valid.txt").string(), parts.valid);
            write_corpus_file((dir / "test.txt").string(), parts.test);
        } else if (*shf) {
            const auto order = Order::parse(shf_theta);
            const auto gran = parse_granularity(shf_gran);
            const std::uint64_t seed = g.seed.value_or(0);
            Output out(g.out);
            if (gran == Granularity::word) {
                const auto corpus = read_corpus_file(shf_in);
                const auto manifest = build_manifest(order, shf_max_len ? shf_max_len : corpus.max_length(), gran, seed);
                write_corpus(out.stream(), apply_shuffle(corpus, manifest));
                if (!shf_manifest_out.empty()) write_manifest_file(shf_manifest_out, manifest);
            } else {
                const auto tokens = load_tokens(shf_in, shf_tok);
                const auto manifest = build_manifest(order, shf_max_len ? shf_max_len : max_token_length(tokens), gran, seed);
                write_token_corpus(out.stream(), apply_shuffle(tokens, manifest));
                if (!shf_manifest_out.empty()) write_manifest_file(shf_manifest_out, manifest);
            }
        } else if (*uns) {
            const auto manifest = read_manifest_file(uns_manifest);
            Output out(g.out);
            auto src = open_in(uns_in);
            if (manifest.granularity == Granularity::word) {
                write_corpus(out.stream(), invert_shuffle(read_corpus(src), manifest));
            } else {
                write_token_corpus(out.stream(), invert_shuffle(read_token_corpus(src), manifest));
            }
        } else if (*tb) {
            const auto model = train_bpe(read_corpus_file(tb_in), tb_vocab, tb_min_freq);
            if (g.out.empty()) {
                std::cout << tokenizer_to_json(model).dump() << '\n';
            } else {
                write_tokenizer_file(g.out, model);
            }
            std::cerr << "merges: " << model.merges.size() << ", vocab: " << model.size() << '\n';
        } else if (*st) {
            if (st_unit != "word" && st_unit != "subword" && st_unit != "both")
                throw UsageError("--unit must be word, subword, or both");
            std::vector<std::pair<std::string, std::string>> inputs;
            for (const auto& c : st_corpora) {
                const auto eq = c.find('=');
                if (eq == std::string::npos) throw UsageError("--corpus expects LANG=PATH, got '" + c + "'");
                inputs.emplace_back(c.substr(0, eq), c.substr(eq + 1));
            }
            if (inputs.empty()) {
                const auto cfg = require_config(g, "stats without --corpus");
                for (const auto& lang : cfg.languages) inputs.emplace_back(lang, cfg.corpora.at(lang));
            }
            std::optional<TokenizerModel> fixed;
            if (!st_tok.empty()) fixed = read_tokenizer_file(st_tok);
            Output out(g.out);
            std::unique_ptr<Output> curves;
            if (!st_curves.empty()) {
                curves = std::make_unique<Output>(st_curves);
                curves->stream() << "language,unit,rank,coverage\n";
            }
            print_vocab_stats_header(out.stream());
            for (const auto& [lang, path] : inputs) {
                const auto corpus = read_corpus_file(path, lang);
                const auto tok = fixed ? *fixed : train_bpe(corpus, st_vocab, st_min_freq);
                const auto rec = stats_record(corpus, tok, {st_r_max, 100}).as_vector();
                out.stream() << lang;
                for (const double v : rec) out.stream() << ',' << detail::format_double(v);
                out.stream() << '\n';
                if (curves) {
                    std::vector<CoverageCurve> cs;
                    if (st_unit != "subword") cs.push_back(coverage_curve(corpus, CoverageUnit::word));
                    if (st_unit != "word") cs.push_back(coverage_curve(corpus, CoverageUnit::subword, &tok));
                    for (const auto& c : cs)
                        for (const auto r : coverage_report_ranks(st_r_max))
                            curves->stream() << lang << ',' << to_string(c.unit()) << ',' << r << ','
                                             << detail::format_double(c.at(r)) << '\n';
                }
            }
        } else if (*tl) {
            const auto tokens = load_tokens(tl_in, tl_tok);
            std::size_t vocab = tl_vocab;
            if (!tl_tok.empty()) vocab = read_tokenizer_file(tl_tok).size();
            if (vocab == 0) throw UsageError("train-lm on token ids needs --vocab-size");
            const auto lm = KneserNeyModel::train(tokens, vocab, tl_order, tl_discount);
            if (g.out.empty() || g.out == "-") throw UsageError("train-lm needs --out for the model file");
            std::ofstream out(g.out, std::ios::binary);
            if (!out) throw DataError("cannot write " + g.out);
            lm.save(out);
        } else if (*su) {
            auto lin = open_in(su_lm);
            const auto lm = KneserNeyModel::load(lin);
            const auto test = load_tokens(su_test, su_tok);
            const auto order = Order::parse(su_theta);
            if (!su_logprobs.empty()) {
                Output lp(su_logprobs);
                export_logprobs(lp.stream(), lm, test, su_variant, order, su_seed);
            }
            auto r = surprisal(lm, test);
            r.variant = su_variant;
            r.order = order;
            r.seed = su_seed;
            Output out(g.out);
            write_results_csv(out.stream(), {r});
        } else if (*de) {
            auto rin = open_in(de_results);
            const auto results = read_results_csv(rin);
            std::vector<SurprisalResult> base;
            if (de_baseline.empty()) {
                for (const auto& r : results)
                    if (r.order.is_original()) base.push_back(r);
            } else {
                auto bin = open_in(de_baseline);
                base = read_results_csv(bin);
            }
            Output out(g.out);
            if (de_summary) {
                out.stream() << "variant,theta,median_dS,q25_dS,q75_dS,median_S,q25_S,q75_S,seeds\n";
                for (const auto& p : delta_surprisal(results, base)) {
                    using detail::format_double;
                    out.stream() << p.variant << ',' << p.order.str() << ',' << format_double(p.delta.median) << ','
                                 << format_double(p.delta.q25) << ',' << format_double(p.delta.q75) << ','
                                 << format_double(p.surprisal.median) << ',' << format_double(p.surprisal.q25) << ','
                                 << format_double(p.surprisal.q75) << ',' << p.delta.count << '\n';
                }
            } else {
                write_results_csv(out.stream(), with_deltas(results, base));
            }
        } else if (*in) {
            auto src = open_in(in_file);
            Output out(g.out);
            write_results_csv(out.stream(), ingest_external(src));
        } else if (*pl) {
            auto xin = open_in(pl_x);
            auto yin = open_in(pl_y);
            const auto X = pls::read_labeled_csv(xin);
            const auto Y = pls::align_rows(X, pls::read_labeled_csv(yin));
            Output out(g.out);
            if (pl_loo) {
                const auto sel = pls::select_components(X.values, Y.values, pl_kmax, X.columns);
                out.stream() << "components,overall_r2\n";
                for (std::size_t k = 0; k < sel.overall_r2.size(); ++k)
                    out.stream() << k + 1 << ',' << detail::format_double(sel.overall_r2[k]) << '\n';
                std::cerr << "best: " << sel.best << '\n';
            } else {
                std::optional<int> k;
                if (pl_k != "auto") {
                    try {
                        k = std::stoi(pl_k);
                    } catch (const std::exception&) {
                        throw UsageError("--components expects an integer or 'auto'");
                    }
                }
                const auto rep = pls_tables(X, Y, k, pl_kmax);
                out.stream() << pls_long_csv(rep);
                std::cerr << "components: " << rep.components << ", LOO R^2: " << rep.cv.overall_r2 << '\n';
            }
        } else if (*sw) {
            const auto cfg = require_config(g, "sweep");
            ResultStore store(store_path(cfg));
            if (store.skipped_lines()) std::cerr << "store: ignored " << store.skipped_lines() << " malformed line(s)\n";
            const auto s = run_sweep(cfg, store, [](const std::string& line) { std::cerr << line << '\n'; });
            std::cerr << "computed " << s.computed << ", skipped " << s.skipped << ", failed " << s.failed << '\n';
            return s.failed ? 2 : 0;
        } else if (*re) {
            const auto cfg = require_config(g, "report");
            const ResultStore store(store_path(cfg));
            ReportOptions opt;
            if (re_vocab) opt.vocab_size = re_vocab;
            if (!re_gran.empty()) opt.granularity = parse_granularity(re_gran);
            const auto text = report(store.latest(), re_kind, &cfg, opt);
            std::cout << text;
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
