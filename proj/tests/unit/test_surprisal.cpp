#include <wordorder/ngram_lm.hpp>
#include <wordorder/stats.hpp>
#include <wordorder/surprisal.hpp>

#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

using namespace wordorder;
using Catch::Approx;

namespace {

std::vector<TokenSequence> toy_sentences() {
    return {{2, 3, 4}, {4, 3, 2, 5}, {2, 2, 2}, {6}, {3, 4, 5, 6, 2}};
}

}  // namespace

TEST_CASE("uniform model has surprisal log V") {
    for (const std::size_t V : {258u, 1000u, 16000u}) {
        const UniformLanguageModel lm(V);
        const auto r = surprisal(lm, toy_sentences());
        CHECK(r.S == Approx(std::log(static_cast<double>(V))).epsilon(1e-14));
        CHECK(r.N == 3 + 4 + 3 + 1 + 5 + 5);  // every token plus one end-of-text per sentence
    }
}

TEST_CASE("surprisal equals the mean of exported log-probs") {
    const auto train = toy_sentences();
    const auto lm = KneserNeyModel::train(train, 10, 3, 0.75, 1);
    const auto r = surprisal(lm, train, true);
    double total = 0;
    std::size_t n = 0;
    for_each_token_logprob(lm, train, [&](std::size_t, std::size_t, TokenId, double lp) {
        CHECK(lp <= 0.0);
        total -= lp;
        ++n;
    });
    CHECK(r.N == n);
    CHECK(r.S == Approx(total / static_cast<double>(n)).epsilon(1e-14));
    CHECK(r.per_sentence.size() == train.size());
    CHECK_THROWS_AS(surprisal(lm, std::vector<TokenSequence>{}), DataError);
    CHECK_THROWS_AS(surprisal(lm, std::vector<TokenSequence>{{42}}), DataError);
}

TEST_CASE("export then ingest reproduces S bit-exactly") {
    const auto train = toy_sentences();
    const auto lm = KneserNeyModel::train(train, 10, 4, 0.75, 1);
    std::stringstream csv;
    export_logprobs(csv, lm, train, "en", Order(-1.0), 3);
    export_logprobs(csv, lm, {{2, 3}}, "en", Order::original(), 3, false);
    const auto results = ingest_external(csv);
    REQUIRE(results.size() == 2);
    CHECK(results[0].variant == "en");
    CHECK(results[0].order == Order(-1.0));
    CHECK(results[0].seed == 3);
    CHECK(results[0].S == surprisal(lm, train).S);
    CHECK(results[1].order.is_original());
    CHECK(results[1].S == surprisal(lm, {{2, 3}}).S);
}

TEST_CASE("ingest rejects malformed input with the line number") {
    auto expect = [](const std::string& text, const std::string& fragment) {
        std::istringstream in(text);
        try {
            ingest_external(in);
            FAIL("expected DataError");
        } catch (const DataError& e) {
            INFO(e.what());
            CHECK(std::string(e.what()).find(fragment) != std::string::npos);
        }
    };
    const std::string h = std::string(kLogprobHeader) + "\n";
    expect("", "empty");
    expect(h, "no records");
    expect("a,b\n", "line 1");
    expect(h + "en,1,0,0,0,5,-0.5\nen,1,0,0,1,5\n", "line 3");
    expect(h + "en,1,0,0,0,5,abc\n", "line 2");
    expect(h + "en,1,0,0,0,5,0.5\n", "line 2");
    expect(h + "en,zz,0,0,0,5,-0.5\n", "line 2");
}

TEST_CASE("aggregate CSV round trip") {
    std::vector<SurprisalResult> rs{{"en", Order::original(), 1, 4.25, 100, std::nullopt, {}},
                                    {"en", Order(0.1), 1, 4.5 + 1e-13, 100, 0.25 + 1e-13, {}}};
    std::stringstream ss;
    write_results_csv(ss, rs);
    const auto back = read_results_csv(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[0].S == rs[0].S);
    CHECK_FALSE(back[0].delta_S.has_value());
    CHECK(back[1].S == rs[1].S);
    CHECK(*back[1].delta_S == *rs[1].delta_S);
    CHECK(back[1].order == Order(0.1));
}

TEST_CASE("deltas, medians over seeds, and asymmetry") {
    std::vector<SurprisalResult> rs;
    for (const std::uint64_t seed : {1u, 2u, 3u}) {
        const double base = 4.0 + 0.1 * static_cast<double>(seed);
        rs.push_back({"en", Order::original(), seed, base, 10, std::nullopt, {}});
        rs.push_back({"en", Order(0.0), seed, base + 1.0 + 0.01 * static_cast<double>(seed), 10, std::nullopt, {}});
        rs.push_back({"en", Order(1.0), seed, base + 0.5, 10, std::nullopt, {}});
        rs.push_back({"en", Order(-1.0), seed, base + 0.6, 10, std::nullopt, {}});
    }
    const auto filled = with_deltas(rs, rs);
    CHECK(*filled[0].delta_S == 0.0);
    CHECK(*filled[1].delta_S == Approx(1.01));

    const auto curve = delta_surprisal(rs, rs);
    REQUIRE(curve.size() == 4);
    CHECK(curve[0].order == Order(-1.0));
    CHECK(curve.back().order.is_original());
    CHECK(curve[1].delta.median == Approx(1.02));
    CHECK(curve[1].delta.q25 == Approx(1.015));
    CHECK(curve[1].delta.count == 3);

    const auto asym = surprisal_asymmetry(curve);
    REQUIRE(asym.size() == 1);
    CHECK(asym[0].theta == 1.0);
    CHECK(asym[0].asymmetry == Approx(-0.1));
    CHECK(median_asymmetry(asym) == Approx(-0.1));

    rs.push_back({"fi", Order(0.0), 1, 5.0, 10, std::nullopt, {}});
    CHECK_THROWS_AS(with_deltas(rs, rs), DataError);
}

TEST_CASE("type-7 quantiles") {
    CHECK(stats::median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(stats::median({1.0, 2.0, 3.0, 4.0}) == 2.5);
    CHECK(stats::quantile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.25) == 2.0);
    CHECK(stats::quantile({10.0, 20.0}, 0.25) == 12.5);
    CHECK(stats::quantile({7.0}, 0.75) == 7.0);
    CHECK_THROWS_AS(stats::median({}), DataError);
}
