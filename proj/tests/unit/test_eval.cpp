#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "triplenc/error.hpp"
#include "triplenc/eval.hpp"
#include "triplenc/rng.hpp"
#include "triplenc/trainer.hpp"

using namespace triplenc;

namespace {

Corpus markov(std::uint64_t seed, std::size_t dialogs, std::size_t len = 6) {
    SyntheticCorpusConfig sc;
    sc.dialog_count = dialogs;
    sc.dialog_len = len;
    sc.seed = seed;
    return gen_synthetic_corpus(sc);
}

EncoderParams random_params(const Corpus& c, std::uint64_t seed, bool parity = true) {
    const std::vector<Subspace> before{Subspace::Before, Subspace::Before1, Subspace::Before2};
    return EncoderParams::init_random(c.vocab(), 8, make_slots(before, parity), seed);
}

SeqEvalConfig with_variant(Variant v, std::size_t l = 1) {
    SeqEvalConfig cfg;
    cfg.scorer.variant = v;
    cfg.scorer.l = l;
    return cfg;
}

}  // namespace

TEST_CASE("mid-rank of the true candidate") {
    CHECK(rank_true(std::vector<double>{0.9, 0.5, 0.7}, 2) == 2.0);
    CHECK(rank_true(std::vector<double>{0.5, 0.5, 0.3}, 0) == 1.5);
    CHECK_THROWS_AS(rank_true(std::vector<double>{0.1}, 1), IndexOutOfRange);

    Rng rng(1, 0);
    std::vector<double> s(100);
    for (auto& x : s) {
        x = rng.uniform();
    }
    const auto top = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
    CHECK(rank_true(s, top) == 1.0);
    std::vector<double> sorted = s;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    for (std::size_t t = 0; t < s.size(); t += 7) {
        const auto pos = std::find(sorted.begin(), sorted.end(), s[t]) - sorted.begin();
        CHECK(rank_true(s, t) == static_cast<double>(pos + 1));
    }

    CHECK(normalized_rank(1.0, 1) == 0.0);
    CHECK(normalized_rank(1.0, 11) == 0.0);
    CHECK(normalized_rank(11.0, 11) == 1.0);
}

TEST_CASE("rank is invariant under strictly increasing transforms") {
    Rng rng(2, 0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s(20);
        for (auto& x : s) {
            x = std::round(rng.uniform(-1.0, 1.0) * 8) / 8;
        }
        const std::size_t t = rng.index(s.size());
        const double r = rank_true(s, t);
        std::vector<double> e = s;
        std::vector<double> c = s;
        for (std::size_t m = 0; m < s.size(); ++m) {
            e[m] = std::exp(3 * s[m]);
            c[m] = s[m] * s[m] * s[m] + 2;
        }
        CHECK(rank_true(e, t) == r);
        CHECK(rank_true(c, t) == r);
    }
}

TEST_CASE("Hits@k") {
    const std::vector<double> ranks{1, 3, 7, 12, 101};
    const std::vector<std::size_t> ks{1, 5, 10, 50, 101};
    const auto h = hits_at(ranks, ks);
    CHECK(h.at(1) == doctest::Approx(0.2));
    CHECK(h.at(5) == doctest::Approx(0.4));
    CHECK(h.at(10) == doctest::Approx(0.6));
    CHECK(h.at(101) == 1.0);
    double prev = 0;
    for (const auto& [k, v] : h) {
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("Hits@10 of random scores over 101 candidates") {
    Rng rng(3, 0);
    std::vector<double> ranks;
    for (int item = 0; item < 4000; ++item) {
        std::vector<double> s(101);
        for (auto& x : s) {
            x = rng.uniform();
        }
        ranks.push_back(rank_true(s, 0));
    }
    const std::vector<std::size_t> ks{10};
    CHECK(std::abs(hits_at(ranks, ks).at(10) - 10.0 / 101) < 0.05);
}

TEST_CASE("sequence modeling on a single dialog ranks every truth first") {
    Corpus c;
    c.add_dialog(std::vector<std::string>{"a", "b", "c", "d", "e"});
    const auto p = random_params(c, 4);
    for (auto v : {Variant::Bi, Variant::TripleAvg, Variant::TripleLastL, Variant::MaxSim}) {
        const auto r = eval_sequence_modeling(c, p, with_variant(v));
        CHECK(r.avg_rank == 1.0);
        CHECK(r.avg_norm_rank == 0.0);
        for (const auto& d : r.depths) {
            CHECK(d.pool_size == 1);
        }
    }
}

TEST_CASE("sequence modeling errors") {
    const auto c = markov(1, 5);
    const auto p = random_params(c, 1);
    CHECK_THROWS_AS(eval_sequence_modeling(Corpus{}, p, {}), EmptyCorpus);
    auto cfg = with_variant(Variant::TripleAvg);
    cfg.min_depth = 1;
    CHECK_THROWS_AS(eval_sequence_modeling(c, p, cfg), InvalidConfig);
    Corpus tiny;
    tiny.add_dialog(std::vector<std::string>{"u1", "u2"});
    CHECK_THROWS_AS(eval_sequence_modeling(tiny, p, {}), EmptyCorpus);
}

TEST_CASE("depth pools do not depend on the scorer") {
    const auto c = markov(2, 40);
    const auto p = random_params(c, 2);
    auto bi = with_variant(Variant::Bi);
    const auto a = eval_sequence_modeling(c, p, bi);
    for (auto v : {Variant::TripleAvg, Variant::TripleLastL, Variant::MaxSim}) {
        const auto b = eval_sequence_modeling(c, p, with_variant(v, 2));
        REQUIRE(a.items.size() == b.items.size());
        for (std::size_t n = 0; n < a.items.size(); ++n) {
            CHECK(a.items[n].dialog == b.items[n].dialog);
            CHECK(a.items[n].depth == b.items[n].depth);
            CHECK(a.items[n].pool_size == b.items[n].pool_size);
        }
    }
    // Pool size at depth k is the number of distinct utterances at position k + 1.
    for (const auto& d : a.depths) {
        std::set<UtteranceId> seen;
        for (const auto& dialog : c.dialogs()) {
            if (d.depth < dialog.size()) {
                seen.insert(dialog[d.depth]);
            }
        }
        CHECK(d.pool_size == seen.size());
    }
}

TEST_CASE("sequence modeling is deterministic") {
    const auto c = markov(3, 30);
    const auto p = random_params(c, 3);
    const auto cfg = with_variant(Variant::TripleAvg);
    const auto a = eval_sequence_modeling(c, p, cfg);
    const auto b = eval_sequence_modeling(c, p, cfg);
    std::ostringstream sa;
    std::ostringstream sb;
    write_depth_csv(sa, a);
    write_depth_csv(sb, b);
    CHECK(sa.str() == sb.str());
    CHECK(sa.str().rfind("depth,avg_rank,avg_norm_rank,n_items\n", 0) == 0);
}

TEST_CASE("incremental and from-scratch scoring agree") {
    for (bool parity : {false, true}) {
        const auto c = markov(4, 25, 7);
        const auto p = random_params(c, 4, parity);
        for (auto v : {Variant::TripleAvg, Variant::TripleLastL, Variant::MaxSim}) {
            auto inc = with_variant(v, 2);
            auto scratch = inc;
            scratch.scorer.max_distance = 1000;  // forces the from-scratch path, drops nothing
            const auto a = eval_sequence_modeling(c, p, inc);
            const auto b = eval_sequence_modeling(c, p, scratch);
            REQUIRE(a.items.size() == b.items.size());
            for (std::size_t n = 0; n < a.items.size(); ++n) {
                CHECK(a.items[n].rank == b.items[n].rank);
            }
        }
    }
}

TEST_CASE("from-scratch pair counts") {
    const auto c = markov(5, 3, 6);
    const auto p = random_params(c, 5);
    const std::vector<UtteranceId> ids{0, 1, 2, 3, 4};
    const auto cands = make_candidates(p, ids);
    const auto& ctx = c.dialogs()[0];
    std::size_t pairs = 0;
    (void)score_context(p, std::span(ctx).first(5), cands, with_variant(Variant::TripleLastL, 1),
                        &pairs);
    CHECK(pairs == 4);
    pairs = 0;
    (void)score_context(p, std::span(ctx).first(5), cands, with_variant(Variant::TripleAvg),
                        &pairs);
    CHECK(pairs == 10);
    auto capped = with_variant(Variant::TripleAvg);
    capped.scorer.max_distance = 3;  // keeps pairs whose first element is < 3 turns from turn 6
    pairs = 0;
    (void)score_context(p, std::span(ctx).first(5), cands, capped, &pairs);
    CHECK(pairs == 1);
}

TEST_CASE("component scorer names round-trip") {
    for (auto cs : {ComponentScorer::Triple, ComponentScorer::TriplePlusBiB2,
                    ComponentScorer::DirectNeighbors, ComponentScorer::BiB1PlusBiB2,
                    ComponentScorer::MeanB2Only, ComponentScorer::BiB2,
                    ComponentScorer::MeanB1Only}) {
        CHECK(parse_component(name(cs)) == cs);
        const auto c = markov(6, 10);
        SeqEvalConfig cfg;
        cfg.component = cs;
        const auto r = eval_sequence_modeling(c, random_params(c, 6), cfg);
        CHECK(r.avg_norm_rank >= 0.0);
        CHECK(r.avg_norm_rank <= 1.0);
    }
    CHECK_FALSE(parse_component("nope").has_value());
}

TEST_CASE("planning with a collinear truth and orthogonal distractors") {
    Corpus c;
    c.add_dialog(std::vector<std::string>{"h1", "h2", "truth", "goal"});
    for (int v = 0; v < 20; ++v) {
        c.intern("d" + std::to_string(v));
    }
    const std::size_t n = c.vocab().size();
    EncoderParams p(c.vocab(), 3);
    Matrix before(n, 3);
    Matrix after(n, 3);
    for (std::size_t r = 0; r < n; ++r) {
        before(r, 1) = 1.0f;
        after(r, 2) = 1.0f;
    }
    const auto truth = *c.find("truth");
    before(truth, 1) = 0.0f;
    before(truth, 0) = 1.0f;
    after(*c.find("goal"), 2) = 0.0f;
    after(*c.find("goal"), 0) = 1.0f;
    p.set_table({Subspace::Before, Parity::None}, before);
    p.set_table({Subspace::After, Parity::None}, after);

    PlanEvalConfig cfg;
    const auto r = eval_planning(c, p, cfg);
    CHECK(r.n_items == 1);
    CHECK(r.ranks[0] == 1.0);
    CHECK(r.hits.at(5) == 1.0);

    PlanEvalConfig too_long = cfg;
    too_long.history_len = 5;
    const auto skipped = eval_planning(c, p, too_long);
    CHECK(skipped.n_items == 0);
    CHECK(skipped.n_skipped == 1);

    PlanEvalConfig no_history = cfg;
    no_history.history_len = 0;
    no_history.planner = Planner::Triple;
    CHECK_THROWS_AS(eval_planning(c, p, no_history), InvalidConfig);
}

TEST_CASE("planning is deterministic and reads external candidates") {
    const auto c = markov(7, 20);
    const auto p = random_params(c, 7);
    PlanEvalConfig cfg;
    cfg.planner = Planner::Triple;
    cfg.history_len = 2;
    cfg.goal_distance = 2;
    const auto a = eval_planning(c, p, cfg);
    const auto b = eval_planning(c, p, cfg);
    CHECK(a.ranks == b.ranks);
    for (double r : a.ranks) {
        CHECK(r >= 1.0);
        CHECK(r <= 101.0);
    }

    std::map<std::size_t, std::vector<std::string>> ext;
    for (std::size_t d = 0; d < c.size(); ++d) {
        ext[d] = {c.vocab()[0], c.vocab()[1]};
    }
    cfg.external_candidates = ext;
    const auto e = eval_planning(c, p, cfg);
    for (double r : e.ranks) {
        CHECK(r <= 3.0);
    }
}

TEST_CASE("synthetic corpora") {
    SyntheticCorpusConfig sc;
    sc.dialog_count = 0;
    CHECK(gen_synthetic_corpus(sc).empty());
    sc.dialog_count = 10;
    CHECK(gen_synthetic_corpus(sc).dialogs() == gen_synthetic_corpus(sc).dialogs());
    sc.structure = CorpusStructure::XorCooccurrence;
    sc.vocab_size = 3;
    CHECK_THROWS_AS(gen_synthetic_corpus(sc), InvalidConfig);
    sc.vocab_size = 8;
    sc.dialog_len = 5;
    CHECK_THROWS_AS(gen_synthetic_corpus(sc), InvalidConfig);  // no filler utterances
    CHECK(parse_structure("xor") == CorpusStructure::XorCooccurrence);
}

TEST_CASE("xor corpus: every single context utterance predicts both followers equally") {
    SyntheticCorpusConfig sc;
    sc.structure = CorpusStructure::XorCooccurrence;
    sc.vocab_size = 8;
    sc.dialog_len = 3;
    sc.dialog_count = 20000;
    sc.seed = 9;
    const auto c = gen_synthetic_corpus(sc);
    // (slot, utterance) -> follower -> count
    std::map<std::pair<int, UtteranceId>, std::map<UtteranceId, std::size_t>> counts;
    std::map<std::pair<UtteranceId, UtteranceId>, std::set<UtteranceId>> joint;
    for (const auto& d : c.dialogs()) {
        REQUIRE(d.size() == 3);
        ++counts[{0, d[0]}][d[2]];
        ++counts[{1, d[1]}][d[2]];
        joint[{d[0], d[1]}].insert(d[2]);
    }
    for (const auto& [key, followers] : counts) {
        REQUIRE(followers.size() == 2);
        const double total = static_cast<double>(followers.begin()->second
                                                 + std::next(followers.begin())->second);
        CHECK(std::abs(followers.begin()->second / total - 0.5) < 0.03);
    }
    for (const auto& [ctx, followers] : joint) {
        CHECK(followers.size() == 1);
    }
}

TEST_CASE("pair disambiguation on a trained-free model is defined and bounded") {
    SyntheticCorpusConfig sc;
    sc.structure = CorpusStructure::XorCooccurrence;
    sc.vocab_size = 8;
    sc.dialog_len = 3;
    sc.dialog_count = 200;
    const auto c = gen_synthetic_corpus(sc);
    const auto p = random_params(c, 10);
    const auto r = eval_pair_disambiguation(c, p, with_variant(Variant::TripleAvg));
    CHECK(r.n_items > 0);
    CHECK(r.n_comparisons > 0);
    CHECK(r.accuracy >= 0.0);
    CHECK(r.accuracy <= 1.0);
    CHECK_THROWS_AS(eval_pair_disambiguation(Corpus{}, p, {}), EmptyCorpus);
}

TEST_CASE("additivity gap is zero when every vector is the same") {
    const auto c = markov(11, 20);
    EncoderParams p(c.vocab(), 4);
    Matrix same(c.vocab().size(), 4);
    for (std::size_t r = 0; r < same.rows(); ++r) {
        for (std::size_t m = 0; m < 4; ++m) {
            same(r, m) = 0.5f;
        }
    }
    for (auto s : make_slots(std::vector<Subspace>{Subspace::Before, Subspace::Before1,
                                                   Subspace::Before2},
                             true)) {
        p.set_table(s, same);
    }
    for (auto mode : {AdditivityMode::Bi, AdditivityMode::Triple}) {
        const auto rows = additivity_analysis(c, p, 3, mode);
        REQUIRE(rows.size() == 3);
        for (const auto& row : rows) {
            CHECK(row.gap == doctest::Approx(0.0).epsilon(1e-12));
            CHECK(row.n_items > 0);
        }
    }
    CHECK_THROWS_AS(additivity_analysis(c, p, 1, AdditivityMode::Triple), InvalidConfig);
}

TEST_CASE("sign test") {
    CHECK(sign_test_p(0, 0) == 1.0);
    CHECK(sign_test_p(1, 0) == doctest::Approx(0.5));
    CHECK(sign_test_p(10, 0) == doctest::Approx(1.0 / 1024));
    CHECK(sign_test_p(5, 5) == doctest::Approx(638.0 / 1024));
    CHECK(sign_test_p(0, 10) == doctest::Approx(1.0));
}
