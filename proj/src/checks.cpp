#include "triplenc/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "triplenc/error.hpp"
#include "triplenc/eval.hpp"
#include "triplenc/inference.hpp"
#include "triplenc/rng.hpp"
#include "triplenc/targets.hpp"
#include "triplenc/trainer.hpp"

namespace triplenc::checks {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point since) {
    return std::chrono::duration<double>(Clock::now() - since).count();
}

// Collects failures; the first few are reported.
class Failures {
  public:
    template <class... Args>
    void add(Args&&... args) {
        ++count_;
        if (count_ <= 3) {
            std::ostringstream os;
            (os << ... << args);
            if (!text_.empty()) {
                text_ += "; ";
            }
            text_ += os.str();
        }
    }
    [[nodiscard]] bool empty() const { return count_ == 0; }
    [[nodiscard]] std::string summary() const {
        return std::to_string(count_) + " failure(s): " + text_;
    }

  private:
    std::size_t count_ = 0;
    std::string text_;
};

CheckResult finish(std::string name, const Failures& f, std::string ok_detail,
                   Clock::time_point start, double time_limit) {
    CheckResult r;
    r.name = std::move(name);
    r.seconds = elapsed(start);
    r.passed = f.empty() && r.seconds < time_limit;
    if (!f.empty()) {
        r.detail = f.summary();
    } else if (r.seconds >= time_limit) {
        r.detail = "took " + std::to_string(r.seconds) + " s, limit " + std::to_string(time_limit);
    } else {
        r.detail = std::move(ok_detail);
    }
    return r;
}

// Scalar reference arithmetic, deliberately separate from the library's geometry code.
long double ref_cos(const std::vector<float>& u, const std::vector<float>& v) {
    long double uv = 0;
    long double uu = 0;
    long double vv = 0;
    for (std::size_t t = 0; t < u.size(); ++t) {
        uv += static_cast<long double>(u[t]) * v[t];
        uu += static_cast<long double>(u[t]) * u[t];
        vv += static_cast<long double>(v[t]) * v[t];
    }
    return uv / std::sqrt(uu * vv);
}

std::vector<float> ref_mean(const std::vector<float>& u, const std::vector<float>& v) {
    std::vector<float> m(u.size());
    for (std::size_t t = 0; t < u.size(); ++t) {
        m[t] = (u[t] + v[t]) * 0.5f;
    }
    return m;
}

std::vector<float> random_vec(Rng& rng, std::size_t d) {
    std::vector<float> v(d);
    for (auto& x : v) {
        x = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
    return v;
}

}  // namespace

CheckResult check_targets() {
    const auto start = Clock::now();
    Failures f;
    const int windows[] = {3, 4, 5, 8, 10};
    for (int w : windows) {
        for (int k = 3; k <= 12; ++k) {
            const double top = c3l_target(k - 2, k - 1, k, w);
            if (top != 1.0) {
                f.add("c3l top endpoint w=", w, " k=", k, " gives ", top);
            }
            if (std::abs(c3l_raw(k - 2, k - 1, k, w) - (2.0 - 3.0 / w)) > 1e-12) {
                f.add("c3l raw top w=", w, " k=", k);
            }
        }
        for (int k = 2; k <= 12; ++k) {
            for (int i = std::max(1, k - w + 1); i < k; ++i) {
                const double expected = 1.0 - static_cast<double>(k - i) / static_cast<double>(w);
                if (ccl_target(i, k, w) != expected) {
                    f.add("ccl_target(", i, ",", k, ",", w, ")");
                }
            }
        }
    }
    // Hand-evaluated examples of the min-max map.
    auto map = [](double raw, int w) {
        const double lo = 1.0 / w;
        const double hi = 2.0 - 3.0 / w;
        return lo + (raw - lo) * (1.0 - lo) / (hi - lo);
    };
    if (std::abs(c3l_target(2, 4, 5, 5) - 0.8667) > 1e-4 || std::abs(map(1.2, 5) - 0.8667) > 1e-4) {
        f.add("c3l_target(2,4,5,5) != 0.8667");
    }
    if (std::abs(c3l_target(1, 2, 5, 5) - 0.4667) > 1e-4) {
        f.add("c3l_target(1,2,5,5) != 0.4667");
    }

    for (int w : windows) {
        for (int n = 3; n <= 12; ++n) {
            std::size_t brute = 0;
            for (int k = 3; k <= n; ++k) {
                // Strictly increasing in i + j for fixed k; equal sums give equal targets.
                std::vector<std::pair<int, double>> by_sum;
                for (int i = 1; i < k; ++i) {
                    for (int j = i + 1; j < k; ++j) {
                        if (k - i >= w) {
                            continue;
                        }
                        ++brute;
                        const double t = c3l_target(i, j, k, w);
                        if (!(t >= 0.0 && t <= 1.0)) {
                            f.add("c3l_target out of [0,1] at (", i, ",", j, ",", k, ",", w, ")");
                        }
                        if (std::abs(t - map(2.0 - (2.0 * k - (i + j)) / w, w)) > 1e-12) {
                            f.add("c3l_target formula at (", i, ",", j, ",", k, ",", w, ")");
                        }
                        by_sum.emplace_back(i + j, t);
                    }
                }
                for (const auto& [sa, ta] : by_sum) {
                    for (const auto& [sb, tb] : by_sum) {
                        if ((sa < sb && !(ta < tb)) || (sa == sb && ta != tb)) {
                            f.add("monotonicity in i+j violated at k=", k, " w=", w);
                        }
                    }
                }
            }
            // Fixed j = i + 1: raw drops by 2/w per step of k.
            for (int i = 1; i + 2 <= n; ++i) {
                for (int k = i + 2; k + 1 <= n && k + 1 - i < w; ++k) {
                    const double drop = c3l_raw(i, i + 1, k, w) - c3l_raw(i, i + 1, k + 1, w);
                    if (std::abs(drop - 2.0 / w) > 1e-12
                        || !(c3l_target(i, i + 1, k + 1, w) < c3l_target(i, i + 1, k, w))) {
                        f.add("decay in k at i=", i, " k=", k, " w=", w);
                    }
                }
            }
            if (w <= 8) {
                const auto gen = gen_positive_triples(n, {w, 0, TargetMode::Curved});
                if (gen.size() != brute) {
                    f.add("triple count n=", n, " w=", w, ": ", gen.size(), " vs ", brute);
                }
            }
        }
    }
    return finish("target formulas", f,
                  "endpoints exact for w in {3,4,5,8,10}; monotone and counted for n <= 12", start,
                  1.0);
}

CheckResult check_scoring_oracles(std::uint64_t seed) {
    const auto start = Clock::now();
    Failures f;
    Rng rng(seed, 0xc2);
    double worst = 0.0;
    for (int inst = 0; inst < 200; ++inst) {
        const std::size_t n = 2 + rng.index(11);
        const std::size_t d = rng.index(2) == 0 ? 4 : 16;
        const std::size_t m = 1 + rng.index(50);
        const bool parity = inst % 2 == 1;

        Matrix cand(m, d);
        std::vector<std::vector<float>> cand_rows(m);
        for (std::size_t c = 0; c < m; ++c) {
            cand_rows[c] = random_vec(rng, d);
            std::copy(cand_rows[c].begin(), cand_rows[c].end(), cand.row(c).begin());
        }
        auto cs = std::make_shared<const CandidateSet>(cand, std::vector<std::string>(m, "c"));
        // b1[i][p], b2[i][p]: p = 0 even distance, 1 odd distance.
        std::vector<std::array<std::vector<float>, 2>> b1(n);
        std::vector<std::array<std::vector<float>, 2>> b2(n);
        for (std::size_t i = 0; i < n; ++i) {
            b1[i][0] = random_vec(rng, d);
            b2[i][0] = random_vec(rng, d);
            b1[i][1] = parity ? random_vec(rng, d) : b1[i][0];
            b2[i][1] = parity ? random_vec(rng, d) : b2[i][0];
        }
        DialogState state(cs, {.parity = parity, .keep_pair_scores = true});
        for (std::size_t t = 1; t <= n; ++t) {
            state.push_utterance(BeforeEncoding{b1[t - 1][0], b1[t - 1][1]},
                                 BeforeEncoding{b2[t - 1][0], b2[t - 1][1]});
            if (t < 2) {
                continue;
            }
            // Future turn t + 1; element at turn i is (t + 1 - i) turns away.
            auto par = [&](std::size_t i) { return (t + 1 - i) % 2; };
            const auto full = state.score_triple_avg();
            for (std::size_t c = 0; c < m; ++c) {
                long double ref = 0;
                for (std::size_t j = 2; j <= t; ++j) {
                    for (std::size_t i = 1; i < j; ++i) {
                        ref += ref_cos(ref_mean(b1[i - 1][par(i)], b2[j - 1][par(j)]),
                                       cand_rows[c]);
                    }
                }
                const double err = std::abs(static_cast<double>(ref) - full[c]);
                worst = std::max(worst, err);
                if (err > 1e-6) {
                    f.add("triple_avg instance ", inst, " turn ", t, " err ", err);
                }
            }
            for (std::size_t l = 1; l <= t; ++l) {
                const auto last = state.score_last_l(l);
                std::vector<Vector> h1;
                std::vector<Vector> h2;
                for (std::size_t i = 1; i <= t; ++i) {
                    h1.push_back(b1[i - 1][par(i)]);
                    h2.push_back(b2[i - 1][par(i)]);
                }
                const auto scratch = score_triple_last_l(h1, h2, l, *cs);
                const std::size_t first_row = t - std::min(l, t - 1) + 1;
                for (std::size_t c = 0; c < m; ++c) {
                    long double ref = 0;
                    for (std::size_t j = first_row; j <= t; ++j) {
                        for (std::size_t i = 1; i < j; ++i) {
                            ref += ref_cos(ref_mean(h1[i - 1], h2[j - 1]), cand_rows[c]);
                        }
                    }
                    const double e1 = std::abs(static_cast<double>(ref) - last[c]);
                    const double e2 = std::abs(static_cast<double>(ref) - scratch[c]);
                    worst = std::max({worst, e1, e2});
                    if (e1 > 1e-6 || e2 > 1e-6) {
                        f.add("last_l instance ", inst, " turn ", t, " l ", l);
                    }
                }
            }
        }
    }

    // Hand trace: (1,2):0.9, (1,3):0.8, (2,3):0.4 -> 0.85.
    {
        const std::vector<std::pair<int, int>> idx{{1, 2}, {1, 3}, {2, 3}};
        const auto s = score_maxsim(ScoreMatrix(3, 1, {0.9, 0.8, 0.4}), idx);
        if (std::abs(s[0] - 0.85) > 1e-12) {
            f.add("MaxSim hand trace gives ", s[0]);
        }
    }
    // Independent greedy: sort (score desc, row asc) tuples, admit while either end is fresh.
    for (int tri = 0; tri < 100; ++tri) {
        const int n = 2 + static_cast<int>(rng.index(9));
        const std::size_t m = 1 + rng.index(5);
        std::vector<std::pair<int, int>> idx;
        for (int j = 2; j <= n; ++j) {
            for (int i = 1; i < j; ++i) {
                idx.emplace_back(i, j);
            }
        }
        const bool quantized = tri % 3 == 0;  // forces ties
        ScoreMatrix s(idx.size(), m);
        for (auto& x : s.data()) {
            x = quantized ? std::round(rng.uniform(-1.0, 1.0) * 4.0) / 4.0 : rng.uniform(-1.0, 1.0);
        }
        std::vector<std::size_t> admitted;
        const auto got = score_maxsim(s, idx, &admitted);
        for (std::size_t c = 0; c < m; ++c) {
            std::vector<std::tuple<double, std::size_t>> order;
            for (std::size_t r = 0; r < idx.size(); ++r) {
                order.emplace_back(-s(r, c), r);
            }
            std::sort(order.begin(), order.end());
            std::set<int> used;
            long double sum = 0;
            std::size_t count = 0;
            for (const auto& [neg, r] : order) {
                const auto [i, j] = idx[r];
                if (!used.contains(i) || !used.contains(j)) {
                    sum += -neg;
                    ++count;
                    used.insert(i);
                    used.insert(j);
                }
            }
            const double ref = static_cast<double>(sum / count);
            if (std::abs(ref - got[c]) > 1e-12 || admitted[c] != count) {
                f.add("MaxSim triangle ", tri, " candidate ", c, ": ", got[c], " vs ", ref);
            }
            const auto lo = static_cast<std::size_t>((n + 1) / 2 - 1);
            if (count < lo || count > static_cast<std::size_t>(n - 1)) {
                f.add("MaxSim admitted count ", count, " outside bounds for n=", n);
            }
        }
    }
    std::ostringstream ok;
    ok << "200 incremental instances, last-l rows, 100 MaxSim triangles; max abs err " << worst;
    return finish("scoring oracles", f, ok.str(), start, 10.0);
}

CheckResult check_complexity() {
    const auto start = Clock::now();
    Failures f;
    {
        Matrix cand(3, 4, std::vector<float>(12, 1.0f));
        auto cs = std::make_shared<const CandidateSet>(cand, std::vector<std::string>(3, "c"));
        DialogState state(cs, {.parity = true, .keep_pair_scores = false});
        Rng rng(7);
        for (std::size_t t = 1; t <= 30; ++t) {
            state.push_utterance(BeforeEncoding{random_vec(rng, 4), random_vec(rng, 4)},
                                 BeforeEncoding{random_vec(rng, 4), random_vec(rng, 4)});
            if (state.last_new_pairs() != t - 1) {
                f.add("turn ", t, " materialized ", state.last_new_pairs());
            }
            if (state.pairs_materialized() != t * (t - 1) / 2
                || state.pair_index().size() != t * (t - 1) / 2) {
                f.add("cumulative count at turn ", t, " is ", state.pairs_materialized());
            }
        }
    }
    const auto table = run_bench(5, 10, 8, 1);
    std::vector<std::size_t> growth;
    for (const auto& row : table) {
        growth.push_back(row.relative_growth);
    }
    if (growth != std::vector<std::size_t>{0, 1, 2, 3, 4} || table.back().total_states != 10) {
        f.add("bench at 5 turns does not show growth 0,1,2,3,4 and total 10");
    }

    // Cost per materialized pair must not grow with t.
    const std::size_t turns = 160;
    const auto timing = run_bench(turns, 400, 32, 3, false, 3);
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& row : timing) {
        x.push_back(static_cast<double>(row.turn));
        y.push_back(row.push_seconds);
    }
    const auto fit = fit_line(x, y);
    auto per_pair = [&](std::size_t from, std::size_t to) {
        double s = 0.0;
        for (std::size_t t = from; t < to; ++t) {
            s += timing[t].push_seconds / static_cast<double>(timing[t].relative_growth);
        }
        return s / static_cast<double>(to - from);
    };
    const double early = per_pair(turns / 4, turns / 2);
    const double late = per_pair(3 * turns / 4, turns);
    if (late > 2.0 * early) {
        f.add("per-pair cost grew from ", early * 1e9, " ns to ", late * 1e9, " ns");
    }
    if (!(fit.slope > 0.0)) {
        f.add("per-turn time does not increase with t (slope ", fit.slope, ")");
    }
    std::ostringstream ok;
    ok << "t-1 pairs per turn, n(n-1)/2 total, bench 0,1,2,3,4 / 10; time fit slope "
       << fit.slope * 1e6 << " us/turn, R^2 " << fit.r2 << ", per-pair cost ratio late/early "
       << late / early;
    return finish("complexity contract", f, ok.str(), start, 60.0);
}

CheckResult check_gradients(std::uint64_t seed) {
    const auto start = Clock::now();
    Failures f;
    Rng rng(seed, 0x9d);
    const std::size_t dims[] = {2, 8, 16};
    double worst = 0.0;
    for (int draw = 0; draw < 50; ++draw) {
        const std::size_t d = dims[draw % 3];
        Corpus corpus;
        const std::size_t vocab = 6;
        for (std::size_t v = 0; v < vocab; ++v) {
            corpus.intern("u" + std::to_string(v));
        }
        Dialog dialog;
        for (int t = 0; t < 5; ++t) {
            dialog.push_back(static_cast<UtteranceId>(rng.index(vocab)));
        }
        corpus.add_dialog(dialog);
        const Subspace spaces[] = {Subspace::Before, Subspace::Before1, Subspace::Before2};
        const auto slots = make_slots(spaces, draw % 2 == 0);
        const auto params = EncoderParams::init_random(corpus.vocab(), d, slots, seed + draw);

        std::vector<Example> batch;
        const std::size_t size = 1 + rng.index(3);
        for (std::size_t b = 0; b < size; ++b) {
            const int k = 3 + static_cast<int>(rng.index(3));
            const int i = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(k - 2)));
            const int j = i + 1 + static_cast<int>(rng.index(static_cast<std::size_t>(k - i - 1)));
            const double target = rng.uniform();
            if (rng.index(2) == 0) {
                PairExample p;
                p.i = i;
                p.k = k;
                p.target = target;
                p.space = rng.index(2) == 0 ? PairSpace::Before : PairSpace::Before2;
                if (rng.index(3) == 0) {
                    p.pattern = PairPattern::RandomAfter;
                    p.subst = static_cast<UtteranceId>(rng.index(vocab));
                } else if (rng.index(3) == 0) {
                    p.pattern = PairPattern::Directional;
                }
                batch.emplace_back(p);
            } else {
                TripletExample t;
                t.i = i;
                t.j = j;
                t.k = k;
                t.target = target;
                if (rng.index(2) == 0) {
                    t.pattern = TriplePattern::RandomBoth;
                    t.subst_i = static_cast<UtteranceId>(rng.index(vocab));
                    t.subst_j = static_cast<UtteranceId>(rng.index(vocab));
                }
                batch.emplace_back(t);
            }
        }
        const auto analytic = grad(params, batch, corpus);
        // Truncation error of the central difference scales as eps^2; 1e-5 keeps it far below
        // the tolerance for the small-norm vectors of a fresh initialization.
        const auto numeric = finite_diff_grad(params, batch, corpus, 1e-5);
        const double rel = max_relative_error(analytic, numeric, 1e-6);
        worst = std::max(worst, rel);
        if (rel > 1e-4) {
            f.add("draw ", draw, " (d=", d, ") relative error ", rel);
        }
    }
    std::ostringstream ok;
    ok << "50 draws over d in {2,8,16}; max relative error " << worst;
    return finish("gradient correctness", f, ok.str(), start, 5.0);
}

CheckResult check_calibration(std::uint64_t seed) {
    const auto start = Clock::now();
    Failures f;
    Rng rng(seed, 0xca1);
    double sum = 0.0;
    const std::size_t items = 1000;
    std::vector<double> ranks;
    for (std::size_t it = 0; it < items; ++it) {
        const std::size_t pool = 2 + rng.index(99);
        std::vector<double> s(pool);
        for (auto& x : s) {
            x = rng.uniform();
        }
        const auto r = rank_true(s, rng.index(pool));
        sum += normalized_rank(r, pool);
        ranks.push_back(r);
    }
    const double mean = sum / static_cast<double>(items);
    if (std::abs(mean - 0.5) > 0.03) {
        f.add("random scorer mean normalized rank ", mean);
    }
    std::vector<std::size_t> ks(100);
    std::iota(ks.begin(), ks.end(), std::size_t{1});
    const auto hits = hits_at(ranks, ks);
    double prev = -1.0;
    for (const auto& [k, h] : hits) {
        if (h < prev) {
            f.add("Hits@", k, " decreased");
        }
        prev = h;
    }
    if (hits.at(100) != 1.0) {
        f.add("Hits@pool_size != 1");
    }
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t pool = 1 + rng.index(30);
        std::vector<double> s(pool);
        for (auto& x : s) {
            x = std::round(rng.uniform(-2.0, 2.0) * 4.0) / 4.0;  // ties included
        }
        const std::size_t t = rng.index(pool);
        const double base = rank_true(s, t);
        const std::vector<double (*)(double)> transforms{
            [](double v) { return std::exp(v); }, [](double v) { return 3.0 * v + 1.0; },
            [](double v) { return std::atan(v); }, [](double v) { return v * v * v; }};
        for (auto tf : transforms) {
            std::vector<double> s2(pool);
            std::transform(s.begin(), s.end(), s2.begin(), tf);
            if (rank_true(s2, t) != base) {
                f.add("rank changed under a strictly increasing transform in trial ", trial);
            }
        }
    }
    std::ostringstream ok;
    ok << "random mean normalized rank " << mean << " over 1000 items; Hits@k monotone; "
       << "rank invariant under 4 transforms";
    return finish("evaluation calibration", f, ok.str(), start, 10.0);
}

std::vector<XorSeedRun> run_xor_experiment(const XorExperimentConfig& cfg) {
    std::vector<XorSeedRun> runs;
    for (std::uint64_t seed = 0; seed < cfg.seeds; ++seed) {
        const auto start = Clock::now();
        const auto train_corpus = gen_synthetic_corpus(
            {cfg.vocab, cfg.train_dialogs, 3, CorpusStructure::XorCooccurrence, seed});
        const auto test_corpus = gen_synthetic_corpus(
            {cfg.vocab, cfg.test_dialogs, 3, CorpusStructure::XorCooccurrence, seed + 1000});
        TrainConfig tc;
        tc.dim = cfg.dim;
        tc.epochs = cfg.epochs;
        tc.learning_rate = cfg.learning_rate;
        tc.optimizer = cfg.adam ? Optimizer::Adam : Optimizer::Sgd;
        tc.seed = seed;
        tc.stage = Stage::CclPretrain;
        const auto ccl = train(train_corpus, tc);
        tc.stage = Stage::C3l;
        const auto c3l = train(train_corpus, tc);

        SeqEvalConfig triple;
        triple.scorer.variant = Variant::TripleAvg;
        SeqEvalConfig bi;
        bi.scorer.variant = Variant::Bi;

        XorSeedRun run;
        run.seed = seed;
        run.triple_disambiguation = eval_pair_disambiguation(test_corpus, c3l.params, triple).accuracy;
        run.bi_disambiguation = eval_pair_disambiguation(test_corpus, ccl.params, bi).accuracy;
        for (const auto& item : eval_sequence_modeling(test_corpus, c3l.params, bi).items) {
            run.c3l_bi_norm_ranks.push_back(item.normalized_rank);
        }
        for (const auto& item : eval_sequence_modeling(test_corpus, ccl.params, bi).items) {
            run.ccl_bi_norm_ranks.push_back(item.normalized_rank);
        }
        run.triple_avg_norm_rank =
            eval_sequence_modeling(test_corpus, c3l.params, triple).avg_norm_rank;
        for (const auto& row : additivity_analysis(test_corpus, c3l.params, 2, AdditivityMode::Triple,
                                                   std::nullopt, 20, seed)) {
            run.triple_gap.push_back(row.gap);
        }
        for (const auto& row :
             additivity_analysis(test_corpus, ccl.params, 2, AdditivityMode::Bi, std::nullopt, 20, seed)) {
            run.bi_gap.push_back(row.gap);
        }
        run.seconds = elapsed(start);
        runs.push_back(std::move(run));
    }
    return runs;
}

CheckResult check_cooccurrence_separation(const std::vector<XorSeedRun>& runs) {
    const auto start = Clock::now();
    std::size_t good = 0;
    std::ostringstream os;
    os.precision(3);
    os << "triple/bi per seed:";
    double secs = 0.0;
    for (const auto& r : runs) {
        const bool ok = r.triple_disambiguation > 0.9 && std::abs(r.bi_disambiguation - 0.5) <= 0.1;
        good += ok ? 1 : 0;
        os << ' ' << r.triple_disambiguation << '/' << r.bi_disambiguation;
        secs += r.seconds;
    }
    CheckResult res;
    res.name = "co-occurrence separation";
    res.seconds = secs + elapsed(start);
    res.passed = good >= 8 && runs.size() >= 10 && res.seconds < 300.0;
    std::ostringstream head;
    head << good << "/" << runs.size() << " seeds pass (need >= 8); ";
    res.detail = head.str() + os.str();
    return res;
}

CheckResult check_bi_transfer(const std::vector<XorSeedRun>& runs) {
    const auto start = Clock::now();
    std::size_t wins = 0;
    std::size_t losses = 0;
    std::size_t items = 0;
    double c3l = 0.0;
    double ccl = 0.0;
    for (const auto& r : runs) {
        for (std::size_t i = 0; i < r.c3l_bi_norm_ranks.size(); ++i) {
            const double a = r.c3l_bi_norm_ranks[i];
            const double b = r.ccl_bi_norm_ranks[i];
            wins += a < b ? 1 : 0;
            losses += a > b ? 1 : 0;
            c3l += a;
            ccl += b;
            ++items;
        }
    }
    c3l /= static_cast<double>(std::max<std::size_t>(items, 1));
    ccl /= static_cast<double>(std::max<std::size_t>(items, 1));
    const double p = sign_test_p(wins, losses);
    CheckResult res;
    res.name = "bi transfer";
    res.seconds = elapsed(start);
    res.passed = items >= 500 && c3l < ccl && p < 0.05;
    std::ostringstream os;
    os << items << " paired items; avg norm rank C3L-bi " << c3l << " vs CCL-bi " << ccl
       << "; wins " << wins << ", losses " << losses << ", sign test p " << p;
    res.detail = os.str();
    return res;
}

CheckResult check_additivity(const std::vector<XorSeedRun>& runs) {
    const auto start = Clock::now();
    Failures f;
    double min_margin = 1e9;
    for (const auto& r : runs) {
        for (std::size_t p = 0; p < r.triple_gap.size(); ++p) {
            min_margin = std::min(min_margin, r.triple_gap[p] - r.bi_gap[p]);
            if (!(r.triple_gap[p] > r.bi_gap[p])) {
                f.add("seed ", r.seed, " position ", p + 1, ": triple gap ", r.triple_gap[p],
                      " <= bi gap ", r.bi_gap[p]);
            }
        }
    }
    // Untrained models.
    const auto corpus = gen_synthetic_corpus({20, 200, 3, CorpusStructure::XorCooccurrence, 77});
    const Subspace spaces[] = {Subspace::Before, Subspace::Before1, Subspace::Before2};
    std::vector<double> tri(2, 0.0);
    std::vector<double> bi(2, 0.0);
    const std::size_t seeds = 50;
    for (std::size_t s = 0; s < seeds; ++s) {
        const auto params = EncoderParams::init_random(corpus.vocab(), 16,
                                                       make_slots(spaces, true), 5000 + s);
        const auto t = additivity_analysis(corpus, params, 2, AdditivityMode::Triple, std::nullopt, 20, s);
        const auto b = additivity_analysis(corpus, params, 2, AdditivityMode::Bi, Subspace::Before, 20, s);
        for (std::size_t p = 0; p < 2; ++p) {
            tri[p] += t[p].gap / static_cast<double>(seeds);
            bi[p] += b[p].gap / static_cast<double>(seeds);
        }
    }
    for (std::size_t p = 0; p < 2; ++p) {
        if (std::abs(tri[p]) >= 0.1 || std::abs(bi[p]) >= 0.1) {
            f.add("untrained gap at position ", p + 1, ": triple ", tri[p], ", bi ", bi[p]);
        }
    }
    std::ostringstream ok;
    ok << "triple gap exceeds bi gap at both positions in " << runs.size()
       << " seeds (min margin " << min_margin << "); untrained gaps triple " << tri[0] << ", "
       << tri[1] << " bi " << bi[0] << ", " << bi[1];
    return finish("additivity analysis", f, ok.str(), start, 120.0);
}

std::vector<CheckResult> run_oracle_suites(std::uint64_t seed) {
    return {check_targets(), check_scoring_oracles(seed), check_complexity(),
            check_gradients(seed), check_calibration(seed)};
}

}  // namespace triplenc::checks
