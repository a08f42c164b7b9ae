#include "triplenc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <ostream>
#include <set>
#include <unordered_map>

#include "json.hpp"

#include "triplenc/error.hpp"
#include "triplenc/rng.hpp"

namespace triplenc {

namespace {

Vector encode_at(const EncoderParams& params, Subspace space, UtteranceId id, int distance,
                 bool parity_on) {
    const Parity p = (parity_on && params.parity_enabled()) ? distance_parity(distance, true)
                                                            : Parity::None;
    const auto v = params.vec(params.resolve(space, p), id);
    return {v.begin(), v.end()};
}

// Before encodings of `context` for a future utterance at turn context.size() + 1.
std::vector<Vector> history(const EncoderParams& params, Subspace space,
                            std::span<const UtteranceId> context, bool parity_on) {
    std::vector<Vector> out;
    out.reserve(context.size());
    const int future = static_cast<int>(context.size()) + 1;
    for (std::size_t i = 0; i < context.size(); ++i) {
        out.push_back(encode_at(params, space, context[i], future - static_cast<int>(i + 1),
                                parity_on));
    }
    return out;
}

void add_into(std::vector<double>& acc, const std::vector<double>& x) {
    for (std::size_t c = 0; c < acc.size(); ++c) {
        acc[c] += x[c];
    }
}

bool uses_triangle(const SeqEvalConfig& cfg) {
    return cfg.component || cfg.scorer.variant != Variant::Bi;
}

// Dialog ids re-expressed over the model vocabulary.
Corpus aligned(const Corpus& test, const EncoderParams& params) {
    return align_vocabulary(test, params.vocab());
}

}  // namespace

double rank_true(std::span<const double> scores, std::size_t true_index) {
    if (true_index >= scores.size()) {
        throw IndexOutOfRange(true_index, scores.size());
    }
    const double s = scores[true_index];
    std::size_t greater = 0;
    std::size_t ties = 0;
    for (std::size_t c = 0; c < scores.size(); ++c) {
        if (c == true_index) {
            continue;
        }
        if (scores[c] > s) {
            ++greater;
        } else if (scores[c] == s) {
            ++ties;
        }
    }
    return 1.0 + static_cast<double>(greater) + static_cast<double>(ties) / 2.0;
}

double normalized_rank(double rank, std::size_t pool_size) {
    if (pool_size <= 1) {
        return 0.0;
    }
    return (rank - 1.0) / static_cast<double>(pool_size - 1);
}

std::string_view name(ComponentScorer c) {
    switch (c) {
        case ComponentScorer::Triple: return "triple";
        case ComponentScorer::TriplePlusBiB2: return "triple+bi-b2";
        case ComponentScorer::DirectNeighbors: return "direct-neighbors";
        case ComponentScorer::BiB1PlusBiB2: return "bi-b1+bi-b2";
        case ComponentScorer::MeanB2Only: return "mean-b2";
        case ComponentScorer::BiB2: return "bi-b2";
        case ComponentScorer::MeanB1Only: return "mean-b1";
    }
    return "?";
}

std::optional<ComponentScorer> parse_component(std::string_view s) {
    for (auto c : {ComponentScorer::Triple, ComponentScorer::TriplePlusBiB2,
                   ComponentScorer::DirectNeighbors, ComponentScorer::BiB1PlusBiB2,
                   ComponentScorer::MeanB2Only, ComponentScorer::BiB2,
                   ComponentScorer::MeanB1Only}) {
        if (name(c) == s) {
            return c;
        }
    }
    return std::nullopt;
}

Subspace bi_subspace(const EncoderParams& params, std::optional<Subspace> requested) {
    if (requested) {
        return *requested;
    }
    return params.has_space(Subspace::Before2) ? Subspace::Before2 : Subspace::Before;
}

std::vector<double> score_context(const EncoderParams& params, std::span<const UtteranceId> context,
                                  const CandidateSet& candidates, const SeqEvalConfig& cfg,
                                  std::size_t* pairs_scored) {
    validate(cfg.scorer);
    const bool parity = cfg.scorer.parity_enabled;
    const int n = static_cast<int>(context.size());
    if (!uses_triangle(cfg)) {
        return score_bi(history(params, bi_subspace(params, cfg.bi_space), context, parity),
                        candidates);
    }
    if (context.size() < 2) {
        throw InsufficientContext("triple scoring needs at least 2 turns, have "
                                  + std::to_string(context.size()));
    }
    const auto b1 = history(params, Subspace::Before1, context, parity);
    const auto b2 = history(params, Subspace::Before2, context, parity);
    // Pair (i, j) is kept when its earlier element lies within max_distance of the future turn.
    PairFilter near = [&](int i, int) {
        return !cfg.scorer.max_distance || (n + 1 - i) < *cfg.scorer.max_distance;
    };

    if (cfg.component) {
        switch (*cfg.component) {
            case ComponentScorer::Triple:
                return score_pairs(b1, b2, candidates, near, pairs_scored);
            case ComponentScorer::TriplePlusBiB2: {
                auto s = score_pairs(b1, b2, candidates, near, pairs_scored);
                add_into(s, score_bi(b2, candidates));
                return s;
            }
            case ComponentScorer::DirectNeighbors:
                return score_pairs(b1, b2, candidates,
                                   [&](int i, int j) { return j == i + 1 && near(i, j); },
                                   pairs_scored);
            case ComponentScorer::BiB1PlusBiB2: {
                auto s = score_bi(b1, candidates);
                add_into(s, score_bi(b2, candidates));
                return s;
            }
            case ComponentScorer::MeanB2Only:
                return score_pairs(b2, b2, candidates, near, pairs_scored);
            case ComponentScorer::BiB2:
                return score_bi(b2, candidates);
            case ComponentScorer::MeanB1Only:
                return score_pairs(b1, b1, candidates, near, pairs_scored);
        }
    }

    switch (cfg.scorer.variant) {
        case Variant::TripleAvg:
            return score_pairs(b1, b2, candidates, near, pairs_scored);
        case Variant::TripleLastL: {
            const int first_row = n - static_cast<int>(std::min<std::size_t>(cfg.scorer.l,
                                                                             context.size() - 1))
                                  + 1;
            return score_pairs(b1, b2, candidates,
                               [&](int i, int j) { return j >= first_row && near(i, j); },
                               pairs_scored);
        }
        case Variant::MaxSim: {
            Matrix pooled;
            std::vector<std::pair<int, int>> index;
            for (int j = 2; j <= n; ++j) {
                for (int i = 1; i < j; ++i) {
                    if (near(i, j)) {
                        pooled.append_row(mean_pool(b1[i - 1], b2[j - 1]));
                        index.emplace_back(i, j);
                    }
                }
            }
            if (pairs_scored != nullptr) {
                *pairs_scored += index.size();
            }
            if (index.empty()) {
                throw EmptyState();
            }
            return score_maxsim(
                batch_pair_candidate_scores(pooled, candidates.after(), candidates.norms()), index);
        }
        case Variant::Bi:
            break;
    }
    return score_bi(history(params, bi_subspace(params, cfg.bi_space), context, parity),
                    candidates);
}

SeqEvalResult eval_sequence_modeling(const Corpus& test, const EncoderParams& params,
                                     const SeqEvalConfig& cfg) {
    validate(cfg.scorer);
    if (test.empty()) {
        throw EmptyCorpus();
    }
    if (uses_triangle(cfg) && cfg.min_depth < 2) {
        throw InvalidConfig("triple scorers need min_depth >= 2");
    }
    const std::size_t min_depth = std::max<std::size_t>(cfg.min_depth, 1);
    const Corpus corpus = aligned(test, params);

    // Deduplicated pool per depth, in first-seen order.
    std::size_t max_len = 0;
    for (const auto& d : corpus.dialogs()) {
        max_len = std::max(max_len, d.size());
    }
    std::vector<std::vector<UtteranceId>> pools(max_len);
    std::vector<std::unordered_map<UtteranceId, std::size_t>> pool_pos(max_len);
    std::set<UtteranceId> all_pool_ids;
    for (const auto& d : corpus.dialogs()) {
        for (std::size_t k = min_depth; k < d.size(); ++k) {
            if (pool_pos[k].emplace(d[k], pools[k].size()).second) {
                pools[k].push_back(d[k]);
                all_pool_ids.insert(d[k]);
            }
        }
    }
    if (all_pool_ids.empty()) {
        throw EmptyCorpus();
    }

    const std::vector<UtteranceId> union_ids(all_pool_ids.begin(), all_pool_ids.end());
    auto candidates = std::make_shared<const CandidateSet>(make_candidates(params, union_ids));
    std::unordered_map<UtteranceId, std::size_t> union_pos;
    for (std::size_t c = 0; c < union_ids.size(); ++c) {
        union_pos.emplace(union_ids[c], c);
    }
    // Union column of every pool member, per depth.
    std::vector<std::vector<std::size_t>> pool_cols(max_len);
    for (std::size_t k = 0; k < max_len; ++k) {
        for (auto id : pools[k]) {
            pool_cols[k].push_back(union_pos.at(id));
        }
    }

    // The incremental state reproduces every triple variant without a distance cap.
    const bool incremental = uses_triangle(cfg) && !cfg.component && !cfg.scorer.max_distance;
    const bool parity = cfg.scorer.parity_enabled && params.parity_enabled();

    SeqEvalResult result;
    for (std::size_t di = 0; di < corpus.dialogs().size(); ++di) {
        const auto& d = corpus.dialogs()[di];
        std::optional<DialogState> state;
        if (incremental) {
            state.emplace(candidates,
                          DialogState::Options{.parity = parity,
                                               .keep_pair_scores =
                                                   cfg.scorer.variant == Variant::MaxSim});
        }
        for (std::size_t k = 1; k < d.size(); ++k) {
            if (state) {
                const auto id = d[k - 1];
                if (parity) {
                    state->push_utterance(encode_before(params, Subspace::Before1, id),
                                          encode_before(params, Subspace::Before2, id));
                } else {
                    state->push_utterance(
                        encode_at(params, Subspace::Before1, id, 1, false),
                        encode_at(params, Subspace::Before2, id, 1, false));
                }
            }
            if (k < min_depth) {
                continue;
            }
            std::vector<double> scores;
            if (state) {
                switch (cfg.scorer.variant) {
                    case Variant::TripleLastL: scores = state->score_last_l(cfg.scorer.l); break;
                    case Variant::MaxSim: scores = state->score_maxsim(); break;
                    default: scores = state->score_triple_avg(); break;
                }
            } else {
                scores = score_context(params, std::span(d).first(k), *candidates, cfg,
                                       &result.pairs_scored);
            }
            std::vector<double> pool_scores;
            pool_scores.reserve(pool_cols[k].size());
            for (auto c : pool_cols[k]) {
                pool_scores.push_back(scores[c]);
            }
            SeqItem item;
            item.dialog = di;
            item.depth = k;
            item.pool_size = pools[k].size();
            item.rank = rank_true(pool_scores, pool_pos[k].at(d[k]));
            item.normalized_rank = normalized_rank(item.rank, item.pool_size);
            result.items.push_back(item);
        }
        if (state) {
            result.pairs_scored += state->pairs_materialized();
        }
    }

    std::map<std::size_t, DepthSummary> by_depth;
    for (const auto& item : result.items) {
        auto& s = by_depth[item.depth];
        s.depth = item.depth;
        s.pool_size = item.pool_size;
        s.avg_rank += item.rank;
        s.avg_norm_rank += item.normalized_rank;
        ++s.n_items;
    }
    for (auto& [k, s] : by_depth) {
        s.avg_rank /= static_cast<double>(s.n_items);
        s.avg_norm_rank /= static_cast<double>(s.n_items);
        result.avg_rank += s.avg_rank;
        result.avg_norm_rank += s.avg_norm_rank;
        result.depths.push_back(s);
    }
    result.avg_rank /= static_cast<double>(result.depths.size());
    result.avg_norm_rank /= static_cast<double>(result.depths.size());
    return result;
}

void write_depth_csv(std::ostream& out, const SeqEvalResult& result) {
    out << "depth,avg_rank,avg_norm_rank,n_items\n";
    const auto precision = out.precision(10);
    for (const auto& d : result.depths) {
        out << d.depth << ',' << d.avg_rank << ',' << d.avg_norm_rank << ',' << d.n_items << '\n';
    }
    out.precision(precision);
}

void write_summary_json(std::ostream& out, const SeqEvalResult& result,
                        const SeqEvalConfig& cfg) {
    nlohmann::json depths = nlohmann::json::array();
    for (const auto& d : result.depths) {
        depths.push_back({{"depth", d.depth},
                          {"avg_rank", d.avg_rank},
                          {"avg_norm_rank", d.avg_norm_rank},
                          {"n_items", d.n_items},
                          {"pool_size", d.pool_size}});
    }
    nlohmann::json j = {
        {"scorer", cfg.component ? std::string(name(*cfg.component))
                                 : std::string(name(cfg.scorer.variant))},
        {"avg_rank", result.avg_rank},
        {"avg_norm_rank", result.avg_norm_rank},
        {"n_items", result.items.size()},
        {"pairs_scored", result.pairs_scored},
        {"depths", std::move(depths)},
    };
    if (cfg.scorer.variant == Variant::TripleLastL) {
        j["l"] = cfg.scorer.l;
    }
    if (cfg.scorer.max_distance) {
        j["max_distance"] = *cfg.scorer.max_distance;
    }
    out << j.dump(2) << '\n';
}

std::string_view name(Planner p) {
    return p == Planner::Bi ? "bi" : "triple";
}

std::optional<Planner> parse_planner(std::string_view s) {
    if (s == "bi") {
        return Planner::Bi;
    }
    if (s == "triple") {
        return Planner::Triple;
    }
    return std::nullopt;
}

std::map<std::size_t, double> hits_at(std::span<const double> ranks,
                                      std::span<const std::size_t> ks) {
    std::map<std::size_t, double> out;
    for (auto k : ks) {
        if (ranks.empty()) {
            out[k] = 0.0;
            continue;
        }
        const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](double r) {
            return r <= static_cast<double>(k);
        });
        out[k] = static_cast<double>(hits) / static_cast<double>(ranks.size());
    }
    return out;
}

PlanEvalResult eval_planning(const Corpus& test, const EncoderParams& params,
                             const PlanEvalConfig& cfg) {
    if (test.empty()) {
        throw EmptyCorpus();
    }
    if (cfg.history_len < 1 || cfg.goal_distance < 1) {
        throw InvalidConfig("history length and goal distance must be >= 1");
    }
    if (!cfg.external_candidates && cfg.n_distractors < 1) {
        throw InvalidConfig("planning needs at least one distractor");
    }
    if (!cfg.external_candidates && params.vocab_size() < 2) {
        throw PoolTooSmall("distractors need a vocabulary of at least 2 utterances");
    }
    const Corpus corpus = aligned(test, params);
    const std::size_t h = cfg.history_len;
    const int gd = static_cast<int>(cfg.goal_distance);
    const Subspace cand_space =
        cfg.planner == Planner::Bi ? bi_subspace(params, cfg.bi_space) : Subspace::Before2;
    const Slot after = params.resolve(Subspace::After, Parity::None);
    const bool parity = params.parity_enabled();

    PlanEvalResult result;
    for (std::size_t di = 0; di < corpus.dialogs().size(); ++di) {
        const auto& d = corpus.dialogs()[di];
        if (d.size() < h + 1 + cfg.goal_distance) {
            ++result.n_skipped;
            continue;
        }
        const UtteranceId truth = d[h];
        const auto goal_span = params.vec(after, d[h + cfg.goal_distance]);
        const Vector goal(goal_span.begin(), goal_span.end());

        std::vector<UtteranceId> cands{truth};
        if (cfg.external_candidates) {
            const auto it = cfg.external_candidates->find(di);
            if (it == cfg.external_candidates->end()) {
                throw InvalidConfig("no candidates for dialog " + std::to_string(di));
            }
            for (const auto& text : it->second) {
                const auto id = params.require(text);
                if (id != truth) {
                    cands.push_back(id);
                }
            }
        } else {
            Rng rng(cfg.seed, 0x91a0, di);
            const std::size_t v = params.vocab_size();
            for (std::size_t r = 0; r < cfg.n_distractors; ++r) {
                auto id = static_cast<UtteranceId>(rng.index(v - 1));
                if (id >= truth) {
                    ++id;
                }
                cands.push_back(id);
            }
        }

        // Context turns 1..h, candidate at h + 1, goal at h + 1 + gd.
        std::vector<Vector> context_b1;
        if (cfg.planner == Planner::Triple) {
            for (std::size_t i = 0; i < h; ++i) {
                const int dist = static_cast<int>(h + 1) + gd - static_cast<int>(i + 1);
                context_b1.push_back(encode_at(params, Subspace::Before1, d[i], dist, parity));
            }
        }
        std::vector<double> scores;
        scores.reserve(cands.size());
        for (auto c : cands) {
            const auto cv = encode_at(params, cand_space, c, gd, parity);
            scores.push_back(cfg.planner == Planner::Bi
                                 ? score_planning_bi(cv, goal)
                                 : score_planning_triple(cv, context_b1, goal));
        }
        result.ranks.push_back(rank_true(scores, 0));
        ++result.n_items;
    }
    result.hits = hits_at(result.ranks, cfg.ks);
    return result;
}

std::map<std::size_t, std::vector<std::string>> load_candidates_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    std::map<std::size_t, std::vector<std::string>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            out[j.at("dialog").get<std::size_t>()] =
                j.at("candidates").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(lineno, e.what());
        }
    }
    return out;
}

std::string_view name(CorpusStructure s) {
    return s == CorpusStructure::Markov ? "markov" : "xor-cooccurrence";
}

std::optional<CorpusStructure> parse_structure(std::string_view s) {
    if (s == "markov") {
        return CorpusStructure::Markov;
    }
    if (s == "xor-cooccurrence" || s == "xor") {
        return CorpusStructure::XorCooccurrence;
    }
    return std::nullopt;
}

Corpus gen_synthetic_corpus(const SyntheticCorpusConfig& cfg) {
    if (cfg.vocab_size < 2 || cfg.dialog_len < 2) {
        throw InvalidConfig("synthetic corpus needs vocab >= 2 and length >= 2");
    }
    if (cfg.structure == CorpusStructure::XorCooccurrence
        && (cfg.vocab_size < 4 || cfg.dialog_len < 3)) {
        throw InvalidConfig("xor-cooccurrence needs vocab >= 4 and length >= 3");
    }
    Corpus corpus;
    if (cfg.dialog_count == 0) {
        return corpus;
    }
    Rng rng(cfg.seed, 0x5f00);
    if (cfg.structure == CorpusStructure::Markov) {
        std::vector<std::string> text(cfg.vocab_size);
        for (std::size_t v = 0; v < cfg.vocab_size; ++v) {
            text[v] = "u" + std::to_string(v);
            corpus.intern(text[v]);
        }
        // Each utterance prefers a few successors; 10% of steps jump uniformly.
        const std::size_t fanout = std::min<std::size_t>(3, cfg.vocab_size);
        std::vector<std::vector<std::size_t>> next(cfg.vocab_size);
        for (auto& succ : next) {
            for (std::size_t f = 0; f < fanout; ++f) {
                succ.push_back(rng.index(cfg.vocab_size));
            }
        }
        for (std::size_t n = 0; n < cfg.dialog_count; ++n) {
            std::vector<std::string> dialog;
            std::size_t cur = rng.index(cfg.vocab_size);
            dialog.push_back(text[cur]);
            while (dialog.size() < cfg.dialog_len) {
                cur = rng.uniform() < 0.1 ? rng.index(cfg.vocab_size)
                                          : next[cur][rng.index(fanout)];
                dialog.push_back(text[cur]);
            }
            corpus.add_dialog(dialog);
        }
        return corpus;
    }

    const std::size_t groups = cfg.vocab_size / 4;
    const std::size_t fillers = cfg.vocab_size % 4;
    if (cfg.dialog_len > 3 && fillers == 0) {
        throw InvalidConfig("xor-cooccurrence dialogs longer than 3 need vocab % 4 filler utterances");
    }
    for (std::size_t g = 0; g < groups; ++g) {
        const auto gs = std::to_string(g);
        corpus.intern("ctx" + gs + ".p");
        corpus.intern("ctx" + gs + ".q");
        corpus.intern("next" + gs + ".same");
        corpus.intern("next" + gs + ".diff");
    }
    for (std::size_t f = 0; f < fillers; ++f) {
        corpus.intern("filler" + std::to_string(f));
    }
    for (std::size_t n = 0; n < cfg.dialog_count; ++n) {
        Dialog dialog;
        for (std::size_t t = 3; t < cfg.dialog_len; ++t) {
            dialog.push_back(static_cast<UtteranceId>(4 * groups + rng.index(fillers)));
        }
        const auto base = static_cast<UtteranceId>(4 * rng.index(groups));
        const auto x = static_cast<UtteranceId>(rng.index(2));
        const auto y = static_cast<UtteranceId>(rng.index(2));
        dialog.push_back(base + x);
        dialog.push_back(base + y);
        dialog.push_back(base + 2 + (x == y ? 0 : 1));
        corpus.add_dialog(std::move(dialog));
    }
    return corpus;
}

DisambiguationResult eval_pair_disambiguation(const Corpus& test, const EncoderParams& params,
                                              const SeqEvalConfig& cfg) {
    if (test.empty()) {
        throw EmptyCorpus();
    }
    const Corpus corpus = aligned(test, params);
    using Opening = std::pair<UtteranceId, UtteranceId>;
    std::map<Opening, std::set<UtteranceId>> followers;
    for (const auto& d : corpus.dialogs()) {
        if (d.size() >= 3) {
            followers[{d[0], d[1]}].insert(d[2]);
        }
    }

    std::map<std::pair<Opening, UtteranceId>, double> cache;
    auto score = [&](Opening ctx, UtteranceId c) {
        const auto key = std::make_pair(ctx, c);
        if (const auto it = cache.find(key); it != cache.end()) {
            return it->second;
        }
        const UtteranceId ids[] = {c};
        const auto cand = make_candidates(params, ids);
        const UtteranceId context[] = {ctx.first, ctx.second};
        const double s = score_context(params, context, cand, cfg)[0];
        cache.emplace(key, s);
        return s;
    };

    DisambiguationResult result;
    double wins = 0.0;
    for (const auto& d : corpus.dialogs()) {
        if (d.size() < 3) {
            continue;
        }
        const Opening truth{d[0], d[1]};
        const UtteranceId c = d[2];
        const double s_true = score(truth, c);
        bool any = false;
        for (const auto& [other, next] : followers) {
            const bool one_shared = (other.first == truth.first) != (other.second == truth.second);
            if (!one_shared || next.contains(c)) {
                continue;
            }
            const double s_other = score(other, c);
            wins += s_true > s_other ? 1.0 : (s_true == s_other ? 0.5 : 0.0);
            ++result.n_comparisons;
            any = true;
        }
        if (any) {
            ++result.n_items;
        }
    }
    result.accuracy =
        result.n_comparisons == 0 ? 0.0 : wins / static_cast<double>(result.n_comparisons);
    return result;
}

std::vector<AdditivityRow> additivity_analysis(const Corpus& test, const EncoderParams& params,
                                               std::size_t context_len, AdditivityMode mode,
                                               std::optional<Subspace> bi_space,
                                               std::size_t random_samples, std::uint64_t seed) {
    if (test.empty()) {
        throw EmptyCorpus();
    }
    if (context_len < 1 || (mode == AdditivityMode::Triple && context_len < 2)) {
        throw InvalidConfig("context length must be >= 1 (>= 2 for triple mode)");
    }
    if (random_samples < 1) {
        throw InvalidConfig("additivity analysis needs at least one random sample");
    }
    if (params.vocab_size() < 2) {
        throw PoolTooSmall("random utterances need a vocabulary of at least 2 utterances");
    }
    const Corpus corpus = aligned(test, params);
    const bool parity = params.parity_enabled();
    const Subspace bspace = bi_subspace(params, bi_space);

    std::vector<AdditivityRow> rows(context_len);
    for (std::size_t p = 0; p < context_len; ++p) {
        rows[p].position = p + 1;
    }
    for (std::size_t di = 0; di < corpus.dialogs().size(); ++di) {
        const auto& d = corpus.dialogs()[di];
        if (d.size() < context_len + 1) {
            continue;
        }
        const auto context = std::span(d).first(context_len);
        const UtteranceId truth = d[context_len];
        std::vector<UtteranceId> targets{truth};
        Rng rng(seed, 0xadd1, di);
        for (std::size_t r = 0; r < random_samples; ++r) {
            auto id = static_cast<UtteranceId>(rng.index(params.vocab_size() - 1));
            if (id >= truth) {
                ++id;
            }
            targets.push_back(id);
        }
        const auto cands = make_candidates(params, targets);

        // sims[p][c]: similarity of position p's representation to target c.
        std::vector<std::vector<double>> sims(context_len,
                                              std::vector<double>(targets.size(), 0.0));
        if (mode == AdditivityMode::Bi) {
            const auto b = history(params, bspace, context, parity);
            const auto s = batch_pair_candidate_scores(
                Matrix::from_rows(b), cands.after(), cands.norms());
            for (std::size_t p = 0; p < context_len; ++p) {
                const auto row = s.row(p);
                sims[p].assign(row.begin(), row.end());
            }
        } else {
            const auto b1 = history(params, Subspace::Before1, context, parity);
            const auto b2 = history(params, Subspace::Before2, context, parity);
            Matrix pooled;
            std::vector<std::pair<std::size_t, std::size_t>> index;
            for (std::size_t j = 1; j < context_len; ++j) {
                for (std::size_t i = 0; i < j; ++i) {
                    pooled.append_row(mean_pool(b1[i], b2[j]));
                    index.emplace_back(i, j);
                }
            }
            const auto s = batch_pair_candidate_scores(pooled, cands.after(), cands.norms());
            const double share = 1.0 / static_cast<double>(context_len - 1);
            for (std::size_t r = 0; r < index.size(); ++r) {
                const auto row = s.row(r);
                for (std::size_t c = 0; c < targets.size(); ++c) {
                    sims[index[r].first][c] += row[c] * share;
                    sims[index[r].second][c] += row[c] * share;
                }
            }
        }
        for (std::size_t p = 0; p < context_len; ++p) {
            const double correct = sims[p][0];
            const double random =
                std::accumulate(sims[p].begin() + 1, sims[p].end(), 0.0)
                / static_cast<double>(random_samples);
            rows[p].correct += correct;
            rows[p].random += random;
            ++rows[p].n_items;
        }
    }
    for (auto& r : rows) {
        if (r.n_items == 0) {
            throw EmptyCorpus();
        }
        r.correct /= static_cast<double>(r.n_items);
        r.random /= static_cast<double>(r.n_items);
        r.gap = r.correct - r.random;
    }
    return rows;
}

double sign_test_p(std::size_t wins, std::size_t losses) {
    const std::size_t n = wins + losses;
    if (n == 0) {
        return 1.0;
    }
    // P(X >= wins) summed in log space.
    const double log_half_n = static_cast<double>(n) * std::log(0.5);
    double p = 0.0;
    for (std::size_t x = wins; x <= n; ++x) {
        const double log_choose = std::lgamma(static_cast<double>(n) + 1.0)
                                  - std::lgamma(static_cast<double>(x) + 1.0)
                                  - std::lgamma(static_cast<double>(n - x) + 1.0);
        p += std::exp(log_choose + log_half_n);
    }
    return std::min(p, 1.0);
}

}  // namespace triplenc
