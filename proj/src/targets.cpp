#include "triplenc/targets.hpp"

#include <algorithm>
#include <ostream>
#include <string>

#include "triplenc/error.hpp"
#include "triplenc/rng.hpp"

namespace triplenc {

namespace {

void check_order(int i, int j, int k) {
    if (!(i < j && j < k)) {
        throw OrderViolation("triple needs i < j < k, got (" + std::to_string(i) + ", "
                             + std::to_string(j) + ", " + std::to_string(k) + ")");
    }
}

void check_window(int i, int k, int w) {
    if (k <= i || k - i >= w) {
        throw OutOfWindow("turn distance " + std::to_string(k - i) + " outside (0, "
                          + std::to_string(w) + ")");
    }
}

UtteranceId draw_other(Rng& rng, std::span<const UtteranceId> pool, UtteranceId avoid) {
    // Terminates: the caller has checked that the pool holds two distinct ids.
    for (;;) {
        const UtteranceId r = pool[rng.index(pool.size())];
        if (r != avoid) {
            return r;
        }
    }
}

void require_pool(std::span<const UtteranceId> pool) {
    if (pool.empty() || std::all_of(pool.begin(), pool.end(),
                                    [&](UtteranceId id) { return id == pool.front(); })) {
        throw PoolTooSmall("negative sampling needs at least 2 distinct utterances");
    }
}

UtteranceId at_turn(std::span<const UtteranceId> dialog, int turn) {
    if (turn < 1 || static_cast<std::size_t>(turn) > dialog.size()) {
        throw IndexOutOfRange(static_cast<std::size_t>(turn), dialog.size());
    }
    return dialog[static_cast<std::size_t>(turn - 1)];
}

}  // namespace

void validate(const WindowConfig& cfg) {
    if (cfg.w < 3) {
        throw InvalidConfig("window size must be >= 3, got " + std::to_string(cfg.w));
    }
}

double ccl_target(int i, int k, int w) {
    check_window(i, k, w);
    return 1.0 - static_cast<double>(k - i) / w;
}

double c3l_raw(int i, int j, int k, int w) {
    check_order(i, j, k);
    check_window(i, k, w);
    return 2.0 - static_cast<double>(2 * k - (i + j)) / w;
}

double c3l_target(int i, int j, int k, int w) {
    check_order(i, j, k);
    check_window(i, k, w);
    if (w < 3) {
        throw InvalidConfig("window size must be >= 3");
    }
    // With r = w * raw (an integer), the min-max map
    //   1/w + (raw - 1/w) * (1 - 1/w) / ((2 - 3/w) - 1/w)
    // equals ((2w - 4) + (r - 1)(w - 1)) / (w (2w - 4)); a single division keeps the
    // top endpoint at exactly 1.0.
    const long long ww = w;
    const long long r = 2 * ww - (2LL * k - (static_cast<long long>(i) + j));
    const long long num = (2 * ww - 4) + (r - 1) * (ww - 1);
    const long long den = ww * (2 * ww - 4);
    return static_cast<double>(num) / static_cast<double>(den);
}

std::string_view name(PairPattern p) {
    switch (p) {
        case PairPattern::Positive: return "pos";
        case PairPattern::RandomAfter: return "random-after";
        case PairPattern::Directional: return "directional";
    }
    return "?";
}

std::string_view name(TriplePattern p) {
    switch (p) {
        case TriplePattern::Positive: return "pos";
        case TriplePattern::RandomB2: return "random-b2";
        case TriplePattern::RandomB1: return "random-b1";
        case TriplePattern::RandomBoth: return "random-both";
    }
    return "?";
}

std::vector<TripletExample> gen_positive_triples(int n, const WindowConfig& cfg,
                                                 std::size_t dialog) {
    validate(cfg);
    std::vector<TripletExample> out;
    for (int i = 1; i <= n; ++i) {
        for (int j = i + 1; j <= n; ++j) {
            for (int k = j + 1; k <= n && k - i < cfg.w; ++k) {
                TripletExample ex;
                ex.dialog = dialog;
                ex.i = i;
                ex.j = j;
                ex.k = k;
                ex.target = cfg.targets == TargetMode::HardPositive ? 1.0
                                                                    : c3l_target(i, j, k, cfg.w);
                out.push_back(ex);
            }
        }
    }
    return out;
}

std::vector<TripletExample> gen_hard_negatives(std::span<const TripletExample> positives,
                                               std::span<const UtteranceId> dialog,
                                               std::span<const UtteranceId> pool,
                                               const WindowConfig& cfg, std::uint64_t stream) {
    require_pool(pool);
    std::vector<TripletExample> out;
    out.reserve(positives.size() * 3);
    std::optional<Rng> rng;
    std::size_t rng_dialog = 0;
    for (const auto& pos : positives) {
        if (!rng || rng_dialog != pos.dialog) {
            rng.emplace(cfg.seed, stream, pos.dialog);
            rng_dialog = pos.dialog;
        }
        const UtteranceId ui = at_turn(dialog, pos.i);
        const UtteranceId uj = at_turn(dialog, pos.j);

        TripletExample base = pos;
        base.target = 0.0;

        TripletExample b2 = base;
        b2.pattern = TriplePattern::RandomB2;
        b2.subst_j = draw_other(*rng, pool, uj);
        out.push_back(b2);

        TripletExample b1 = base;
        b1.pattern = TriplePattern::RandomB1;
        b1.subst_i = draw_other(*rng, pool, ui);
        out.push_back(b1);

        TripletExample both = base;
        both.pattern = TriplePattern::RandomBoth;
        both.subst_i = draw_other(*rng, pool, ui);
        both.subst_j = draw_other(*rng, pool, uj);
        out.push_back(both);
    }
    return out;
}

std::vector<PairExample> gen_positive_pairs(int n, const WindowConfig& cfg, std::size_t dialog) {
    validate(cfg);
    std::vector<PairExample> out;
    for (int i = 1; i <= n; ++i) {
        for (int k = i + 1; k <= n && k - i < cfg.w; ++k) {
            PairExample ex;
            ex.dialog = dialog;
            ex.i = i;
            ex.k = k;
            ex.target = cfg.targets == TargetMode::HardPositive ? 1.0 : ccl_target(i, k, cfg.w);
            out.push_back(ex);
        }
    }
    return out;
}

std::vector<PairExample> gen_pair_negatives(std::span<const PairExample> positives,
                                            std::span<const UtteranceId> dialog,
                                            std::span<const UtteranceId> pool,
                                            const WindowConfig& cfg, std::uint64_t stream) {
    require_pool(pool);
    std::vector<PairExample> out;
    out.reserve(positives.size() * 2);
    std::optional<Rng> rng;
    std::size_t rng_dialog = 0;
    for (const auto& pos : positives) {
        if (!rng || rng_dialog != pos.dialog) {
            // Offset keeps pair and triple streams of the same dialog apart.
            rng.emplace(cfg.seed ^ 0x9e3779b97f4a7c15ULL, stream, pos.dialog);
            rng_dialog = pos.dialog;
        }
        PairExample random = pos;
        random.target = 0.0;
        random.pattern = PairPattern::RandomAfter;
        random.subst = draw_other(*rng, pool, at_turn(dialog, pos.k));
        out.push_back(random);

        PairExample directional = pos;
        directional.target = 0.0;
        directional.pattern = PairPattern::Directional;
        out.push_back(directional);
    }
    return out;
}

std::vector<PairExample> gen_bi_pairs(std::span<const UtteranceId> dialog,
                                      std::span<const UtteranceId> pool, const WindowConfig& cfg,
                                      std::size_t dialog_index, std::uint64_t stream) {
    auto out = gen_positive_pairs(static_cast<int>(dialog.size()), cfg, dialog_index);
    if (out.empty()) {
        return out;
    }
    auto neg = gen_pair_negatives(out, dialog, pool, cfg, stream);
    out.insert(out.end(), neg.begin(), neg.end());
    return out;
}

std::vector<TripletExample> gen_triples(std::span<const UtteranceId> dialog,
                                        std::span<const UtteranceId> pool, const WindowConfig& cfg,
                                        std::size_t dialog_index, std::uint64_t stream) {
    auto out = gen_positive_triples(static_cast<int>(dialog.size()), cfg, dialog_index);
    if (out.empty()) {
        return out;
    }
    auto neg = gen_hard_negatives(out, dialog, pool, cfg, stream);
    out.insert(out.end(), neg.begin(), neg.end());
    return out;
}

void write_examples(std::ostream& out, std::span<const Example> examples) {
    for (const auto& ex : examples) {
        if (const auto* p = std::get_if<PairExample>(&ex)) {
            out << p->i << "\t-\t" << p->k << '\t' << p->target << '\t' << name(p->pattern)
                << '\n';
        } else {
            const auto& t = std::get<TripletExample>(ex);
            out << t.i << '\t' << t.j << '\t' << t.k << '\t' << t.target << '\t'
                << name(t.pattern) << '\n';
        }
    }
}

}  // namespace triplenc
