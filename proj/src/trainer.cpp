#include "triplenc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "triplenc/error.hpp"
#include "triplenc/rng.hpp"

namespace triplenc {

namespace {

struct Resolved {
    ParamKey lhs1;
    std::optional<ParamKey> lhs2;  // present for triples: lhs = (lhs1 + lhs2) / 2
    ParamKey rhs;
    double target = 0.0;
};

UtteranceId utterance_at(const Corpus& corpus, std::size_t dialog, int turn) {
    const auto& dialogs = corpus.dialogs();
    if (dialog >= dialogs.size()) {
        throw IndexOutOfRange(dialog, dialogs.size());
    }
    const auto& d = dialogs[dialog];
    if (turn < 1 || static_cast<std::size_t>(turn) > d.size()) {
        throw IndexOutOfRange(static_cast<std::size_t>(turn), d.size());
    }
    return d[static_cast<std::size_t>(turn - 1)];
}

ParamKey key(const EncoderParams& params, const Corpus& corpus, Subspace space, UtteranceId id,
             int distance) {
    if (id >= params.vocab_size()) {
        throw UnknownUtterance(id < corpus.vocab().size() ? corpus.text(id)
                                                          : "#" + std::to_string(id));
    }
    const Parity p = space == Subspace::After
                         ? Parity::None
                         : distance_parity(distance, params.parity_enabled());
    return {params.resolve(space, p), id};
}

Resolved resolve(const EncoderParams& params, const Corpus& corpus, const Example& ex) {
    if (const auto* p = std::get_if<PairExample>(&ex)) {
        const int dist = p->k - p->i;
        const Subspace before =
            p->space == PairSpace::Before2 ? Subspace::Before2 : Subspace::Before;
        UtteranceId ui = utterance_at(corpus, p->dialog, p->i);
        UtteranceId uk = utterance_at(corpus, p->dialog, p->k);
        switch (p->pattern) {
            case PairPattern::Positive: break;
            case PairPattern::RandomAfter: uk = p->subst.value(); break;
            case PairPattern::Directional: std::swap(ui, uk); break;
        }
        return {key(params, corpus, before, ui, dist), std::nullopt,
                key(params, corpus, Subspace::After, uk, 0), p->target};
    }
    const auto& t = std::get<TripletExample>(ex);
    const UtteranceId ui = t.subst_i.value_or(utterance_at(corpus, t.dialog, t.i));
    const UtteranceId uj = t.subst_j.value_or(utterance_at(corpus, t.dialog, t.j));
    const UtteranceId uk = utterance_at(corpus, t.dialog, t.k);
    return {key(params, corpus, Subspace::Before1, ui, t.k - t.i),
            key(params, corpus, Subspace::Before2, uj, t.k - t.j),
            key(params, corpus, Subspace::After, uk, 0), t.target};
}

std::vector<double> lhs_vector(const EncoderParams& params, const Resolved& r) {
    const auto a = params.vec(r.lhs1.slot, r.lhs1.row);
    std::vector<double> x(a.begin(), a.end());
    if (r.lhs2) {
        const auto b = params.vec(r.lhs2->slot, r.lhs2->row);
        for (std::size_t m = 0; m < x.size(); ++m) {
            x[m] = (x[m] + static_cast<double>(b[m])) * 0.5;
        }
    }
    return x;
}

struct CosineParts {
    double cos;
    double nx;
    double nz;
};

CosineParts cosine_parts(std::span<const double> x, std::span<const float> z) {
    double xz = 0.0;
    double xx = 0.0;
    double zz = 0.0;
    for (std::size_t m = 0; m < x.size(); ++m) {
        xz += x[m] * z[m];
        xx += x[m] * x[m];
        zz += static_cast<double>(z[m]) * z[m];
    }
    const double nx = std::sqrt(xx);
    const double nz = std::sqrt(zz);
    if (nx == 0.0) {
        throw ZeroNorm("training context vector");
    }
    if (nz == 0.0) {
        throw ZeroNorm("training future vector");
    }
    return {xz / (nx * nz), nx, nz};
}

double example_loss(const EncoderParams& params, const Resolved& r) {
    const auto x = lhs_vector(params, r);
    const auto parts = cosine_parts(x, params.vec(r.rhs.slot, r.rhs.row));
    const double diff = parts.cos - r.target;
    return diff * diff;
}

std::vector<Resolved> resolve_all(const EncoderParams& params, std::span<const Example> batch,
                                  const Corpus& corpus) {
    std::vector<Resolved> out;
    out.reserve(batch.size());
    for (const auto& ex : batch) {
        out.push_back(resolve(params, corpus, ex));
    }
    return out;
}

double mean_loss(const EncoderParams& params, std::span<const Resolved> batch) {
    if (batch.empty()) {
        return 0.0;
    }
    double acc = 0.0;
    for (const auto& r : batch) {
        acc += example_loss(params, r);
    }
    return acc / static_cast<double>(batch.size());
}

Gradient gradient_of(const EncoderParams& params, std::span<const Resolved> batch) {
    Gradient g(params.dim());
    if (batch.empty()) {
        return g;
    }
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (const auto& r : batch) {
        const auto x = lhs_vector(params, r);
        const auto z = params.vec(r.rhs.slot, r.rhs.row);
        const auto [c, nx, nz] = cosine_parts(x, z);
        const double coef = 2.0 * (c - r.target) * inv_n;
        const double inv_xz = 1.0 / (nx * nz);
        const double cx = c / (nx * nx);
        const double cz = c / (nz * nz);
        auto& gz = g.row(r.rhs);
        // d cos / dx = z / (|x||z|) - cos x / |x|^2, and symmetrically for z.
        std::vector<double> gx(x.size());
        for (std::size_t m = 0; m < x.size(); ++m) {
            const double zm = z[m];
            gx[m] = coef * (zm * inv_xz - cx * x[m]);
            gz[m] += coef * (x[m] * inv_xz - cz * zm);
        }
        const double share = r.lhs2 ? 0.5 : 1.0;
        auto& g1 = g.row(r.lhs1);
        for (std::size_t m = 0; m < x.size(); ++m) {
            g1[m] += share * gx[m];
        }
        if (r.lhs2) {
            auto& g2 = g.row(*r.lhs2);
            for (std::size_t m = 0; m < x.size(); ++m) {
                g2[m] += share * gx[m];
            }
        }
    }
    return g;
}

class Updater {
  public:
    Updater(const TrainConfig& cfg) : cfg_(cfg) {}

    void apply(EncoderParams& params, const Gradient& g) {
        ++step_;
        for (const auto& [k, row] : g.rows()) {
            auto v = params.vec(k.slot, k.row);
            if (cfg_.optimizer == Optimizer::Sgd) {
                for (std::size_t m = 0; m < v.size(); ++m) {
                    v[m] = static_cast<float>(v[m] - cfg_.learning_rate * row[m]);
                }
                continue;
            }
            auto& mo = first_[k];
            auto& mv = second_[k];
            if (mo.empty()) {
                mo.assign(v.size(), 0.0);
                mv.assign(v.size(), 0.0);
            }
            const double b1t = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
            const double b2t = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
            for (std::size_t m = 0; m < v.size(); ++m) {
                mo[m] = kBeta1 * mo[m] + (1.0 - kBeta1) * row[m];
                mv[m] = kBeta2 * mv[m] + (1.0 - kBeta2) * row[m] * row[m];
                const double step = cfg_.learning_rate * (mo[m] / b1t) / (std::sqrt(mv[m] / b2t) + 1e-8);
                v[m] = static_cast<float>(v[m] - step);
            }
        }
    }

  private:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;

    const TrainConfig& cfg_;
    std::size_t step_ = 0;
    std::map<ParamKey, std::vector<double>> first_;
    std::map<ParamKey, std::vector<double>> second_;
};

WindowConfig window_of(const TrainConfig& cfg) {
    WindowConfig w;
    w.w = cfg.w;
    w.seed = cfg.seed;
    w.targets = cfg.target_mode;
    return w;
}

enum class Phase { Pairs, Triples };

struct PhaseRun {
    Phase phase;
    std::size_t epochs;
};

}  // namespace

std::string_view name(Stage s) {
    switch (s) {
        case Stage::CclPretrain: return "ccl-pretrain";
        case Stage::C3l: return "c3l";
        case Stage::C3lFromScratch: return "c3l-from-scratch";
    }
    return "?";
}

std::optional<Stage> parse_stage(std::string_view s) {
    for (auto v : {Stage::CclPretrain, Stage::C3l, Stage::C3lFromScratch}) {
        if (name(v) == s) {
            return v;
        }
    }
    return std::nullopt;
}

void validate(const TrainConfig& cfg) {
    if (!(cfg.learning_rate > 0.0)) {
        throw InvalidConfig("learning rate must be > 0");
    }
    if (cfg.epochs < 1) {
        throw InvalidConfig("epochs must be >= 1");
    }
    if (cfg.batch_size < 1) {
        throw InvalidConfig("batch size must be >= 1");
    }
    if (cfg.dim < 1) {
        throw InvalidConfig("dimension must be >= 1");
    }
    validate(window_of(cfg));
}

std::vector<double> Gradient::at(const ParamKey& key) const {
    if (auto it = rows_.find(key); it != rows_.end()) {
        return it->second;
    }
    return std::vector<double>(dim_, 0.0);
}

std::vector<double>& Gradient::row(const ParamKey& key) {
    auto [it, inserted] = rows_.try_emplace(key);
    if (inserted) {
        it->second.assign(dim_, 0.0);
    }
    return it->second;
}

void Gradient::scale(double s) {
    for (auto& [k, row] : rows_) {
        for (auto& x : row) {
            x *= s;
        }
    }
}

double Gradient::l2_norm() const {
    double acc = 0.0;
    for (const auto& [k, row] : rows_) {
        for (double x : row) {
            acc += x * x;
        }
    }
    return std::sqrt(acc);
}

double loss(const EncoderParams& params, std::span<const Example> batch, const Corpus& corpus) {
    const auto resolved = resolve_all(params, batch, corpus);
    return mean_loss(params, resolved);
}

Gradient grad(const EncoderParams& params, std::span<const Example> batch, const Corpus& corpus) {
    const auto resolved = resolve_all(params, batch, corpus);
    return gradient_of(params, resolved);
}

Gradient finite_diff_grad(const EncoderParams& params, std::span<const Example> batch,
                          const Corpus& corpus, double epsilon) {
    const auto resolved = resolve_all(params, batch, corpus);
    EncoderParams probe = params;
    Gradient g(params.dim());
    for (const auto& slot : probe.slots()) {
        for (UtteranceId row = 0; row < probe.vocab_size(); ++row) {
            auto v = probe.vec(slot, row);
            std::vector<double> out(v.size());
            for (std::size_t m = 0; m < v.size(); ++m) {
                const float orig = v[m];
                const float plus = static_cast<float>(orig + epsilon);
                const float minus = static_cast<float>(orig - epsilon);
                v[m] = plus;
                const double lp = mean_loss(probe, resolved);
                v[m] = minus;
                const double lm = mean_loss(probe, resolved);
                v[m] = orig;
                out[m] = (lp - lm) / (static_cast<double>(plus) - static_cast<double>(minus));
            }
            g.row({slot, row}) = std::move(out);
        }
    }
    return g;
}

double max_relative_error(const Gradient& analytic, const Gradient& numeric, double abs_floor) {
    double worst = 0.0;
    auto check = [&](const ParamKey& k) {
        const auto a = analytic.at(k);
        const auto f = numeric.at(k);
        for (std::size_t m = 0; m < a.size(); ++m) {
            const double diff = std::abs(a[m] - f[m]);
            const double scale = std::max(std::abs(a[m]), std::abs(f[m]));
            // Below the absolute floor a coordinate passes regardless of scale.
            const double err = diff <= abs_floor ? 0.0 : diff / scale;
            worst = std::max(worst, err);
        }
    };
    for (const auto& [k, row] : analytic.rows()) {
        check(k);
    }
    for (const auto& [k, row] : numeric.rows()) {
        check(k);
    }
    return worst;
}

std::vector<Example> build_pair_examples(const Corpus& corpus, const TrainConfig& cfg,
                                         std::uint64_t stream) {
    const auto wcfg = window_of(cfg);
    const auto pool = corpus.pool();
    std::vector<Example> out;
    for (std::size_t d = 0; d < corpus.size(); ++d) {
        const auto& dialog = corpus.dialogs()[d];
        for (auto& p : gen_bi_pairs(dialog, pool, wcfg, d, stream)) {
            out.emplace_back(p);
        }
    }
    return out;
}

std::vector<Example> build_triple_examples(const Corpus& corpus, const TrainConfig& cfg,
                                           std::uint64_t stream) {
    const auto wcfg = window_of(cfg);
    const auto pool = corpus.pool();
    std::vector<Example> out;
    for (std::size_t d = 0; d < corpus.size(); ++d) {
        const auto& dialog = corpus.dialogs()[d];
        if (cfg.bi_pos_triple_neg) {
            for (auto p : gen_positive_pairs(static_cast<int>(dialog.size()), wcfg, d)) {
                p.space = PairSpace::Before2;
                out.emplace_back(p);
            }
            const auto pos = gen_positive_triples(static_cast<int>(dialog.size()), wcfg, d);
            if (!pos.empty()) {
                for (auto& t : gen_hard_negatives(pos, dialog, pool, wcfg, stream)) {
                    out.emplace_back(t);
                }
            }
            continue;
        }
        for (auto& t : gen_triples(dialog, pool, wcfg, d, stream)) {
            out.emplace_back(t);
        }
    }
    return out;
}

TrainResult train(const Corpus& corpus, const TrainConfig& cfg, const Corpus* validation) {
    validate(cfg);
    if (corpus.empty()) {
        throw EmptyCorpus();
    }
    std::vector<Subspace> before;
    std::vector<PhaseRun> phases;
    const std::size_t pre = cfg.pretrain_epochs == 0 ? cfg.epochs : cfg.pretrain_epochs;
    switch (cfg.stage) {
        case Stage::CclPretrain:
            before = {Subspace::Before};
            phases = {{Phase::Pairs, cfg.epochs}};
            break;
        case Stage::C3l:
            before = {Subspace::Before, Subspace::Before1, Subspace::Before2};
            phases = {{Phase::Pairs, pre}, {Phase::Triples, cfg.epochs}};
            break;
        case Stage::C3lFromScratch:
            before = {Subspace::Before1, Subspace::Before2};
            phases = {{Phase::Triples, cfg.epochs}};
            break;
    }
    const auto slots = make_slots(before, cfg.parity);

    TrainResult result;
    result.params = EncoderParams::init_random(corpus.vocab(), cfg.dim, slots, cfg.seed);
    auto& params = result.params;

    std::optional<Corpus> val;
    if (validation != nullptr && !validation->empty()) {
        val = align_vocabulary(*validation, corpus.vocab());
    }

    std::uint64_t global_epoch = 0;
    for (std::size_t ph = 0; ph < phases.size(); ++ph) {
        const auto [phase, epochs] = phases[ph];
        const bool last_phase = ph + 1 == phases.size();
        if (phase == Phase::Triples && cfg.stage == Stage::C3l) {
            // The pretrained [B] space seeds both contextual subspaces.
            for (auto p : cfg.parity ? std::vector<Parity>{Parity::Even, Parity::Odd}
                                     : std::vector<Parity>{Parity::None}) {
                params.set_table({Subspace::Before1, p}, params.table({Subspace::Before, p}));
                params.set_table({Subspace::Before2, p}, params.table({Subspace::Before, p}));
            }
        }
        auto build = [&](const Corpus& c, std::uint64_t stream) {
            return phase == Phase::Pairs ? build_pair_examples(c, cfg, stream)
                                         : build_triple_examples(c, cfg, stream);
        };
        std::vector<Example> val_examples;
        if (val) {
            val_examples = build(*val, 0xffffffffULL);
        }
        std::optional<EncoderParams> best;
        double best_val = 0.0;

        Updater updater(cfg);
        for (std::size_t e = 0; e < epochs; ++e, ++global_epoch) {
            auto examples = build(corpus, global_epoch);
            Rng order(cfg.seed, 0x5eed0000ULL + global_epoch);
            order.shuffle(examples);
            for (std::size_t start = 0; start < examples.size(); start += cfg.batch_size) {
                const std::size_t end = std::min(examples.size(), start + cfg.batch_size);
                const std::span<const Example> batch(examples.data() + start, end - start);
                updater.apply(params, grad(params, batch, corpus));
            }
            result.train_loss.push_back(loss(params, examples, corpus));
            if (val) {
                const double vl = loss(params, val_examples, *val);
                result.validation_loss.push_back(vl);
                if (last_phase && (!best || vl < best_val)) {
                    best = params;
                    best_val = vl;
                    result.best_epoch = result.train_loss.size();
                }
            }
        }
        if (last_phase && best) {
            params = std::move(*best);
        }
    }
    if (result.best_epoch == 0) {
        result.best_epoch = result.train_loss.size();
    }
    return result;
}

}  // namespace triplenc
