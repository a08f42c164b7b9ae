#include "triplenc/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "triplenc/error.hpp"
#include "triplenc/rng.hpp"

namespace triplenc {

namespace {

// Parity of the distance from turn `i` to a future turn whose parity is `phase`.
Parity phase_parity(std::size_t phase, std::size_t i, bool enabled) {
    if (!enabled) {
        return Parity::Even;  // both members of a BeforeEncoding are equal then
    }
    return ((phase + i) % 2 != 0) ? Parity::Odd : Parity::Even;
}

void require_dim(std::span<const float> v, std::size_t dim) {
    if (v.size() != dim) {
        throw DimMismatch(dim, v.size());
    }
}

}  // namespace

CandidateSet::CandidateSet(Matrix after, std::vector<std::string> labels)
    : after_(std::move(after)), labels_(std::move(labels)) {
    if (labels_.size() != after_.rows()) {
        throw DimMismatch(after_.rows(), labels_.size());
    }
    require_finite(after_.data(), "candidate matrix");
    norms_ = row_norms(after_);
    for (std::size_t r = 0; r < norms_.size(); ++r) {
        if (norms_[r] == 0.0) {
            throw ZeroNorm("candidate", r);
        }
    }
}

BeforeEncoding encode_before(const EncoderParams& params, Subspace space, UtteranceId id) {
    const auto even = params.encode(space, id, 2);
    const auto odd = params.encode(space, id, 1);
    return {Vector(even.begin(), even.end()), Vector(odd.begin(), odd.end())};
}

CandidateSet make_candidates(const EncoderParams& params, std::span<const UtteranceId> ids) {
    Matrix m(ids.size(), params.dim());
    std::vector<std::string> labels;
    labels.reserve(ids.size());
    const Slot after = params.resolve(Subspace::After, Parity::None);
    for (std::size_t r = 0; r < ids.size(); ++r) {
        const auto v = params.vec(after, ids[r]);
        std::copy(v.begin(), v.end(), m.row(r).begin());
        labels.push_back(params.vocab().at(ids[r]));
    }
    return {std::move(m), std::move(labels)};
}

std::string_view name(Variant v) {
    switch (v) {
        case Variant::Bi: return "bi";
        case Variant::TripleAvg: return "triple-avg";
        case Variant::TripleLastL: return "triple-last-l";
        case Variant::MaxSim: return "maxsim";
    }
    return "?";
}

std::optional<Variant> parse_variant(std::string_view s) {
    for (auto v : {Variant::Bi, Variant::TripleAvg, Variant::TripleLastL, Variant::MaxSim}) {
        if (name(v) == s) {
            return v;
        }
    }
    return std::nullopt;
}

void validate(const ScorerConfig& cfg) {
    if (cfg.variant == Variant::TripleLastL && cfg.l < 1) {
        throw InvalidConfig("l must be >= 1 for triple-last-l");
    }
    if (cfg.max_distance && *cfg.max_distance < 1) {
        throw InvalidConfig("max distance must be >= 1");
    }
}

DialogState::DialogState(std::shared_ptr<const CandidateSet> candidates)
    : DialogState(std::move(candidates), Options{}) {}

DialogState::DialogState(std::shared_ptr<const CandidateSet> candidates, Options options)
    : candidates_(std::move(candidates)), options_(options) {
    if (!candidates_) {
        throw InvalidConfig("dialog state needs a candidate set");
    }
    for (auto& acc : accumulated_) {
        acc.assign(candidates_->size(), 0.0);
    }
}

void DialogState::push_utterance(const BeforeEncoding& b1, const BeforeEncoding& b2) {
    push_b2(b2);
    finalize_b1(b1);
}

void DialogState::push_utterance(const Vector& b1, const Vector& b2) {
    push_utterance(BeforeEncoding::single(b1), BeforeEncoding::single(b2));
}

void DialogState::push_b2(const BeforeEncoding& b2) {
    if (!finalized()) {
        throw std::logic_error("finalize_b1 must be called before the next push_b2");
    }
    const std::size_t dim = candidates_->dim();
    require_dim(b2.even, dim);
    require_dim(b2.odd, dim);

    ++turn_;
    const std::size_t t = turn_;
    const std::size_t n_cand = candidates_->size();
    for (std::size_t p = 0; p < phases(); ++p) {
        const auto& right = b2.at(phase_parity(p, t, options_.parity));
        Matrix pooled(t - 1, dim);
        for (std::size_t i = 1; i < t; ++i) {
            const auto& left = b1_[i - 1].at(phase_parity(p, i, options_.parity));
            const auto mixed = mean_pool(left, right);
            std::copy(mixed.begin(), mixed.end(), pooled.row(i - 1).begin());
        }
        const auto scores =
            batch_pair_candidate_scores(pooled, candidates_->after(), candidates_->norms());
        std::vector<double> row_sum(n_cand, 0.0);
        for (std::size_t r = 0; r < scores.rows(); ++r) {
            const auto s = scores.row(r);
            for (std::size_t c = 0; c < n_cand; ++c) {
                row_sum[c] += s[c];
            }
        }
        for (std::size_t c = 0; c < n_cand; ++c) {
            accumulated_[p][c] += row_sum[c];
        }
        row_sums_[p].push_back(std::move(row_sum));
        if (options_.keep_pair_scores) {
            pair_scores_[p].insert(pair_scores_[p].end(), scores.data().begin(),
                                   scores.data().end());
        }
    }
    for (std::size_t i = 1; i < t; ++i) {
        pair_index_.emplace_back(static_cast<int>(i), static_cast<int>(t));
    }
    last_new_pairs_ = t - 1;
    pairs_total_ += t - 1;
    b2_.push_back(b2);
}

void DialogState::finalize_b1(const BeforeEncoding& b1) {
    if (b1_.size() + 1 != turn_) {
        throw std::logic_error("finalize_b1 must follow push_b2");
    }
    require_dim(b1.even, candidates_->dim());
    require_dim(b1.odd, candidates_->dim());
    b1_.push_back(b1);
}

std::size_t DialogState::phase() const noexcept {
    return options_.parity ? (turn_ + 1) % 2 : 0;
}

void DialogState::require_context() const {
    if (turn_ < 2) {
        throw InsufficientContext("triple scoring needs at least 2 turns, have "
                                  + std::to_string(turn_));
    }
}

std::vector<double> DialogState::score_triple_avg() const {
    require_context();
    return accumulated_[phase()];
}

std::vector<double> DialogState::score_last_l(std::size_t l) const {
    require_context();
    if (l < 1) {
        throw InvalidConfig("l must be >= 1");
    }
    const auto& rows = row_sums_[phase()];
    std::vector<double> out(candidates_->size(), 0.0);
    const std::size_t keep = std::min(l, turn_ - 1);
    for (std::size_t r = rows.size() - keep; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < out.size(); ++c) {
            out[c] += rows[r][c];
        }
    }
    return out;
}

ScoreMatrix DialogState::pair_scores() const {
    if (!options_.keep_pair_scores) {
        throw std::logic_error("pair scores were not kept; enable Options::keep_pair_scores");
    }
    return ScoreMatrix(pair_index_.size(), candidates_->size(), pair_scores_[phase()]);
}

std::vector<double> DialogState::score_maxsim() const {
    require_context();
    return triplenc::score_maxsim(pair_scores(), pair_index_);
}

std::vector<double> score_pairs(std::span<const Vector> left, std::span<const Vector> right,
                                const CandidateSet& candidates, const PairFilter& keep,
                                std::size_t* scored_pairs) {
    if (left.size() != right.size()) {
        throw DimMismatch(left.size(), right.size());
    }
    const std::size_t n = left.size();
    Matrix pooled;
    for (std::size_t j = 2; j <= n; ++j) {
        for (std::size_t i = 1; i < j; ++i) {
            if (keep && !keep(static_cast<int>(i), static_cast<int>(j))) {
                continue;
            }
            const auto mixed = mean_pool(left[i - 1], right[j - 1]);
            pooled.append_row(mixed);
        }
    }
    if (scored_pairs != nullptr) {
        *scored_pairs += pooled.rows();
    }
    std::vector<double> out(candidates.size(), 0.0);
    if (pooled.empty()) {
        return out;
    }
    const auto scores = batch_pair_candidate_scores(pooled, candidates.after(), candidates.norms());
    for (std::size_t r = 0; r < scores.rows(); ++r) {
        const auto s = scores.row(r);
        for (std::size_t c = 0; c < out.size(); ++c) {
            out[c] += s[c];
        }
    }
    return out;
}

std::vector<double> score_triple_full(std::span<const Vector> b1_history,
                                      std::span<const Vector> b2_history,
                                      const CandidateSet& candidates) {
    if (b1_history.size() < 2) {
        throw InsufficientContext("triple scoring needs at least 2 turns");
    }
    return score_pairs(b1_history, b2_history, candidates, {});
}

std::vector<double> score_triple_last_l(std::span<const Vector> b1_history,
                                        std::span<const Vector> b2_history, std::size_t l,
                                        const CandidateSet& candidates) {
    if (l < 1) {
        throw InvalidConfig("l must be >= 1");
    }
    const std::size_t n = b1_history.size();
    if (n < 2) {
        throw InsufficientContext("triple scoring needs at least 2 turns");
    }
    const std::size_t rows = std::min(l, n - 1);
    const int first_row = static_cast<int>(n - rows + 1);
    return score_pairs(b1_history, b2_history, candidates,
                       [first_row](int, int j) { return j >= first_row; });
}

std::vector<double> score_bi(std::span<const Vector> b_history, const CandidateSet& candidates) {
    if (b_history.empty()) {
        throw InsufficientContext("bi scoring needs at least 1 turn");
    }
    std::vector<double> out(candidates.size(), 0.0);
    const auto scores = batch_pair_candidate_scores(Matrix::from_rows(std::vector<Vector>(
                                                        b_history.begin(), b_history.end())),
                                                    candidates.after(), candidates.norms());
    for (std::size_t r = 0; r < scores.rows(); ++r) {
        const auto s = scores.row(r);
        for (std::size_t c = 0; c < out.size(); ++c) {
            out[c] += s[c];
        }
    }
    return out;
}

std::vector<double> score_maxsim(const ScoreMatrix& pair_scores,
                                 std::span<const std::pair<int, int>> pair_index,
                                 std::vector<std::size_t>* admitted) {
    if (pair_scores.rows() == 0 || pair_index.empty()) {
        throw EmptyState();
    }
    if (pair_index.size() != pair_scores.rows()) {
        throw DimMismatch(pair_scores.rows(), pair_index.size());
    }
    int max_elem = 0;
    for (const auto& [i, j] : pair_index) {
        max_elem = std::max({max_elem, i, j});
    }
    const std::size_t n_pairs = pair_scores.rows();
    const std::size_t n_cand = pair_scores.cols();
    std::vector<double> out(n_cand, 0.0);
    if (admitted != nullptr) {
        admitted->assign(n_cand, 0);
    }
    std::vector<std::size_t> order(n_pairs);
    std::vector<char> used(static_cast<std::size_t>(max_elem) + 1);
    for (std::size_t c = 0; c < n_cand; ++c) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return pair_scores(a, c) > pair_scores(b, c);
        });
        std::fill(used.begin(), used.end(), 0);
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t r : order) {
            const auto [i, j] = pair_index[r];
            if (!used[static_cast<std::size_t>(i)] || !used[static_cast<std::size_t>(j)]) {
                sum += pair_scores(r, c);
                ++count;
                used[static_cast<std::size_t>(i)] = 1;
                used[static_cast<std::size_t>(j)] = 1;
            }
        }
        out[c] = sum / static_cast<double>(count);
        if (admitted != nullptr) {
            (*admitted)[c] = count;
        }
    }
    return out;
}

double score_planning_bi(std::span<const float> candidate_b, std::span<const float> goal_a) {
    return cosine(candidate_b, goal_a);
}

double score_planning_triple(std::span<const float> candidate_b2,
                             std::span<const Vector> context_b1, std::span<const float> goal_a) {
    if (context_b1.empty()) {
        throw EmptyContext();
    }
    double contextual = 0.0;
    for (const auto& u : context_b1) {
        contextual += cosine(mean_pool(u, candidate_b2), goal_a);
    }
    return cosine(candidate_b2, goal_a) + contextual / static_cast<double>(context_b1.size());
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw DimMismatch(x.size(), y.size());
    }
    const double n = static_cast<double>(x.size());
    if (x.size() < 2) {
        return {};
    }
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    f.r2 = (sxx > 0.0 && syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

std::vector<BenchRow> run_bench(std::size_t turns, std::size_t n_candidates, std::size_t dim,
                                std::uint64_t seed, bool parity, std::size_t repeats) {
    Rng rng(seed);
    auto random_vec = [&] {
        Vector v(dim);
        for (auto& x : v) {
            x = static_cast<float>(rng.uniform(-1.0, 1.0));
        }
        return v;
    };
    Matrix cand(n_candidates, dim);
    for (auto& x : cand.data()) {
        x = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
    std::vector<std::string> labels(n_candidates);
    for (std::size_t c = 0; c < n_candidates; ++c) {
        labels[c] = "c" + std::to_string(c);
    }
    auto candidates = std::make_shared<const CandidateSet>(std::move(cand), std::move(labels));

    std::vector<BeforeEncoding> b1;
    std::vector<BeforeEncoding> b2;
    for (std::size_t t = 0; t < turns; ++t) {
        b1.push_back({random_vec(), random_vec()});
        b2.push_back({random_vec(), random_vec()});
    }

    std::vector<BenchRow> rows(turns);
    for (std::size_t rep = 0; rep < std::max<std::size_t>(repeats, 1); ++rep) {
        DialogState state(candidates, {.parity = parity, .keep_pair_scores = false});
        for (std::size_t t = 0; t < turns; ++t) {
            const auto start = std::chrono::steady_clock::now();
            state.push_utterance(b1[t], b2[t]);
            const auto stop = std::chrono::steady_clock::now();
            const double secs = std::chrono::duration<double>(stop - start).count();
            auto& row = rows[t];
            row.turn = t + 1;
            row.relative_growth = state.last_new_pairs();
            row.total_states = state.pairs_materialized();
            row.push_seconds = rep == 0 ? secs : std::min(row.push_seconds, secs);
        }
    }
    return rows;
}

void write_bench_csv(std::ostream& out, std::span<const BenchRow> rows) {
    out << "turn,relative_growth,total_states,push_us\n";
    for (const auto& r : rows) {
        out << r.turn << ',' << r.relative_growth << ',' << r.total_states << ','
            << r.push_seconds * 1e6 << '\n';
    }
}

}  // namespace triplenc
