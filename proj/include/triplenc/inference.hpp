#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "triplenc/encoder.hpp"
#include "triplenc/geometry.hpp"

namespace triplenc {

/// Candidate utterances in the after space, one row per candidate. Immutable; norms are
/// computed once at construction.
class CandidateSet {
  public:
    CandidateSet() = default;
    /// Throws DimMismatch when labels and rows disagree, ZeroNorm naming a zero row,
    /// NonFinite on NaN/inf entries.
    CandidateSet(Matrix after, std::vector<std::string> labels);

    [[nodiscard]] std::size_t size() const noexcept { return after_.rows(); }
    [[nodiscard]] std::size_t dim() const noexcept { return after_.cols(); }
    [[nodiscard]] const Matrix& after() const noexcept { return after_; }
    [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return labels_; }
    [[nodiscard]] std::span<const double> norms() const noexcept { return norms_; }

  private:
    Matrix after_;
    std::vector<std::string> labels_;
    std::vector<double> norms_;
};

/// Before-space encodings of one utterance for both turn-distance parities. Without parity
/// markers both members hold the same vector.
struct BeforeEncoding {
    Vector even;
    Vector odd;

    static BeforeEncoding single(Vector v) { return {v, std::move(v)}; }
    [[nodiscard]] const Vector& at(Parity p) const { return p == Parity::Odd ? odd : even; }
};

/// Encodes utterance `id` in a before subspace for both parities.
BeforeEncoding encode_before(const EncoderParams& params, Subspace space, UtteranceId id);

/// All after-space vectors of `ids`, labelled with their vocabulary text.
CandidateSet make_candidates(const EncoderParams& params, std::span<const UtteranceId> ids);

enum class Variant { Bi, TripleAvg, TripleLastL, MaxSim };

std::string_view name(Variant v);
std::optional<Variant> parse_variant(std::string_view s);

struct ScorerConfig {
    Variant variant = Variant::TripleAvg;
    std::size_t l = 1;            // rows kept by TripleLastL
    bool parity_enabled = true;
    std::optional<int> max_distance;  // drop pairs whose [B1] element is >= this many turns away
};

/// Throws InvalidConfig when l < 1 for TripleLastL or max_distance < 1.
void validate(const ScorerConfig& cfg);

/// Incremental triangular pair state of an ongoing dialog.
///
/// Turn t (1-based) materializes the t - 1 pairs (i, t), i < t, as
/// mean_pool([B1]u_i, [B2]u_t), scores them against every candidate in one batch and adds the
/// result to the running sums. With parity markers the parity of a before encoding depends on
/// the turn of the future utterance, so two accumulators are kept, one per parity of that turn;
/// each pair is scored once per accumulator.
class DialogState {
  public:
    struct Options {
        bool parity = true;
        /// Keep every pair's candidate scores (needed for MaxSim).
        bool keep_pair_scores = false;
    };

    explicit DialogState(std::shared_ptr<const CandidateSet> candidates);
    DialogState(std::shared_ptr<const CandidateSet> candidates, Options options);

    /// push_b2 followed by finalize_b1.
    void push_utterance(const BeforeEncoding& b1, const BeforeEncoding& b2);
    void push_utterance(const Vector& b1, const Vector& b2);

    /// First phase of a turn: only the [B2] encoding of the new utterance is needed to score.
    /// Throws std::logic_error if the previous turn was not finalized.
    void push_b2(const BeforeEncoding& b2);
    /// Second phase: stores the [B1] encoding of the latest utterance for later turns.
    void finalize_b1(const BeforeEncoding& b1);

    [[nodiscard]] std::size_t turn() const noexcept { return turn_; }
    [[nodiscard]] bool finalized() const noexcept { return b1_.size() == turn_; }
    [[nodiscard]] const CandidateSet& candidates() const noexcept { return *candidates_; }
    [[nodiscard]] const std::vector<std::pair<int, int>>& pair_index() const noexcept {
        return pair_index_;
    }
    /// Pairs created by the latest push (turn - 1).
    [[nodiscard]] std::size_t last_new_pairs() const noexcept { return last_new_pairs_; }
    /// Pairs created since construction.
    [[nodiscard]] std::size_t pairs_materialized() const noexcept { return pairs_total_; }

    /// Sum over all pairs i < j <= turn of pair/candidate cosines. Throws InsufficientContext
    /// when turn < 2.
    [[nodiscard]] std::vector<double> score_triple_avg() const;
    /// Sum over the pairs whose later element is among the last min(l, turn - 1) turns.
    [[nodiscard]] std::vector<double> score_last_l(std::size_t l) const;
    /// MaxSim over the full triangle (see score_maxsim below). Needs keep_pair_scores.
    [[nodiscard]] std::vector<double> score_maxsim() const;
    /// Pair x candidate cosines for the upcoming turn, rows ordered as pair_index().
    [[nodiscard]] ScoreMatrix pair_scores() const;

    [[nodiscard]] const std::vector<BeforeEncoding>& b1_history() const noexcept { return b1_; }
    [[nodiscard]] const std::vector<BeforeEncoding>& b2_history() const noexcept { return b2_; }

  private:
    [[nodiscard]] std::size_t phase() const noexcept;
    [[nodiscard]] std::size_t phases() const noexcept { return options_.parity ? 2 : 1; }
    void require_context() const;

    std::shared_ptr<const CandidateSet> candidates_;
    Options options_;
    std::size_t turn_ = 0;
    std::vector<BeforeEncoding> b1_;
    std::vector<BeforeEncoding> b2_;
    std::vector<std::pair<int, int>> pair_index_;
    std::array<std::vector<double>, 2> accumulated_;
    // row_sums_[phase][j - 1]: per-candidate sum over pairs (i, j), i < j.
    std::array<std::vector<std::vector<double>>, 2> row_sums_;
    std::array<std::vector<double>, 2> pair_scores_;  // flattened pairs x candidates
    std::size_t last_new_pairs_ = 0;
    std::size_t pairs_total_ = 0;
};

/// Accepts pair (i, j), 1-based with i < j, for a context of length n.
using PairFilter = std::function<bool(int i, int j)>;

/// Sum of cos(mean_pool(left[i], right[j]), candidate) over i < j accepted by `keep`.
/// `scored_pairs`, when given, is incremented per accepted pair.
std::vector<double> score_pairs(std::span<const Vector> left, std::span<const Vector> right,
                                const CandidateSet& candidates, const PairFilter& keep,
                                std::size_t* scored_pairs = nullptr);

/// Full-triangle sum evaluated from scratch. Throws InsufficientContext for < 2 turns.
std::vector<double> score_triple_full(std::span<const Vector> b1_history,
                                      std::span<const Vector> b2_history,
                                      const CandidateSet& candidates);

/// The last l rows of the triangle: pairs (i, j) with j among the last min(l, n - 1) turns.
/// Throws InsufficientContext for < 2 turns, InvalidConfig for l < 1.
std::vector<double> score_triple_last_l(std::span<const Vector> b1_history,
                                        std::span<const Vector> b2_history, std::size_t l,
                                        const CandidateSet& candidates);

/// Sum over context utterances of cos(context, candidate). Throws InsufficientContext when empty.
std::vector<double> score_bi(std::span<const Vector> b_history, const CandidateSet& candidates);

/// MaxSim aggregation of a full triangle (rows = pairs, columns = candidates). Pairs are visited
/// by descending score, ties by ascending pair row; a pair is added if either element is still
/// unused, then both are marked used; the result is sum / number of added pairs.
/// `admitted`, when given, receives the number of added pairs per candidate.
/// Throws EmptyState when there are no pairs.
std::vector<double> score_maxsim(const ScoreMatrix& pair_scores,
                                 std::span<const std::pair<int, int>> pair_index,
                                 std::vector<std::size_t>* admitted = nullptr);

/// cos([B] candidate, [A] goal).
double score_planning_bi(std::span<const float> candidate_b, std::span<const float> goal_a);

/// cos([B2] c, [A] g) + (1/n) sum_i cos(mean_pool([B1] u_i, [B2] c), [A] g).
/// Throws EmptyContext when the context is empty.
double score_planning_triple(std::span<const float> candidate_b2,
                             std::span<const Vector> context_b1, std::span<const float> goal_a);

struct BenchRow {
    std::size_t turn = 0;
    std::size_t relative_growth = 0;  // pairs created at this turn
    std::size_t total_states = 0;     // pairs created so far
    double push_seconds = 0.0;
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Pushes `turns` random utterances through a DialogState over `n_candidates` random candidates
/// and records per-turn growth and wall time. `repeats` > 1 keeps the fastest time per turn.
std::vector<BenchRow> run_bench(std::size_t turns, std::size_t n_candidates, std::size_t dim,
                                std::uint64_t seed, bool parity = false, std::size_t repeats = 1);

/// CSV: turn,relative_growth,total_states,push_us
void write_bench_csv(std::ostream& out, std::span<const BenchRow> rows);

}  // namespace triplenc
