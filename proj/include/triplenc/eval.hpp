#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "triplenc/corpus.hpp"
#include "triplenc/encoder.hpp"
#include "triplenc/inference.hpp"

namespace triplenc {

/// Mid-rank of the true candidate: 1 + #{s > s_true} + #{j != true : s_j = s_true} / 2.
/// Throws IndexOutOfRange.
double rank_true(std::span<const double> scores, std::size_t true_index);

/// (rank - 1) / (pool_size - 1); 0 for a pool of one.
double normalized_rank(double rank, std::size_t pool_size);

/// Scorers of the component analysis, composed from the pair and bi scorers.
enum class ComponentScorer {
    Triple,           // sum_{i<j} cos(mean([B1]u_i, [B2]u_j), c)
    TriplePlusBiB2,   // Triple + sum_h cos([B2]u_h, c)
    DirectNeighbors,  // pairs with j = i + 1 only
    BiB1PlusBiB2,     // sum_h cos([B1]u_h, c) + cos([B2]u_h, c)
    MeanB2Only,       // sum_{i<j} cos(mean([B2]u_i, [B2]u_j), c)
    BiB2,             // sum_h cos([B2]u_h, c)
    MeanB1Only,       // sum_{i<j} cos(mean([B1]u_i, [B1]u_j), c)
};

std::string_view name(ComponentScorer c);
std::optional<ComponentScorer> parse_component(std::string_view s);

struct SeqEvalConfig {
    ScorerConfig scorer;
    /// Overrides the variant with a component-analysis scorer.
    std::optional<ComponentScorer> component;
    /// Subspace used by bi scoring; defaults to [B2] when the model has it, else [B].
    std::optional<Subspace> bi_space;
    /// Smallest context length evaluated. Triple scorers need >= 2.
    std::size_t min_depth = 2;
};

struct SeqItem {
    std::size_t dialog = 0;
    std::size_t depth = 0;  // context length
    std::size_t pool_size = 0;
    double rank = 0.0;
    double normalized_rank = 0.0;
};

struct DepthSummary {
    std::size_t depth = 0;
    double avg_rank = 0.0;
    double avg_norm_rank = 0.0;
    std::size_t n_items = 0;
    std::size_t pool_size = 0;
};

struct SeqEvalResult {
    std::vector<DepthSummary> depths;
    double avg_rank = 0.0;        // macro average over depths
    double avg_norm_rank = 0.0;   // macro average over depths
    std::vector<SeqItem> items;   // ordered by (dialog, depth)
    std::size_t pairs_scored = 0; // pair materializations of triple scorers
};

/// The subspace bi scoring reads for this model and config.
Subspace bi_subspace(const EncoderParams& params, std::optional<Subspace> requested);

/// For each depth k, ranks the true utterance at position k + 1 among the deduplicated
/// utterances found at position k + 1 anywhere in `test`. Throws EmptyCorpus when there is
/// nothing to evaluate.
SeqEvalResult eval_sequence_modeling(const Corpus& test, const EncoderParams& params,
                                     const SeqEvalConfig& cfg);

/// depth,avg_rank,avg_norm_rank,n_items
void write_depth_csv(std::ostream& out, const SeqEvalResult& result);
void write_summary_json(std::ostream& out, const SeqEvalResult& result,
                        const SeqEvalConfig& cfg);

/// Scores of `candidates` after the context `context` (params ids) under the configured
/// scorer, evaluated from scratch. The candidates sit at turn context.size() + 1.
std::vector<double> score_context(const EncoderParams& params, std::span<const UtteranceId> context,
                                  const CandidateSet& candidates, const SeqEvalConfig& cfg,
                                  std::size_t* pairs_scored = nullptr);

enum class Planner { Bi, Triple };

std::string_view name(Planner p);
std::optional<Planner> parse_planner(std::string_view s);

struct PlanEvalConfig {
    std::size_t history_len = 2;
    std::size_t goal_distance = 1;
    Planner planner = Planner::Bi;
    std::size_t n_distractors = 100;
    std::uint64_t seed = 0;
    std::optional<Subspace> bi_space;
    std::vector<std::size_t> ks = {5, 10, 25, 50};
    /// Externally generated candidates keyed by dialog index; replaces synthetic distractors.
    std::optional<std::map<std::size_t, std::vector<std::string>>> external_candidates;
};

struct PlanEvalResult {
    std::map<std::size_t, double> hits;  // k -> fraction of items with rank <= k
    std::vector<double> ranks;
    std::size_t n_items = 0;
    std::size_t n_skipped = 0;  // dialogs too short for history + goal distance
};

/// Fraction of ranks <= k for each k.
std::map<std::size_t, double> hits_at(std::span<const double> ranks,
                                      std::span<const std::size_t> ks);

/// One item per dialog: context = first history_len turns, true candidate = next turn,
/// goal = goal_distance turns after the candidate.
PlanEvalResult eval_planning(const Corpus& test, const EncoderParams& params,
                             const PlanEvalConfig& cfg);

/// Reads {"dialog": index, "candidates": [...]} lines.
std::map<std::size_t, std::vector<std::string>> load_candidates_file(const std::string& path);

enum class CorpusStructure { Markov, XorCooccurrence };

std::string_view name(CorpusStructure s);
std::optional<CorpusStructure> parse_structure(std::string_view s);

struct SyntheticCorpusConfig {
    std::size_t vocab_size = 20;
    std::size_t dialog_count = 500;
    std::size_t dialog_len = 6;
    CorpusStructure structure = CorpusStructure::Markov;
    std::uint64_t seed = 0;
};

/// markov: dialogs from a seeded first-order chain where each utterance has a few preferred
/// successors. xor-cooccurrence: the vocabulary is split into groups of four {p, q, c, c'};
/// a dialog is (x, y, z) with x, y drawn from {p, q} and z = c when x == y, else c'. Every
/// single context utterance is followed by c and c' equally often; only the pair decides.
/// Extra vocabulary (vocab_size % 4) serves as filler turns that prefix xor dialogs longer than 3.
/// Throws InvalidConfig (xor needs vocab_size >= 4).
Corpus gen_synthetic_corpus(const SyntheticCorpusConfig& cfg);

struct DisambiguationResult {
    double accuracy = 0.0;       // ties count one half
    std::size_t n_items = 0;
    std::size_t n_comparisons = 0;
};

/// Pair-disambiguation on the first three turns of each dialog. For an item (a, b) -> c, the
/// contrast contexts are the other two-turn openings in `test` that share exactly one slot with
/// (a, b) and are never followed by c. A comparison is won when c scores higher after (a, b)
/// than after the contrast context.
DisambiguationResult eval_pair_disambiguation(const Corpus& test, const EncoderParams& params,
                                              const SeqEvalConfig& cfg);

enum class AdditivityMode { Bi, Triple };

struct AdditivityRow {
    std::size_t position = 0;  // 1-based context position
    double correct = 0.0;      // mean similarity to the true continuation
    double random = 0.0;       // mean similarity to random utterances
    double gap = 0.0;          // correct - random
    std::size_t n_items = 0;
};

/// Per context position: similarity of that utterance's representation to the true continuation
/// minus its mean similarity to `random_samples` random utterances. Bi mode uses the single
/// before vector; triple mode averages the n - 1 pair mixtures containing the position.
std::vector<AdditivityRow> additivity_analysis(const Corpus& test, const EncoderParams& params,
                                               std::size_t context_len, AdditivityMode mode,
                                               std::optional<Subspace> bi_space = std::nullopt,
                                               std::size_t random_samples = 20,
                                               std::uint64_t seed = 0);

/// One-sided sign test: P(X >= wins) for X ~ Binomial(wins + losses, 1/2).
double sign_test_p(std::size_t wins, std::size_t losses);

}  // namespace triplenc
