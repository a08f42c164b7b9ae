#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "triplenc/corpus.hpp"

namespace triplenc {

/// Positive targets follow the curved (linearly decaying) schedule, or are all 1.0.
enum class TargetMode { Curved, HardPositive };

struct WindowConfig {
    int w = 5;
    std::uint64_t seed = 0;
    TargetMode targets = TargetMode::Curved;
};

/// Validates w >= 3. Throws InvalidConfig.
void validate(const WindowConfig& cfg);

/// 1 - (k - i) / w for 0 < k - i < w. Throws OutOfWindow otherwise.
double ccl_target(int i, int k, int w);

/// 2 - (2k - (i + j)) / w, before normalization. Throws OrderViolation / OutOfWindow.
double c3l_raw(int i, int j, int k, int w);

/// c3l_raw min-max mapped from [1/w, 2 - 3/w] onto [1/w, 1]. The top of the range
/// (j = k - 1, i = k - 2) maps to exactly 1.0.
double c3l_target(int i, int j, int k, int w);

// Which slot of a training example was replaced by a random utterance.
enum class PairPattern : std::uint8_t {
    Positive,     // ([B] u_i, [A] u_k)
    RandomAfter,  // ([B] u_i, [A] u_r)
    Directional,  // ([B] u_k, [A] u_i)
};

enum class TriplePattern : std::uint8_t {
    Positive,    // ([B1] u_i, [B2] u_j) -> [A] u_k
    RandomB2,    // ([B1] u_i, [B2] u_r)
    RandomB1,    // ([B1] u_r, [B2] u_j)
    RandomBoth,  // ([B1] u_r, [B2] u_r')
};

std::string_view name(PairPattern p);
std::string_view name(TriplePattern p);

/// Which before-space table a pair example reads from. Pair positives mixed into
/// triple training use B2, the subspace the triple model is scored with in bi mode.
enum class PairSpace : std::uint8_t { Before, Before2 };

struct PairExample {
    std::size_t dialog = 0;
    int i = 0;  // 1-based turn index of the context utterance
    int k = 0;  // 1-based turn index of the future utterance
    std::optional<UtteranceId> subst;  // replaces u_k for RandomAfter
    double target = 0.0;
    PairPattern pattern = PairPattern::Positive;
    PairSpace space = PairSpace::Before;

    [[nodiscard]] bool is_negative() const noexcept { return pattern != PairPattern::Positive; }
    bool operator==(const PairExample&) const = default;
};

struct TripletExample {
    std::size_t dialog = 0;
    int i = 0;
    int j = 0;
    int k = 0;
    std::optional<UtteranceId> subst_i;  // replaces u_i in the [B1] slot
    std::optional<UtteranceId> subst_j;  // replaces u_j in the [B2] slot
    double target = 0.0;
    TriplePattern pattern = TriplePattern::Positive;

    [[nodiscard]] bool is_negative() const noexcept { return pattern != TriplePattern::Positive; }
    bool operator==(const TripletExample&) const = default;
};

using Example = std::variant<PairExample, TripletExample>;

/// Every (i, j, k) with 1 <= i < j < k <= n and k - i < w, lexicographic, with c3l targets.
std::vector<TripletExample> gen_positive_triples(int n, const WindowConfig& cfg,
                                                 std::size_t dialog = 0);

/// Three co-occurrence negatives per positive: (u_i, u_r), (u_r, u_j), (u_r, u_r'), target 0.
/// `dialog` holds the utterances of the positives' dialog (turn t is dialog[t - 1]). A sampled
/// u_r always differs from the utterance it replaces. Draws come from the stream
/// (cfg.seed, stream, dialog index). Throws PoolTooSmall if `pool` has < 2 distinct ids.
std::vector<TripletExample> gen_hard_negatives(std::span<const TripletExample> positives,
                                               std::span<const UtteranceId> dialog,
                                               std::span<const UtteranceId> pool,
                                               const WindowConfig& cfg, std::uint64_t stream = 0);

/// All in-window (i, k) positives with ccl targets, lexicographic.
std::vector<PairExample> gen_positive_pairs(int n, const WindowConfig& cfg, std::size_t dialog = 0);

/// One random negative (future utterance replaced) and one directional negative (roles swapped)
/// per positive, target 0.
std::vector<PairExample> gen_pair_negatives(std::span<const PairExample> positives,
                                            std::span<const UtteranceId> dialog,
                                            std::span<const UtteranceId> pool,
                                            const WindowConfig& cfg, std::uint64_t stream = 0);

/// Positive pairs followed by their negatives for one dialog.
std::vector<PairExample> gen_bi_pairs(std::span<const UtteranceId> dialog,
                                      std::span<const UtteranceId> pool, const WindowConfig& cfg,
                                      std::size_t dialog_index = 0, std::uint64_t stream = 0);

/// Positive triples followed by their negatives for one dialog.
std::vector<TripletExample> gen_triples(std::span<const UtteranceId> dialog,
                                        std::span<const UtteranceId> pool, const WindowConfig& cfg,
                                        std::size_t dialog_index = 0, std::uint64_t stream = 0);

/// One line per example: i<TAB>j<TAB>k<TAB>target<TAB>neg_pattern. Pairs write "-" for j.
void write_examples(std::ostream& out, std::span<const Example> examples);

}  // namespace triplenc
