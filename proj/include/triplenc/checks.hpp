#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace triplenc::checks {

/// Outcome of one oracle suite.
struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

/// Target formulas: exact endpoints, exact pair targets, monotonicity and counts on exhaustive
/// enumeration up to 12 turns.
CheckResult check_targets();

/// Incremental state vs from-scratch double sums, last-l rows vs row-restricted loops, MaxSim vs
/// an independent greedy.
CheckResult check_scoring_oracles(std::uint64_t seed);

/// Pair-materialization counts per turn and in total, the 5-turn bench table, and a per-turn
/// cost that stays linear in the turn index.
CheckResult check_complexity();

/// Analytic vs central finite-difference gradients on 50 random draws.
CheckResult check_gradients(std::uint64_t seed);

/// Mid-rank calibration under random scores, Hits@k monotonicity, and rank invariance under
/// strictly increasing transforms.
CheckResult check_calibration(std::uint64_t seed);

/// Training configuration of the xor-cooccurrence experiments.
struct XorExperimentConfig {
    std::size_t seeds = 10;
    std::size_t vocab = 20;
    std::size_t train_dialogs = 500;
    std::size_t test_dialogs = 500;
    std::size_t dim = 16;
    std::size_t epochs = 300;
    double learning_rate = 0.01;
    bool adam = true;
};

/// Per-seed measurements of CCL- and C3L-trained models on a held-out xor corpus.
struct XorSeedRun {
    std::uint64_t seed = 0;
    double triple_disambiguation = 0.0;  // C3L, triple-avg
    double bi_disambiguation = 0.0;      // CCL, bi
    std::vector<double> c3l_bi_norm_ranks;  // C3L scored in bi mode with [B2], per item
    std::vector<double> ccl_bi_norm_ranks;  // CCL scored in bi mode, per item
    double triple_avg_norm_rank = 0.0;
    std::vector<double> triple_gap;  // per context position, C3L triple mode
    std::vector<double> bi_gap;      // per context position, CCL bi mode
    double seconds = 0.0;
};

std::vector<XorSeedRun> run_xor_experiment(const XorExperimentConfig& cfg);

/// Triple-avg pair-disambiguation accuracy > 0.9 while CCL-bi stays within 0.5 +- 0.1, in >= 8
/// of 10 seeds.
CheckResult check_cooccurrence_separation(const std::vector<XorSeedRun>& runs);

/// C3L bi ([B2]) beats CCL bi on average normalized rank with a paired sign test p < 0.05 over
/// >= 500 items.
CheckResult check_bi_transfer(const std::vector<XorSeedRun>& runs);

/// Triple-mode gap > bi-mode gap at every position for every seed; untrained |gap| < 0.1
/// averaged over 50 seeds.
CheckResult check_additivity(const std::vector<XorSeedRun>& runs);

/// The fast suites (targets, scoring oracles, complexity, gradients, calibration).
std::vector<CheckResult> run_oracle_suites(std::uint64_t seed);

}  // namespace triplenc::checks
