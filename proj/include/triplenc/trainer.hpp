#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "triplenc/corpus.hpp"
#include "triplenc/encoder.hpp"
#include "triplenc/targets.hpp"

namespace triplenc {

enum class Stage { CclPretrain, C3l, C3lFromScratch };
enum class Optimizer { Sgd, Adam };

std::string_view name(Stage s);
std::optional<Stage> parse_stage(std::string_view s);

struct TrainConfig {
    std::size_t dim = 16;
    int w = 5;
    double learning_rate = 0.05;
    std::size_t epochs = 200;
    /// Epochs of bi-encoder pretraining before the triple stage (stage C3l only);
    /// 0 means the same as `epochs`.
    std::size_t pretrain_epochs = 0;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    Stage stage = Stage::C3l;
    TargetMode target_mode = TargetMode::Curved;
    bool parity = true;
    /// Triple stage trains on pair positives plus triple negatives.
    bool bi_pos_triple_neg = false;
    Optimizer optimizer = Optimizer::Sgd;
};

/// Validates learning_rate > 0, epochs >= 1, batch_size >= 1, dim >= 1, w >= 3.
void validate(const TrainConfig& cfg);

/// Which parameter vector a gradient row belongs to.
struct ParamKey {
    Slot slot;
    UtteranceId row = 0;
    auto operator<=>(const ParamKey&) const = default;
};

/// Sparse gradient: rows that were never touched are implicitly zero.
class Gradient {
  public:
    explicit Gradient(std::size_t dim = 0) : dim_(dim) {}

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    /// Row for `key`, or zeros when untouched.
    [[nodiscard]] std::vector<double> at(const ParamKey& key) const;
    std::vector<double>& row(const ParamKey& key);
    [[nodiscard]] const std::map<ParamKey, std::vector<double>>& rows() const noexcept {
        return rows_;
    }
    void scale(double s);
    [[nodiscard]] double l2_norm() const;

  private:
    std::size_t dim_;
    std::map<ParamKey, std::vector<double>> rows_;
};

/// Mean over the batch of (cos(lhs, rhs) - target)^2. lhs is [B]u_i for pairs and
/// mean_pool([B1]u_i, [B2]u_j) for triples; rhs is [A]u_k. `corpus` resolves turn indices;
/// its ids must index the params vocabulary. Throws UnknownUtterance for ids outside it.
double loss(const EncoderParams& params, std::span<const Example> batch, const Corpus& corpus);

/// Analytic gradient of `loss`.
Gradient grad(const EncoderParams& params, std::span<const Example> batch, const Corpus& corpus);

/// Central differences over every parameter coordinate. The divisor is the realized float
/// step (theta+eps) - (theta-eps), not 2 * eps.
Gradient finite_diff_grad(const EncoderParams& params, std::span<const Example> batch,
                          const Corpus& corpus, double epsilon);

/// Largest |a - f| / max(|a|, |f|) over coordinates whose |a - f| exceeds abs_floor.
double max_relative_error(const Gradient& analytic, const Gradient& numeric, double abs_floor);

/// Training examples of one phase for every dialog of the corpus.
std::vector<Example> build_pair_examples(const Corpus& corpus, const TrainConfig& cfg,
                                         std::uint64_t stream);
std::vector<Example> build_triple_examples(const Corpus& corpus, const TrainConfig& cfg,
                                           std::uint64_t stream);

struct TrainResult {
    EncoderParams params;
    std::vector<double> train_loss;       // per epoch, mean over that epoch's examples
    std::vector<double> validation_loss;  // per epoch when a validation corpus was given
    std::size_t best_epoch = 0;           // 1-based, selected by validation loss
};

/// Runs the configured stage(s). Deterministic for a given seed. When `validation` is given,
/// the returned params are those of the epoch with the lowest validation loss of the last phase.
/// Throws EmptyCorpus.
TrainResult train(const Corpus& corpus, const TrainConfig& cfg,
                  const Corpus* validation = nullptr);

}  // namespace triplenc
