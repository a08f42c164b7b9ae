#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "triplenc/corpus.hpp"
#include "triplenc/geometry.hpp"

namespace triplenc {

/// Prefix-token subspaces: [B] (bi-encoder context), [B1]/[B2] (earlier/later element of a
/// context pair) and [A] (candidate / future utterance).
enum class Subspace : std::uint8_t { Before, Before1, Before2, After };

/// Turn-distance parity marker of before-space encodings. After-space tables use None.
enum class Parity : std::uint8_t { None, Even, Odd };

std::string_view name(Subspace s);
std::string_view name(Parity p);
std::optional<Subspace> parse_subspace(std::string_view s);
std::optional<Parity> parse_parity(std::string_view s);

/// Parity of a turn distance, or None when parity markers are disabled.
constexpr Parity distance_parity(int distance, bool enabled) {
    if (!enabled) {
        return Parity::None;
    }
    return (distance % 2 != 0) ? Parity::Odd : Parity::Even;
}

struct Slot {
    Subspace space = Subspace::Before;
    Parity parity = Parity::None;
    auto operator<=>(const Slot&) const = default;
};

/// The slot set of a model: the given before-space tags with even/odd variants (or a single
/// unmarked variant when parity is off), plus one unmarked [A] table.
std::vector<Slot> make_slots(std::span<const Subspace> before_spaces, bool parity);

/// Lookup-table encoder: one learnable vector per (utterance, subspace, parity).
class EncoderParams {
  public:
    EncoderParams() = default;
    EncoderParams(std::vector<std::string> vocab, std::size_t dim);

    /// i.i.d. uniform in [-0.5, 0.5] / sqrt(dim), filled slot by slot in Slot order.
    static EncoderParams init_random(std::vector<std::string> vocab, std::size_t dim,
                                     std::span<const Slot> slots, std::uint64_t seed);

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::size_t vocab_size() const noexcept { return vocab_.size(); }
    [[nodiscard]] const std::vector<std::string>& vocab() const noexcept { return vocab_; }
    [[nodiscard]] std::optional<UtteranceId> find(std::string_view utterance) const;
    /// Throws UnknownUtterance.
    [[nodiscard]] UtteranceId require(std::string_view utterance) const;

    [[nodiscard]] bool has(Slot s) const { return tables_.contains(s); }
    [[nodiscard]] bool has_space(Subspace s) const;
    [[nodiscard]] bool parity_enabled() const;
    [[nodiscard]] std::vector<Slot> slots() const;

    /// Exact slot if present. Otherwise a marked request falls back to the unmarked table and
    /// an unmarked request to the odd, then even, variant. Throws MissingSubspace.
    [[nodiscard]] Slot resolve(Subspace space, Parity parity) const;

    /// Vector for a before/after encoding at the given turn distance to the future utterance.
    [[nodiscard]] std::span<const float> encode(Subspace space, UtteranceId id, int distance) const;

    [[nodiscard]] std::span<const float> vec(Slot s, UtteranceId id) const;
    [[nodiscard]] std::span<float> vec(Slot s, UtteranceId id);

    [[nodiscard]] const Matrix& table(Slot s) const;
    [[nodiscard]] Matrix& table(Slot s);

    /// Adds or replaces a table; must be vocab_size() x dim().
    void set_table(Slot s, Matrix m);
    void erase_table(Slot s) { tables_.erase(s); }

    bool operator==(const EncoderParams& other) const {
        return dim_ == other.dim_ && vocab_ == other.vocab_ && tables_ == other.tables_;
    }

  private:
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, UtteranceId> index_;
    std::size_t dim_ = 0;
    std::map<Slot, Matrix> tables_;
};

}  // namespace triplenc
