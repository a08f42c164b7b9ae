#include "triplenc/encoder.hpp"

#include <cmath>

#include "triplenc/error.hpp"
#include "triplenc/rng.hpp"

namespace triplenc {

std::string_view name(Subspace s) {
    switch (s) {
        case Subspace::Before: return "B";
        case Subspace::Before1: return "B1";
        case Subspace::Before2: return "B2";
        case Subspace::After: return "A";
    }
    return "?";
}

std::string_view name(Parity p) {
    switch (p) {
        case Parity::None: return "none";
        case Parity::Even: return "even";
        case Parity::Odd: return "odd";
    }
    return "?";
}

std::optional<Subspace> parse_subspace(std::string_view s) {
    for (auto v : {Subspace::Before, Subspace::Before1, Subspace::Before2, Subspace::After}) {
        if (name(v) == s) {
            return v;
        }
    }
    return std::nullopt;
}

std::optional<Parity> parse_parity(std::string_view s) {
    for (auto v : {Parity::None, Parity::Even, Parity::Odd}) {
        if (name(v) == s) {
            return v;
        }
    }
    return std::nullopt;
}

std::vector<Slot> make_slots(std::span<const Subspace> before_spaces, bool parity) {
    std::vector<Slot> out;
    for (auto s : before_spaces) {
        if (parity) {
            out.push_back({s, Parity::Even});
            out.push_back({s, Parity::Odd});
        } else {
            out.push_back({s, Parity::None});
        }
    }
    out.push_back({Subspace::After, Parity::None});
    return out;
}

EncoderParams::EncoderParams(std::vector<std::string> vocab, std::size_t dim)
    : vocab_(std::move(vocab)), dim_(dim) {
    if (dim_ == 0) {
        throw InvalidConfig("embedding dimension must be > 0");
    }
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
        if (!index_.emplace(vocab_[i], static_cast<UtteranceId>(i)).second) {
            throw InvalidConfig("duplicate vocabulary entry: " + vocab_[i]);
        }
    }
}

EncoderParams EncoderParams::init_random(std::vector<std::string> vocab, std::size_t dim,
                                         std::span<const Slot> slots, std::uint64_t seed) {
    EncoderParams p(std::move(vocab), dim);
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    std::map<Slot, Matrix> tables;
    for (auto s : slots) {
        tables.emplace(s, Matrix(p.vocab_size(), dim));
    }
    for (auto& [slot, m] : tables) {
        for (auto& x : m.data()) {
            x = static_cast<float>(rng.uniform(-0.5, 0.5) * scale);
        }
    }
    p.tables_ = std::move(tables);
    return p;
}

std::optional<UtteranceId> EncoderParams::find(std::string_view utterance) const {
    if (auto it = index_.find(std::string(utterance)); it != index_.end()) {
        return it->second;
    }
    return std::nullopt;
}

UtteranceId EncoderParams::require(std::string_view utterance) const {
    if (auto id = find(utterance)) {
        return *id;
    }
    throw UnknownUtterance(std::string(utterance));
}

bool EncoderParams::has_space(Subspace s) const {
    for (const auto& [slot, m] : tables_) {
        if (slot.space == s) {
            return true;
        }
    }
    return false;
}

bool EncoderParams::parity_enabled() const {
    for (const auto& [slot, m] : tables_) {
        if (slot.parity != Parity::None) {
            return true;
        }
    }
    return false;
}

std::vector<Slot> EncoderParams::slots() const {
    std::vector<Slot> out;
    out.reserve(tables_.size());
    for (const auto& [slot, m] : tables_) {
        out.push_back(slot);
    }
    return out;
}

Slot EncoderParams::resolve(Subspace space, Parity parity) const {
    if (has({space, parity})) {
        return {space, parity};
    }
    if (parity != Parity::None && has({space, Parity::None})) {
        return {space, Parity::None};
    }
    if (parity == Parity::None) {
        for (auto p : {Parity::Odd, Parity::Even}) {
            if (has({space, p})) {
                return {space, p};
            }
        }
    }
    throw MissingSubspace("model has no table for subspace " + std::string(name(space))
                          + " (parity " + std::string(name(parity)) + ")");
}

std::span<const float> EncoderParams::encode(Subspace space, UtteranceId id, int distance) const {
    const Parity p = space == Subspace::After ? Parity::None
                                              : distance_parity(distance, parity_enabled());
    return vec(resolve(space, p), id);
}

std::span<const float> EncoderParams::vec(Slot s, UtteranceId id) const {
    const auto& m = table(s);
    if (id >= m.rows()) {
        throw IndexOutOfRange(id, m.rows());
    }
    return m.row(id);
}

std::span<float> EncoderParams::vec(Slot s, UtteranceId id) {
    auto& m = table(s);
    if (id >= m.rows()) {
        throw IndexOutOfRange(id, m.rows());
    }
    return m.row(id);
}

const Matrix& EncoderParams::table(Slot s) const {
    auto it = tables_.find(s);
    if (it == tables_.end()) {
        throw MissingSubspace("no table " + std::string(name(s.space)) + "/"
                              + std::string(name(s.parity)));
    }
    return it->second;
}

Matrix& EncoderParams::table(Slot s) {
    auto it = tables_.find(s);
    if (it == tables_.end()) {
        throw MissingSubspace("no table " + std::string(name(s.space)) + "/"
                              + std::string(name(s.parity)));
    }
    return it->second;
}

void EncoderParams::set_table(Slot s, Matrix m) {
    if (m.rows() != vocab_.size() || m.cols() != dim_) {
        throw ManifestMismatch("table " + std::string(name(s.space)) + "/"
                               + std::string(name(s.parity)) + " is "
                               + std::to_string(m.rows()) + "x" + std::to_string(m.cols())
                               + ", expected " + std::to_string(vocab_.size()) + "x"
                               + std::to_string(dim_));
    }
    tables_[s] = std::move(m);
}

}  // namespace triplenc
