#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace triplenc {

using UtteranceId = std::uint32_t;
using Dialog = std::vector<UtteranceId>;

/// Dialogs over a deduplicated vocabulary. Ids are assigned in first-seen order.
class Corpus {
  public:
    Corpus() = default;

    UtteranceId intern(std::string_view utterance);
    void add_dialog(const std::vector<std::string>& utterances);
    void add_dialog(Dialog dialog);

    [[nodiscard]] std::optional<UtteranceId> find(std::string_view utterance) const;
    [[nodiscard]] const std::string& text(UtteranceId id) const { return vocab_.at(id); }

    [[nodiscard]] const std::vector<std::string>& vocab() const noexcept { return vocab_; }
    [[nodiscard]] const std::vector<Dialog>& dialogs() const noexcept { return dialogs_; }
    [[nodiscard]] std::size_t size() const noexcept { return dialogs_.size(); }
    [[nodiscard]] bool empty() const noexcept { return dialogs_.empty(); }

    /// Every vocabulary id, in order.
    [[nodiscard]] std::vector<UtteranceId> pool() const;

  private:
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, UtteranceId> index_;
    std::vector<Dialog> dialogs_;
};

/// Re-expresses `src` over `vocab` (ids become positions in `vocab`). Throws UnknownUtterance
/// for utterances that `vocab` lacks.
Corpus align_vocabulary(const Corpus& src, const std::vector<std::string>& vocab);

/// Reads line-delimited JSON, one {"dialog": [utterance, ...]} object per line.
/// Blank lines are skipped. Throws ParseError (with 1-based line) or EmptyDialog.
Corpus read_corpus(std::istream& in);
Corpus load_corpus(const std::filesystem::path& path);

void write_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

}  // namespace triplenc
