#include "triplenc/corpus.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"

#include "triplenc/error.hpp"

namespace triplenc {

UtteranceId Corpus::intern(std::string_view utterance) {
    std::string key(utterance);
    if (auto it = index_.find(key); it != index_.end()) {
        return it->second;
    }
    const auto id = static_cast<UtteranceId>(vocab_.size());
    vocab_.push_back(key);
    index_.emplace(std::move(key), id);
    return id;
}

void Corpus::add_dialog(const std::vector<std::string>& utterances) {
    Dialog d;
    d.reserve(utterances.size());
    for (const auto& u : utterances) {
        d.push_back(intern(u));
    }
    dialogs_.push_back(std::move(d));
}

void Corpus::add_dialog(Dialog dialog) {
    for (auto id : dialog) {
        if (id >= vocab_.size()) {
            throw IndexOutOfRange(id, vocab_.size());
        }
    }
    dialogs_.push_back(std::move(dialog));
}

std::optional<UtteranceId> Corpus::find(std::string_view utterance) const {
    if (auto it = index_.find(std::string(utterance)); it != index_.end()) {
        return it->second;
    }
    return std::nullopt;
}

std::vector<UtteranceId> Corpus::pool() const {
    std::vector<UtteranceId> ids(vocab_.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        ids[i] = static_cast<UtteranceId>(i);
    }
    return ids;
}

Corpus align_vocabulary(const Corpus& src, const std::vector<std::string>& vocab) {
    Corpus out;
    for (const auto& v : vocab) {
        out.intern(v);
    }
    if (out.vocab().size() != vocab.size()) {
        throw InvalidConfig("vocabulary has duplicate entries");
    }
    for (const auto& d : src.dialogs()) {
        Dialog mapped;
        mapped.reserve(d.size());
        for (auto id : d) {
            const auto& text = src.text(id);
            auto target = out.find(text);
            if (!target) {
                throw UnknownUtterance(text);
            }
            mapped.push_back(*target);
        }
        out.add_dialog(std::move(mapped));
    }
    return out;
}

Corpus read_corpus(std::istream& in) {
    Corpus corpus;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(lineno, e.what());
        }
        if (!obj.is_object() || !obj.contains("dialog") || !obj["dialog"].is_array()) {
            throw ParseError(lineno, "expected an object with a \"dialog\" array");
        }
        const auto& arr = obj["dialog"];
        if (arr.empty()) {
            throw EmptyDialog(lineno);
        }
        std::vector<std::string> utts;
        utts.reserve(arr.size());
        for (const auto& u : arr) {
            if (!u.is_string()) {
                throw ParseError(lineno, "utterances must be strings");
            }
            utts.push_back(u.get<std::string>());
        }
        corpus.add_dialog(utts);
    }
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open corpus " + path.string());
    }
    return read_corpus(in);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
    for (const auto& d : corpus.dialogs()) {
        nlohmann::json arr = nlohmann::json::array();
        for (auto id : d) {
            arr.push_back(corpus.text(id));
        }
        out << nlohmann::json{{"dialog", std::move(arr)}}.dump() << '\n';
    }
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write corpus " + path.string());
    }
    write_corpus(out, corpus);
}

}  // namespace triplenc
