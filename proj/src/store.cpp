#include "triplenc/store.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "json.hpp"

#include "triplenc/error.hpp"

namespace triplenc {

namespace fs = std::filesystem;

namespace {

std::uint32_t to_le(std::uint32_t x) {
    if constexpr (std::endian::native == std::endian::little) {
        return x;
    } else {
        return ((x & 0xffU) << 24) | ((x & 0xff00U) << 8) | ((x >> 8) & 0xff00U) | (x >> 24);
    }
}

std::string table_file(Slot s) {
    return std::string(name(s.space)) + "." + std::string(name(s.parity)) + ".f32";
}

void write_table(const fs::path& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    std::vector<std::uint32_t> words(m.data().size());
    for (std::size_t i = 0; i < words.size(); ++i) {
        words[i] = to_le(std::bit_cast<std::uint32_t>(m.data()[i]));
    }
    out.write(reinterpret_cast<const char*>(words.data()),
              static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
    if (!out) {
        throw IoError("short write to " + path.string());
    }
}

Matrix read_table(const fs::path& path, std::size_t rows, std::size_t dim) {
    std::error_code ec;
    const auto size = fs::file_size(path, ec);
    if (ec) {
        throw IoError("cannot stat " + path.string());
    }
    const std::uintmax_t expected = static_cast<std::uintmax_t>(rows) * dim * 4;
    if (size != expected) {
        throw ManifestMismatch(path.filename().string() + " has " + std::to_string(size)
                               + " bytes, manifest implies " + std::to_string(expected));
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<std::uint32_t> words(rows * dim);
    in.read(reinterpret_cast<char*>(words.data()),
            static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
    if (!in) {
        throw IoError("short read from " + path.string());
    }
    Matrix m(rows, dim);
    for (std::size_t i = 0; i < words.size(); ++i) {
        m.data()[i] = std::bit_cast<float>(to_le(words[i]));
    }
    require_finite(m.data(), path.filename().string().c_str());
    return m;
}

template <class T>
T required(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) {
        throw ManifestMismatch(std::string("manifest lacks \"") + key + "\"");
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ManifestMismatch(std::string("manifest field \"") + key + "\" has the wrong type");
    }
}

}  // namespace

void save_store(const fs::path& dir, const EncoderParams& params) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string());
    }
    const std::string index_name = "utterances.txt";
    {
        std::ofstream idx(dir / index_name, std::ios::binary);
        if (!idx) {
            throw IoError("cannot write index in " + dir.string());
        }
        for (const auto& u : params.vocab()) {
            if (u.find_first_of("\r\n") != std::string::npos) {
                throw InvalidConfig("utterance contains a line break: " + u);
            }
            idx << u << '\n';
        }
    }
    nlohmann::json subspaces = nlohmann::json::array();
    for (const auto& slot : params.slots()) {
        const auto file = table_file(slot);
        write_table(dir / file, params.table(slot));
        subspaces.push_back({{"tag", std::string(name(slot.space))},
                             {"parity", std::string(name(slot.parity))},
                             {"file", file}});
    }
    const nlohmann::json manifest = {
        {"magic", std::string(kStoreMagic)},
        {"version", kStoreVersion},
        {"dim", params.dim()},
        {"row_count", params.vocab_size()},
        {"dtype", "f32le"},
        {"index_file", index_name},
        {"subspaces", std::move(subspaces)},
    };
    std::ofstream out(dir / kManifestName);
    if (!out) {
        throw IoError("cannot write manifest in " + dir.string());
    }
    out << manifest.dump(2) << '\n';
}

EncoderParams load_store(const fs::path& dir) {
    std::ifstream in(dir / kManifestName);
    if (!in) {
        throw IoError("cannot open " + (dir / kManifestName).string());
    }
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ManifestMismatch(std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!manifest.is_object() || !manifest.contains("magic") || !manifest["magic"].is_string()
        || manifest["magic"].get<std::string>() != kStoreMagic) {
        throw BadMagic("not an embedding store (magic must be \"CCLE\")");
    }
    if (required<int>(manifest, "version") != kStoreVersion) {
        throw ManifestMismatch("unsupported store version "
                               + std::to_string(required<int>(manifest, "version")));
    }
    if (required<std::string>(manifest, "dtype") != "f32le") {
        throw ManifestMismatch("unsupported dtype " + required<std::string>(manifest, "dtype"));
    }
    const auto dim = required<std::size_t>(manifest, "dim");
    const auto rows = required<std::size_t>(manifest, "row_count");
    if (dim == 0) {
        throw ManifestMismatch("dim must be > 0");
    }
    const std::string index_name = manifest.value("index_file", std::string("utterances.txt"));

    std::vector<std::string> vocab;
    {
        std::ifstream idx(dir / index_name, std::ios::binary);
        if (!idx) {
            throw IoError("cannot open index " + (dir / index_name).string());
        }
        std::string line;
        while (std::getline(idx, line)) {
            vocab.push_back(line);
        }
    }
    if (vocab.size() != rows) {
        throw ManifestMismatch("index has " + std::to_string(vocab.size())
                               + " lines, manifest row_count is " + std::to_string(rows));
    }

    EncoderParams params;
    try {
        params = EncoderParams(std::move(vocab), dim);
    } catch (const InvalidConfig& e) {
        throw ManifestMismatch(e.what());
    }
    const auto& list = manifest.contains("subspaces") ? manifest["subspaces"] : nlohmann::json();
    if (!list.is_array() || list.empty()) {
        throw ManifestMismatch("manifest lists no subspaces");
    }
    for (const auto& entry : list) {
        const auto tag = parse_subspace(required<std::string>(entry, "tag"));
        const auto parity = parse_parity(entry.value("parity", std::string("none")));
        if (!tag || !parity) {
            throw ManifestMismatch("unknown subspace entry " + entry.dump());
        }
        const Slot slot{*tag, *parity};
        if (params.has(slot)) {
            throw ManifestMismatch("duplicate subspace entry " + entry.dump());
        }
        const std::string file = entry.value("file", table_file(slot));
        params.set_table(slot, read_table(dir / file, rows, dim));
    }
    return params;
}

}  // namespace triplenc
