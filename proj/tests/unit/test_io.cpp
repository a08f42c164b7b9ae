#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "triplenc/error.hpp"
#include "triplenc/eval.hpp"
#include "triplenc/store.hpp"
#include "triplenc/trainer.hpp"

using namespace triplenc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path()
               / ("triplenc_" + tag + "_" + std::to_string(std::hash<std::string>{}(tag)));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

Corpus parse(const std::string& text) {
    std::istringstream in(text);
    return read_corpus(in);
}

EncoderParams trained_params() {
    SyntheticCorpusConfig sc;
    sc.dialog_count = 10;
    const auto c = gen_synthetic_corpus(sc);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.dim = 6;
    return train(c, cfg).params;
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

void write_json(const fs::path& p, const nlohmann::json& j) {
    std::ofstream out(p);
    out << j.dump(2);
}

void write_floats(const fs::path& p, std::size_t count, float seed) {
    std::ofstream out(p, std::ios::binary);
    for (std::size_t n = 0; n < count; ++n) {
        const float v = seed + 0.25f * static_cast<float>(n % 7) - 0.5f;
        unsigned char b[4];
        std::uint32_t u;
        std::memcpy(&u, &v, 4);
        for (int k = 0; k < 4; ++k) {
            b[k] = static_cast<unsigned char>(u >> (8 * k));
        }
        out.write(reinterpret_cast<const char*>(b), 4);
    }
}

}  // namespace

TEST_CASE("corpus parsing") {
    const auto c = parse(R"({"dialog": ["hi", "hello", "bye"]}
{"dialog": ["hi", "how are you", "fine"]}
)");
    CHECK(c.size() == 2);
    CHECK(c.dialogs()[0].size() == 3);
    CHECK(c.vocab().size() == 5);  // "hi" appears once in the vocabulary
    CHECK(c.vocab()[0] == "hi");
    CHECK(c.dialogs()[0][0] == c.dialogs()[1][0]);
}

TEST_CASE("malformed line reports its number") {
    std::string text;
    for (int n = 0; n < 6; ++n) {
        text += R"({"dialog": ["a", "b"]})" "\n";
    }
    text += "{\"dialog\": [\"a\",\n";
    try {
        (void)parse(text);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 7);
    }
    CHECK_THROWS_AS(parse(R"({"dialog": []})"), EmptyDialog);
    CHECK_THROWS_AS(parse(R"({"turns": ["a"]})"), ParseError);
    CHECK_THROWS_AS(parse(R"({"dialog": ["a", 3]})"), ParseError);
}

TEST_CASE("corpus write/read round trip") {
    const auto c = parse(R"({"dialog": ["a \"quoted\"", "ü", "a \"quoted\""]})" "\n");
    std::ostringstream out;
    write_corpus(out, c);
    const auto back = parse(out.str());
    CHECK(back.vocab() == c.vocab());
    CHECK(back.dialogs() == c.dialogs());
    CHECK_THROWS_AS(load_corpus("/nonexistent/corpus.jsonl"), IoError);
}

TEST_CASE("store round trip is bitwise") {
    TempDir dir("roundtrip");
    const auto p = trained_params();
    save_store(dir.path, p);
    CHECK(fs::exists(dir.path / kManifestName));
    const auto back = load_store(dir.path);
    CHECK(back == p);
    const auto m = read_json(dir.path / kManifestName);
    CHECK(m.at("magic") == "CCLE");
    CHECK(m.at("dtype") == "f32le");
    CHECK(m.at("row_count") == p.vocab_size());
}

TEST_CASE("store file layout is little-endian float32") {
    TempDir dir("layout");
    EncoderParams p(std::vector<std::string>{"x"}, 2);
    p.set_table({Subspace::After, Parity::None}, Matrix(1, 2, {1.0f, -2.0f}));
    save_store(dir.path, p);
    std::ifstream in(dir.path / "A.none.f32", std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
    CHECK(bytes == std::vector<unsigned char>{0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0});
}

TEST_CASE("damaged stores are rejected") {
    TempDir dir("damaged");
    const auto p = trained_params();

    SUBCASE("truncated binary") {
        save_store(dir.path, p);
        const auto file = dir.path / "A.none.f32";
        fs::resize_file(file, fs::file_size(file) - 4);
        CHECK_THROWS_AS(load_store(dir.path), ManifestMismatch);
    }
    SUBCASE("bad magic") {
        save_store(dir.path, p);
        auto m = read_json(dir.path / kManifestName);
        m["magic"] = "XXXX";
        write_json(dir.path / kManifestName, m);
        CHECK_THROWS_AS(load_store(dir.path), BadMagic);
    }
    SUBCASE("row count disagrees with the index") {
        save_store(dir.path, p);
        auto m = read_json(dir.path / kManifestName);
        m["row_count"] = p.vocab_size() + 1;
        write_json(dir.path / kManifestName, m);
        CHECK_THROWS_AS(load_store(dir.path), ManifestMismatch);
    }
    SUBCASE("unsupported version") {
        save_store(dir.path, p);
        auto m = read_json(dir.path / kManifestName);
        m["version"] = 2;
        write_json(dir.path / kManifestName, m);
        CHECK_THROWS_AS(load_store(dir.path), ManifestMismatch);
    }
    SUBCASE("missing directory") {
        CHECK_THROWS_AS(load_store(dir.path / "nope"), IoError);
    }
}

TEST_CASE("a six-binary exporter-style store loads and scores") {
    TempDir dir("exporter");
    const std::vector<std::string> utts{"hello", "how are you", "fine thanks", "bye"};
    {
        std::ofstream idx(dir.path / "utterances.txt");
        for (const auto& u : utts) {
            idx << u << '\n';
        }
    }
    nlohmann::json subspaces = nlohmann::json::array();
    float seed = 0.1f;
    for (const std::string tag : {"B1", "B2", "A"}) {
        for (const std::string parity : {"odd", "even"}) {
            const std::string file = tag + "." + parity + ".f32";
            write_floats(dir.path / file, utts.size() * 8, seed);
            seed += 0.03f;
            subspaces.push_back({{"tag", tag}, {"parity", parity}, {"file", file}});
        }
    }
    write_json(dir.path / kManifestName, {{"magic", "CCLE"},
                                          {"version", 1},
                                          {"dim", 8},
                                          {"row_count", utts.size()},
                                          {"dtype", "f32le"},
                                          {"index_file", "utterances.txt"},
                                          {"subspaces", subspaces}});
    const auto p = load_store(dir.path);
    CHECK(p.vocab() == utts);
    CHECK(p.dim() == 8);
    CHECK(p.slots().size() == 6);

    Corpus test;
    test.add_dialog(utts);
    test.add_dialog(std::vector<std::string>{"bye", "hello", "how are you", "fine thanks"});
    const auto r = eval_sequence_modeling(test, p, {});
    CHECK(r.items.size() == 4);
}
