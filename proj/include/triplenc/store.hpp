#pragma once

#include <filesystem>
#include <string_view>

#include "triplenc/encoder.hpp"

namespace triplenc {

/// On-disk embedding store: a directory with
///
///   manifest.json     {"magic": "CCLE", "version": 1, "dim": d, "row_count": n,
///                      "dtype": "f32le", "index_file": "utterances.txt",
///                      "subspaces": [{"tag": "B1", "parity": "odd", "file": "B1.odd.f32"}, ...]}
///   utterances.txt    one utterance per line; line r (0-based) is row r
///   <tag>.<parity>.f32  n * d little-endian float32, row-major
///
/// Tags are B, B1, B2, A; parity is none, even or odd.
inline constexpr std::string_view kStoreMagic = "CCLE";
inline constexpr int kStoreVersion = 1;
inline constexpr std::string_view kManifestName = "manifest.json";

/// Writes every table of `params`. Throws IoError, or InvalidConfig for utterances containing
/// a line break (they cannot be represented in the index file).
void save_store(const std::filesystem::path& dir, const EncoderParams& params);

/// Throws BadMagic, ManifestMismatch (version, dtype, dim/row count, file size or index length
/// disagreement), NonFinite, IoError.
EncoderParams load_store(const std::filesystem::path& dir);

}  // namespace triplenc
