#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "vsdalign/embedding_store.hpp"
#include "vsdalign/types.hpp"

namespace vsdalign {

/// Embedding sets as they come off disk, plus the correspondence manifest.
/// `text_aux` is the caption encoded by the description encoder; when absent
/// the text path fuses the backbone text with itself.
struct Dataset {
  EmbeddingSet images;
  EmbeddingSet texts;
  EmbeddingSet vsd;
  std::optional<EmbeddingSet> text_aux;
  PairManifest manifest;
};

/// Row-aligned view used by training and evaluation: image row i, vsd row i
/// and caption rows j with caption_parent[j] == i all refer to the same image.
struct AlignedData {
  Matrix images;
  Matrix vsd;
  Matrix texts;
  Matrix text_aux;
  std::vector<std::size_t> caption_parent;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(images.cols()); }
};

/// Validates the manifest, resolves ids and enforces one shared dimension
/// (DimensionMismatch otherwise). Rows are L2-normalized.
AlignedData align(const Dataset& data);

/// Standard file names inside a dataset directory.
namespace dataset_files {
inline constexpr const char* images = "image.emb";
inline constexpr const char* texts = "text.emb";
inline constexpr const char* text_aux = "text_aux.emb";
inline constexpr const char* vsd = "vsd.emb";
inline constexpr const char* manifest = "manifest.json";
}  // namespace dataset_files

/// Loads a directory laid out with the names above; text_aux is optional.
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const std::filesystem::path& dir, const Dataset& data);

}  // namespace vsdalign
