#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vsdalign/types.hpp"

namespace vsdalign {

enum class Modality : std::uint8_t { image = 0, text = 1, vsd = 2 };

std::string_view to_string(Modality m) noexcept;

/// An n x d block of one modality's embeddings with per-row identifiers.
///
/// Values are held at f64 and stored on disk as f32. Instances are validated
/// on construction (finite values, unique ids) and immutable afterwards.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;

  /// Ids default to the decimal row index when empty.
  EmbeddingSet(Modality modality, Matrix data, std::vector<std::string> ids = {});

  Modality modality() const noexcept { return modality_; }
  std::size_t rows() const noexcept { return static_cast<std::size_t>(data_.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(data_.cols()); }
  const Matrix& data() const noexcept { return data_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  /// Row index for an id, or nullopt.
  std::optional<std::size_t> index_of(const std::string& id) const;

 private:
  Modality modality_ = Modality::image;
  Matrix data_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
};

// EMB1 layout: "EMB1" | u32 n | u32 d | u8 modality | n*d f32, all little-endian,
// row-major. Ids go to a sidecar "<path>.ids.json" holding {"ids": [...]}
// indexed by row.

inline constexpr char kEmbMagic[4] = {'E', 'M', 'B', '1'};
inline constexpr std::size_t kEmbHeaderBytes = 13;

std::vector<std::uint8_t> encode_embeddings(const Matrix& data, Modality modality);

/// Parses an EMB1 buffer. Errors name the byte offset of the problem.
std::pair<Matrix, Modality> decode_embeddings(std::span<const std::uint8_t> bytes);

/// Writes `<path>` and its ids sidecar atomically.
void save_embeddings(const std::filesystem::path& path, const EmbeddingSet& set);

/// Reads `<path>` and, if present, its ids sidecar.
EmbeddingSet load_embeddings(const std::filesystem::path& path);

std::filesystem::path ids_sidecar_path(const std::filesystem::path& path);

/// Row-wise L2 normalization. Throws ZeroRow naming the first all-zero row.
Matrix normalize_rows(const Matrix& data);
EmbeddingSet normalize(const EmbeddingSet& set);

/// Column-wise mean of an L x d token sequence.
Vector mean_pool(const Matrix& sequence);

/// Image <-> caption correspondence.
struct PairManifest {
  std::vector<std::string> images;
  std::vector<std::pair<std::string, std::string>> captions;  // (caption id, parent image id)
  std::map<std::string, std::string> vsd_map;                 // image id -> vsd id

  /// Throws ManifestMismatch on: duplicate ids, unknown parent image, image
  /// without captions, a captions-per-image count other than
  /// `captions_per_image` (when given), or missing vsd entries when
  /// `require_vsd` is set.
  void validate(std::optional<std::size_t> captions_per_image = std::nullopt,
                bool require_vsd = false) const;

  /// Parent image index (position in `images`) for each caption, in caption order.
  std::vector<std::size_t> caption_parents() const;
};

PairManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const PairManifest& manifest);
std::string manifest_to_json(const PairManifest& manifest);
PairManifest manifest_from_json(const std::string& text);

}  // namespace vsdalign
