#include "vsdalign/embedding_store.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

#include "vsdalign/binary_io.hpp"
#include "vsdalign/error.hpp"

namespace vsdalign {

using nlohmann::json;

std::string_view to_string(Modality m) noexcept {
  switch (m) {
    case Modality::image: return "image";
    case Modality::text: return "text";
    case Modality::vsd: return "vsd";
  }
  return "unknown";
}

EmbeddingSet::EmbeddingSet(Modality modality, Matrix data, std::vector<std::string> ids)
    : modality_(modality), data_(std::move(data)), ids_(std::move(ids)) {
  if (ids_.empty()) {
    ids_.reserve(rows());
    for (std::size_t i = 0; i < rows(); ++i) ids_.push_back(std::to_string(i));
  }
  if (ids_.size() != rows()) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(ids_.size()) + " ids for " +
                                              std::to_string(rows()) + " rows");
  }
  for (Eigen::Index i = 0; i < data_.rows(); ++i) {
    for (Eigen::Index j = 0; j < data_.cols(); ++j) {
      if (!std::isfinite(data_(i, j))) {
        throw Error(ErrorCode::NonFiniteValue,
                    "row " + std::to_string(i) + " column " + std::to_string(j));
      }
    }
  }
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) {
      throw Error(ErrorCode::DuplicateId, "id '" + ids_[i] + "' repeated at row " + std::to_string(i));
    }
  }
}

std::optional<std::size_t> EmbeddingSet::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::uint8_t> encode_embeddings(const Matrix& data, Modality modality) {
  io::ByteWriter w;
  w.put_bytes(std::string_view(kEmbMagic, 4));
  w.put_u32(static_cast<std::uint32_t>(data.rows()));
  w.put_u32(static_cast<std::uint32_t>(data.cols()));
  w.put_u8(static_cast<std::uint8_t>(modality));
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    for (Eigen::Index j = 0; j < data.cols(); ++j) w.put_f32(static_cast<float>(data(i, j)));
  return w.take();
}

std::pair<Matrix, Modality> decode_embeddings(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kEmbMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, "expected \"EMB1\" at offset 0");
  }
  io::ByteReader r(bytes);
  r.get_bytes(4);
  const std::uint32_t n = r.get_u32();
  const std::uint32_t d = r.get_u32();
  const std::uint8_t tag = r.get_u8();
  if (tag > static_cast<std::uint8_t>(Modality::vsd)) {
    throw Error(ErrorCode::BadMagic, "unknown modality tag " + std::to_string(tag) + " at offset 12");
  }
  const std::uint64_t expected = kEmbHeaderBytes + 4ULL * n * d;
  if (bytes.size() < expected) {
    throw Error(ErrorCode::TruncatedFile, "header declares n=" + std::to_string(n) + " d=" +
                                              std::to_string(d) + " (" + std::to_string(expected) +
                                              " bytes); data ends at offset " +
                                              std::to_string(bytes.size()));
  }
  if (bytes.size() > expected) {
    throw Error(ErrorCode::TruncatedFile, "trailing bytes after offset " + std::to_string(expected) +
                                              " inconsistent with declared n=" + std::to_string(n) +
                                              " d=" + std::to_string(d));
  }
  Matrix data(n, d);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) {
      const std::size_t at = r.offset();
      const float v = r.get_f32();
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::NonFiniteValue, "value at offset " + std::to_string(at));
      }
      data(i, j) = v;
    }
  }
  return {std::move(data), static_cast<Modality>(tag)};
}

std::filesystem::path ids_sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".ids.json";
  return p;
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingSet& set) {
  io::write_file_atomic(path, encode_embeddings(set.data(), set.modality()));
  io::write_file_atomic(ids_sidecar_path(path), json{{"ids", set.ids()}}.dump() + "\n");
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  auto [data, modality] = decode_embeddings(bytes);
  std::vector<std::string> ids;
  const auto sidecar = ids_sidecar_path(path);
  if (std::filesystem::exists(sidecar)) {
    std::ifstream in(sidecar);
    try {
      ids = json::parse(in).at("ids").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::IoError, sidecar.string() + ": " + e.what());
    }
  }
  return EmbeddingSet(modality, std::move(data), std::move(ids));
}

Matrix normalize_rows(const Matrix& data) {
  Matrix out(data.rows(), data.cols());
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const double norm = data.row(i).norm();
    if (norm == 0.0) throw Error(ErrorCode::ZeroRow, "row " + std::to_string(i) + " is all zero");
    out.row(i) = data.row(i) / norm;
  }
  return out;
}

EmbeddingSet normalize(const EmbeddingSet& set) {
  return EmbeddingSet(set.modality(), normalize_rows(set.data()), set.ids());
}

Vector mean_pool(const Matrix& sequence) {
  if (sequence.rows() == 0) throw Error(ErrorCode::EmptySequence, "mean_pool of an empty sequence");
  return sequence.colwise().sum().transpose() / static_cast<double>(sequence.rows());
}

void PairManifest::validate(std::optional<std::size_t> captions_per_image, bool require_vsd) const {
  std::map<std::string, std::size_t> count;
  for (const auto& id : images) {
    if (!count.emplace(id, 0).second) {
      throw Error(ErrorCode::ManifestMismatch, "duplicate image id '" + id + "'");
    }
  }
  std::set<std::string> caption_ids;
  for (const auto& [cid, parent] : captions) {
    if (!caption_ids.insert(cid).second) {
      throw Error(ErrorCode::ManifestMismatch, "duplicate caption id '" + cid + "'");
    }
    auto it = count.find(parent);
    if (it == count.end()) {
      throw Error(ErrorCode::ManifestMismatch,
                  "caption '" + cid + "' references unknown image '" + parent + "'");
    }
    ++it->second;
  }
  for (const auto& [id, c] : count) {
    if (c == 0) throw Error(ErrorCode::ManifestMismatch, "image '" + id + "' has no captions");
    if (captions_per_image && c != *captions_per_image) {
      throw Error(ErrorCode::ManifestMismatch, "image '" + id + "' has " + std::to_string(c) +
                                                   " captions, expected " +
                                                   std::to_string(*captions_per_image));
    }
  }
  if (require_vsd) {
    for (const auto& id : images) {
      if (!vsd_map.contains(id)) {
        throw Error(ErrorCode::ManifestMismatch, "image '" + id + "' has no vsd entry");
      }
    }
  }
}

std::vector<std::size_t> PairManifest::caption_parents() const {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < images.size(); ++i) index.emplace(images[i], i);
  std::vector<std::size_t> parents;
  parents.reserve(captions.size());
  for (const auto& [cid, parent] : captions) {
    auto it = index.find(parent);
    if (it == index.end()) {
      throw Error(ErrorCode::ManifestMismatch,
                  "caption '" + cid + "' references unknown image '" + parent + "'");
    }
    parents.push_back(it->second);
  }
  return parents;
}

std::string manifest_to_json(const PairManifest& manifest) {
  json captions = json::array();
  for (const auto& [cid, parent] : manifest.captions) captions.push_back({cid, parent});
  json doc{{"images", manifest.images}, {"captions", captions}, {"vsd_map", manifest.vsd_map}};
  return doc.dump(1) + "\n";
}

PairManifest manifest_from_json(const std::string& text) {
  PairManifest m;
  try {
    const auto doc = json::parse(text);
    m.images = doc.at("images").get<std::vector<std::string>>();
    for (const auto& c : doc.at("captions")) {
      m.captions.emplace_back(c.at(0).get<std::string>(), c.at(1).get<std::string>());
    }
    if (doc.contains("vsd_map")) m.vsd_map = doc.at("vsd_map").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ManifestMismatch, std::string("malformed manifest: ") + e.what());
  }
  return m;
}

PairManifest load_manifest(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return manifest_from_json(std::string(bytes.begin(), bytes.end()));
}

void save_manifest(const std::filesystem::path& path, const PairManifest& manifest) {
  io::write_file_atomic(path, manifest_to_json(manifest));
}

}  // namespace vsdalign
