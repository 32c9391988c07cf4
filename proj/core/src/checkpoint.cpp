#include "vsdalign/checkpoint.hpp"

#include <cstring>

#include "vsdalign/binary_io.hpp"
#include "vsdalign/error.hpp"

namespace vsdalign {
namespace {

constexpr char kMagic[8] = {'V', 'S', 'D', 'C', 'K', 'P', 'T', '\0'};

void put_vector(io::ByteWriter& w, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) w.put_f64(v(i));
}

Vector get_vector(io::ByteReader& r, Eigen::Index n) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = r.get_f64();
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  io::ByteWriter w;
  w.put_bytes(std::string_view(kMagic, sizeof kMagic));
  w.put_u32(kCheckpointVersion);
  w.put_u64(c.config.hash());
  w.put_string(c.config.to_json());
  w.put_u32(c.epoch);
  w.put_u32(static_cast<std::uint32_t>(c.params.dim()));
  put_vector(w, c.params.flatten());
  w.put_u64(c.adam.step);
  put_vector(w, c.adam.m);
  put_vector(w, c.adam.v);
  w.put_u32(static_cast<std::uint32_t>(c.bank.centroids.rows()));
  w.put_u32(static_cast<std::uint32_t>(c.bank.centroids.cols()));
  for (Eigen::Index i = 0; i < c.bank.centroids.rows(); ++i)
    for (Eigen::Index j = 0; j < c.bank.centroids.cols(); ++j) w.put_f64(c.bank.centroids(i, j));
  w.put_f64(c.bank.inertia);
  w.put_u64(c.bank.seed);
  w.put_u64(c.bank.iterations);
  w.put_u8(c.bank.normalized ? 1 : 0);
  w.put_string(c.rng_state);
  w.put_u64(io::fnv1a64(w.bytes()));
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw Error(ErrorCode::CorruptCheckpoint, "bad magic at offset 0");
  }
  const auto body = bytes.first(bytes.size() - 8);
  io::ByteReader tail(bytes.last(8));
  if (tail.get_u64() != io::fnv1a64(body)) {
    throw Error(ErrorCode::CorruptCheckpoint, "checksum mismatch (truncated or modified file)");
  }
  try {
    io::ByteReader r(body);
    r.get_bytes(sizeof kMagic);
    const auto version = r.get_u32();
    if (version != kCheckpointVersion) {
      throw Error(ErrorCode::CorruptCheckpoint, "unsupported checkpoint version " + std::to_string(version));
    }
    const auto hash = r.get_u64();
    Checkpoint c;
    c.config = TrainConfig::from_json(r.get_string());
    if (c.config.hash() != hash) throw Error(ErrorCode::CorruptCheckpoint, "config hash does not match config");
    c.epoch = r.get_u32();
    const auto d = r.get_u32();
    const auto n = static_cast<Eigen::Index>(4 * static_cast<std::size_t>(d) + 2);
    c.params = FusionParams::unflatten(get_vector(r, n), d);
    c.adam.step = r.get_u64();
    c.adam.m = get_vector(r, n);
    c.adam.v = get_vector(r, n);
    const auto k = r.get_u32();
    const auto bd = r.get_u32();
    c.bank.centroids.resize(k, bd);
    for (std::uint32_t i = 0; i < k; ++i)
      for (std::uint32_t j = 0; j < bd; ++j) c.bank.centroids(i, j) = r.get_f64();
    c.bank.k = k;
    c.bank.inertia = r.get_f64();
    c.bank.seed = r.get_u64();
    c.bank.iterations = r.get_u64();
    c.bank.normalized = r.get_u8() != 0;
    c.rng_state = r.get_string();
    if (r.remaining() != 0) throw Error(ErrorCode::CorruptCheckpoint, "trailing bytes before checksum");
    return c;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptCheckpoint) throw;
    throw Error(ErrorCode::CorruptCheckpoint, e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  io::write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_file(path)); }

}  // namespace vsdalign
