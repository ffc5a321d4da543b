#pragma once

#include "stpca/embedding.hpp"
#include "stpca/forecaster.hpp"
#include "stpca/pca.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace stpca {

/// Writes `bytes` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

/// Little-endian binary encoder.
class BinaryWriter {
 public:
  void bytes(std::string_view b) { buf_.append(b); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void f64(double v);
  const std::string& data() const { return buf_; }

 private:
  std::string buf_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::string data) : buf_(std::move(data)) {}
  std::string bytes(std::size_t n);
  std::uint8_t u8();
  std::uint32_t u32();
  double f64();
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const;
  std::string buf_;
  std::size_t pos_ = 0;
};

inline constexpr std::string_view kProjectionMagic = "STPJ1";
inline constexpr std::string_view kModelMagic = "STPF1";
inline constexpr std::uint32_t kModelVersion = 1;

/// `STPJ1`, u32 T, u32 C, f64 mean[T], f64 components[T*C] row-major, f64 eigenvalues[T].
std::string encode_projection(const PcaProjection& p);
PcaProjection decode_projection(std::string data);
void save_projection(const PcaProjection& p, const std::filesystem::path& path);
PcaProjection load_projection(const std::filesystem::path& path);

/// `STPF1`, u32 version, config block (9 x u32), then every tensor of the
/// model as (u32 rank, u32 dims..., f64 data) in tensors() order, the
/// normalizer as a rank-1 tensor [mean, std], and finally the embedding
/// strategy tag byte.
std::string encode_model(const TrainedModel& m);
TrainedModel decode_model(std::string data);
void save_model(const TrainedModel& m, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

/// CSV `node_id,c0,...,c{C-1}` with 17 significant digits.
void write_embedding_csv(const EmbeddingTable& table, const std::vector<std::string>& node_ids,
                         const std::filesystem::path& path);

}  // namespace stpca
