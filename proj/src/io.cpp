#include "stpca/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <system_error>

namespace stpca {

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void BinaryWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void BinaryWriter::f64(double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

void BinaryReader::need(std::size_t n) const {
  if (buf_.size() - pos_ < n) throw Error("truncated binary file");
}

std::string BinaryReader::bytes(std::size_t n) {
  need(n);
  auto out = buf_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t BinaryReader::u8() {
  need(1);
  return static_cast<std::uint8_t>(buf_[pos_++]);
}

std::uint32_t BinaryReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_++])) << (8 * i);
  return v;
}

double BinaryReader::f64() {
  need(8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_++])) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::string encode_projection(const PcaProjection& p) {
  BinaryWriter w;
  w.bytes(kProjectionMagic);
  const auto t = static_cast<std::uint32_t>(p.slots());
  const auto c = static_cast<std::uint32_t>(p.dim());
  w.u32(t);
  w.u32(c);
  for (Eigen::Index i = 0; i < p.mean.size(); ++i) w.f64(p.mean[i]);
  for (Eigen::Index i = 0; i < p.components.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.components.cols(); ++j) w.f64(p.components(i, j));
  }
  for (Eigen::Index i = 0; i < p.eigenvalues.size(); ++i) w.f64(p.eigenvalues[i]);
  return w.data();
}

PcaProjection decode_projection(std::string data) {
  BinaryReader r(std::move(data));
  if (r.bytes(kProjectionMagic.size()) != kProjectionMagic) throw Error("not a projection checkpoint (bad magic)");
  const auto t = static_cast<Eigen::Index>(r.u32());
  const auto c = static_cast<Eigen::Index>(r.u32());
  if (t < 1 || c < 1 || c > t) throw Error("projection checkpoint has invalid shape");
  PcaProjection p;
  p.mean.resize(t);
  for (Eigen::Index i = 0; i < t; ++i) p.mean[i] = r.f64();
  p.components.resize(t, c);
  for (Eigen::Index i = 0; i < t; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) p.components(i, j) = r.f64();
  }
  p.eigenvalues.resize(t);
  for (Eigen::Index i = 0; i < t; ++i) p.eigenvalues[i] = r.f64();
  if (!r.at_end()) throw Error("trailing bytes in projection checkpoint");
  p.centered = !p.mean.isZero(0.0);
  return p;
}

void save_projection(const PcaProjection& p, const std::filesystem::path& path) {
  write_file_atomic(path, encode_projection(p));
}

PcaProjection load_projection(const std::filesystem::path& path) { return decode_projection(read_file(path)); }

std::string encode_model(const TrainedModel& m) {
  BinaryWriter w;
  w.bytes(kModelMagic);
  w.u32(kModelVersion);
  const auto& c = m.params.config;
  for (int v : {c.l1, c.l2, c.embed_dim, c.tod_dim, c.dow_dim, c.hidden_dim, c.num_blocks, c.use_graph ? 1 : 0,
                c.steps_per_day}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  auto params = m.params;
  for (const auto& t : tensors(params)) {
    w.u32(static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) w.u32(d);
    for (double v : t.data) w.f64(v);
  }
  w.u32(1);
  w.u32(2);
  w.f64(m.normalizer.mean);
  w.f64(m.normalizer.std);
  w.u8(static_cast<std::uint8_t>(m.params.embedding.strategy));
  return w.data();
}

TrainedModel decode_model(std::string data) {
  BinaryReader r(std::move(data));
  if (r.bytes(kModelMagic.size()) != kModelMagic) throw Error("not a model checkpoint (bad magic)");
  const auto version = r.u32();
  if (version != kModelVersion) throw Error("unsupported model checkpoint version " + std::to_string(version));
  ModelConfig c;
  c.l1 = static_cast<int>(r.u32());
  c.l2 = static_cast<int>(r.u32());
  c.embed_dim = static_cast<int>(r.u32());
  c.tod_dim = static_cast<int>(r.u32());
  c.dow_dim = static_cast<int>(r.u32());
  c.hidden_dim = static_cast<int>(r.u32());
  c.num_blocks = static_cast<int>(r.u32());
  c.use_graph = r.u32() != 0;
  c.steps_per_day = static_cast<int>(r.u32());
  c.validate();

  // Node count is the first dimension of the stored embedding; read the
  // stream once into a shape-matching model.
  std::vector<std::pair<std::vector<std::uint32_t>, std::vector<double>>> raw;
  const std::size_t expected = 5 + 4 * static_cast<std::size_t>(c.num_blocks) + 2;
  for (std::size_t i = 0; i < expected; ++i) {
    const auto rank = r.u32();
    if (rank < 1 || rank > 2) throw Error("model checkpoint: bad tensor rank");
    std::vector<std::uint32_t> dims(rank);
    std::size_t size = 1;
    for (auto& d : dims) {
      d = r.u32();
      if (d == 0 || d > (1u << 24)) throw Error("model checkpoint: implausible tensor dimension");
      size *= d;
    }
    if (size > (std::size_t{1} << 28)) throw Error("model checkpoint: tensor too large");
    std::vector<double> values(size);
    for (auto& v : values) v = r.f64();
    raw.emplace_back(std::move(dims), std::move(values));
  }
  const auto& emb_dims = raw[2].first;
  if (emb_dims.size() != 2 || emb_dims[1] != static_cast<std::uint32_t>(c.embed_dim)) {
    throw Error("model checkpoint: embedding shape does not match config");
  }
  TrainedModel m;
  m.params = init_params(c, emb_dims[0], 0);
  auto views = tensors(m.params);
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (views[i].dims != raw[i].first) throw Error("model checkpoint: shape mismatch for " + views[i].name);
    std::copy(raw[i].second.begin(), raw[i].second.end(), views[i].data.begin());
  }
  if (r.u32() != 1 || r.u32() != 2) throw Error("model checkpoint: bad normalizer block");
  m.normalizer.mean = r.f64();
  m.normalizer.std = r.f64();
  const auto tag = r.u8();
  if (tag > 2) throw Error("model checkpoint: bad strategy tag");
  m.params.embedding.strategy = static_cast<EmbeddingStrategy>(tag);
  if (!r.at_end()) throw Error("trailing bytes in model checkpoint");
  return m;
}

void save_model(const TrainedModel& m, const std::filesystem::path& path) { write_file_atomic(path, encode_model(m)); }

TrainedModel load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

void write_embedding_csv(const EmbeddingTable& table, const std::vector<std::string>& node_ids,
                         const std::filesystem::path& path) {
  if (node_ids.size() != table.rows()) throw Error("node id count does not match embedding rows");
  std::ostringstream out;
  out << "node_id";
  for (std::size_t c = 0; c < table.dim(); ++c) out << ",c" << c;
  out << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
    out << node_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < table.values.cols(); ++j) out << ',' << table.values(i, j);
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

}  // namespace stpca
