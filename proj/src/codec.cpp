#include "miner/codec.hpp"

#include <zlib.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <map>
#include <ostream>
#include <string>

#include "miner/error.hpp"
#include "miner/parallel.hpp"

namespace miner {

bool operator==(const ScaleModel& a, const ScaleModel& b) {
  if (!(a.grid == b.grid) || a.params.size() != b.params.size()) return false;
  // Bit comparison: NaN payloads and signed zeros must round-trip too.
  return std::memcmp(a.params.data(), b.params.data(), a.params.size() * sizeof(float)) == 0;
}

bool operator==(const MinerModel& a, const MinerModel& b) {
  return a.domain == b.domain && a.pyramid == b.pyramid && a.block_size == b.block_size && a.dims == b.dims &&
         a.channels == b.channels && a.arch.in_dim == b.arch.in_dim && a.arch.out_dim == b.arch.out_dim &&
         a.arch.hidden_features == b.arch.hidden_features && a.arch.num_layers == b.arch.num_layers &&
         std::bit_cast<std::uint32_t>(a.arch.omega0) == std::bit_cast<std::uint32_t>(b.arch.omega0) &&
         a.scales == b.scales;
}

std::vector<std::size_t> MinerModel::dims_at(std::size_t scale) const {
  std::vector<std::size_t> d = dims;
  for (auto& x : d) x >>= scale;
  return d;
}

std::size_t MinerModel::nets_at(std::size_t scale) const { return scales.at(scale).grid.num_active(); }

std::size_t MinerModel::total_params() const {
  std::size_t n = 0;
  for (const auto& s : scales) n += s.grid.num_active() * arch.num_params();
  return n;
}

std::span<const float> MinerModel::net_params(std::size_t scale, std::size_t ordinal) const {
  const auto& s = scales.at(scale);
  const std::size_t p = arch.num_params();
  if (ordinal >= s.grid.num_active()) throw Error(ErrorCode::IndexOutOfRange, "net ordinal");
  return std::span<const float>(s.params).subspan(ordinal * p, p);
}

void MinerModel::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::CorruptFile, why); };
  const std::size_t rank = domain == DomainKind::Image2D ? 2 : 3;
  if (dims.size() != rank) fail("dims do not match domain");
  if (scales.empty()) fail("model has no scales");
  if (block_size == 0) fail("zero block size");
  if (channels == 0 || (domain == DomainKind::Volume3D && channels != 1)) fail("bad channel count");
  if (arch.in_dim != rank || arch.out_dim != channels) fail("net shape does not match signal");
  try {
    arch.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
  const std::size_t factor = block_size << (scales.size() - 1);
  for (std::size_t d : dims) {
    if (d == 0 || d % factor != 0) fail("dims not divisible by block size at every scale");
  }
  for (std::size_t j = 0; j < scales.size(); ++j) {
    const auto dj = dims_at(j);
    const auto& g = scales[j].grid;
    if (g.block_size() != block_size || g.rank() != rank) fail("grid shape mismatch");
    for (std::size_t a = 0; a < rank; ++a) {
      if (g.counts()[a] * block_size != dj[a]) fail("grid does not tile scale");
    }
    if (scales[j].params.size() != g.num_active() * arch.num_params()) fail("parameter count mismatch");
  }
}

// ---------------------------------------------------------------------------
// Decoding

GridSignal residue_field(const MinerModel& model, std::size_t scale) {
  if (scale >= model.num_scales()) throw Error(ErrorCode::ScaleOutOfRange, "scale " + std::to_string(scale));
  const auto& s = model.scales[scale];
  GridSignal field(model.domain, model.dims_at(scale), model.channels);
  const LocalCoords coords = local_coord_grid(model.block_size, model.dims.size());
  const auto& active = s.grid.active_indices();
  parallel_for(active.size(), [&](std::size_t ordinal) {
    TinyNet<float> net(model.arch);
    const auto p = model.net_params(scale, ordinal);
    std::copy(p.begin(), p.end(), net.params.begin());
    const auto out = forward(net, coords);
    scatter_block(field, s.grid, active[ordinal], out);
  });
  return field;
}

GridSignal decode(const MinerModel& model, std::size_t scale) {
  if (scale >= model.num_scales()) throw Error(ErrorCode::ScaleOutOfRange, "scale " + std::to_string(scale));
  if (model.pyramid == PyramidKind::Gaussian) return residue_field(model, scale);
  GridSignal est = residue_field(model, model.num_scales() - 1);
  for (std::size_t j = model.num_scales() - 1; j-- > scale;) {
    est = add(upsample(est, 1), residue_field(model, j));
  }
  return est;
}

namespace {

struct AxisStencil {
  std::size_t lo = 0;
  std::size_t hi = 0;
  float w = 0.0f;
};

// Same rule as the factor-2 pass of upsample().
AxisStencil upsample_stencil(double fine_pos, std::size_t coarse_extent) {
  const double x = (fine_pos + 0.5) / 2.0 - 0.5;
  AxisStencil s;
  if (x <= 0.0) return s;
  if (x >= static_cast<double>(coarse_extent - 1)) {
    s.lo = s.hi = coarse_extent - 1;
    return s;
  }
  const double f = std::floor(x);
  s.lo = static_cast<std::size_t>(f);
  s.hi = s.lo + 1;
  s.w = static_cast<float>(x - f);
  return s;
}

class PointDecoder {
 public:
  explicit PointDecoder(const MinerModel& model) : model_(model), ordinals_(model.num_scales()), memo_(model.num_scales()) {
    for (std::size_t j = 0; j < model.num_scales(); ++j) {
      const auto& g = model.scales[j].grid;
      ordinals_[j].assign(g.total_blocks(), kNone);
      const auto& act = g.active_indices();
      for (std::size_t o = 0; o < act.size(); ++o) ordinals_[j][act[o]] = o;
    }
  }

  // Estimate at a (possibly fractional) position at `scale`.
  std::vector<float> estimate(std::size_t scale, std::span<const double> pos) {
    std::vector<float> value = field(scale, pos);
    if (model_.pyramid == PyramidKind::Laplacian && scale + 1 < model_.num_scales()) {
      const auto up = upsampled(scale + 1, pos);
      for (std::size_t c = 0; c < value.size(); ++c) value[c] = up[c] + value[c];
    }
    return value;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::vector<float> field(std::size_t scale, std::span<const double> pos) {
    const auto& grid = model_.scales[scale].grid;
    const auto dims = model_.dims_at(scale);
    const double b = static_cast<double>(model_.block_size);
    std::vector<std::size_t> block(dims.size());
    std::vector<float> local(dims.size());
    for (std::size_t a = 0; a < dims.size(); ++a) {
      const double shifted = pos[a] + 0.5;
      auto bi = static_cast<std::size_t>(std::floor(shifted / b));
      bi = std::min(bi, grid.counts()[a] - 1);
      block[a] = bi;
      local[a] = static_cast<float>(-1.0 + 2.0 * (shifted - static_cast<double>(bi) * b) / b);
    }
    const std::size_t ordinal = ordinals_[scale][grid.linear_index(block)];
    if (ordinal == kNone) return std::vector<float>(model_.channels, 0.0f);
    TinyNet<float> net(model_.arch);
    const auto p = model_.net_params(scale, ordinal);
    std::copy(p.begin(), p.end(), net.params.begin());
    return forward<float>(net, std::span<const float>(local));
  }

  const std::vector<float>& sample(std::size_t scale, const std::vector<std::size_t>& idx) {
    auto& memo = memo_[scale];
    if (auto it = memo.find(idx); it != memo.end()) return it->second;
    std::vector<double> pos(idx.begin(), idx.end());
    return memo.emplace(idx, estimate(scale, pos)).first->second;
  }

  // Upsampled value of the coarse estimate at a fine-scale position,
  // combined axis by axis in the same order as upsample().
  std::vector<float> upsampled(std::size_t coarse_scale, std::span<const double> fine_pos) {
    const auto cdims = model_.dims_at(coarse_scale);
    const std::size_t rank = cdims.size();
    std::vector<AxisStencil> st(rank);
    for (std::size_t a = 0; a < rank; ++a) st[a] = upsample_stencil(fine_pos[a], cdims[a]);
    const std::size_t ch = model_.channels;

    // corners[mask]: bit a of mask selects hi on axis a.
    const std::size_t n_corners = std::size_t{1} << rank;
    std::vector<std::vector<float>> vals(n_corners);
    for (std::size_t mask = 0; mask < n_corners; ++mask) {
      std::vector<std::size_t> idx(rank);
      for (std::size_t a = 0; a < rank; ++a) idx[a] = (mask >> a) & 1u ? st[a].hi : st[a].lo;
      vals[mask] = sample(coarse_scale, idx);
    }
    // Collapse axis 0 first, then 1, then 2.
    for (std::size_t a = 0; a < rank; ++a) {
      const std::size_t bit = std::size_t{1} << a;
      for (std::size_t mask = 0; mask < n_corners; ++mask) {
        if (mask & bit) continue;
        bool fresh = true;
        for (std::size_t prev = 0; prev < a; ++prev) fresh = fresh && !(mask & (std::size_t{1} << prev));
        if (!fresh) continue;
        auto& lo = vals[mask];
        const auto& hi = vals[mask | bit];
        for (std::size_t c = 0; c < ch; ++c) lo[c] = lo[c] + st[a].w * (hi[c] - lo[c]);
      }
    }
    return vals[0];
  }

  const MinerModel& model_;
  std::vector<std::vector<std::size_t>> ordinals_;
  std::vector<std::map<std::vector<std::size_t>, std::vector<float>>> memo_;
};

}  // namespace

std::vector<float> decode_point(const MinerModel& model, std::span<const double> position) {
  if (position.size() != model.dims.size()) throw Error(ErrorCode::OutOfDomain, "position rank");
  for (std::size_t a = 0; a < position.size(); ++a) {
    const double p = position[a];
    if (!(p >= -0.5 && p <= static_cast<double>(model.dims[a]) - 0.5)) {
      throw Error(ErrorCode::OutOfDomain, "position outside the finest grid");
    }
  }
  PointDecoder dec(model);
  return dec.estimate(0, position);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const noexcept { return b_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) throw Error(ErrorCode::TruncatedFile, "unexpected end of model data");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

constexpr std::array<std::uint8_t, 4> kMagic = {'M', 'I', 'N', 'R'};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = crc32(crc, bytes.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

MinerModel parse_body(ByteReader& r) {
  auto corrupt = [](const std::string& why) { return Error(ErrorCode::CorruptFile, why); };
  MinerModel m;
  const std::uint8_t domain = r.u8();
  const std::uint8_t pyramid = r.u8();
  if (domain > 1) throw corrupt("unknown domain kind");
  if (pyramid > 1) throw corrupt("unknown pyramid kind");
  m.domain = static_cast<DomainKind>(domain);
  m.pyramid = static_cast<PyramidKind>(pyramid);
  const std::size_t num_scales = r.u8();
  m.block_size = r.u16();
  const std::size_t rank = m.domain == DomainKind::Image2D ? 2 : 3;
  for (std::size_t a = 0; a < rank; ++a) m.dims.push_back(r.u32());
  m.channels = r.u16();
  m.arch.in_dim = r.u16();
  m.arch.out_dim = r.u16();
  m.arch.hidden_features = r.u16();
  m.arch.num_layers = r.u16();
  m.arch.omega0 = r.f32();
  const std::uint64_t declared_params = r.u64();

  if (num_scales == 0 || num_scales > 32 || m.block_size == 0) throw corrupt("bad scale count or block size");
  const std::size_t factor = m.block_size << (num_scales - 1);
  for (std::size_t d : m.dims) {
    if (d == 0 || d % factor != 0) throw corrupt("dims not divisible by block size at every scale");
  }
  if (m.arch.in_dim != rank || m.arch.out_dim != m.channels || m.arch.num_layers < 2 ||
      m.arch.hidden_features == 0 || !(m.arch.omega0 > 0.0f)) {
    throw corrupt("invalid network architecture");
  }
  const std::size_t per_net = m.arch.num_params();

  m.scales.resize(num_scales);
  for (std::size_t j = num_scales; j-- > 0;) {
    std::vector<std::size_t> counts;
    std::size_t total = 1;
    for (std::size_t d : m.dims) {
      const std::size_t c = (d >> j) / m.block_size;
      if (total > std::numeric_limits<std::size_t>::max() / c) throw corrupt("block count overflow");
      total *= c;
      counts.push_back(c);
    }
    const std::size_t bitmap_bytes = (total + 7) / 8;
    if (bitmap_bytes > r.remaining()) throw Error(ErrorCode::TruncatedFile, "bitmap exceeds file");
    const auto bitmap = r.take(bitmap_bytes);
    std::vector<bool> bits(total);
    std::size_t active = 0;
    for (std::size_t i = 0; i < total; ++i) {
      bits[i] = (bitmap[i / 8] >> (i % 8)) & 1u;
      active += bits[i] ? 1 : 0;
    }
    for (std::size_t i = total; i < bitmap_bytes * 8; ++i) {
      if ((bitmap[i / 8] >> (i % 8)) & 1u) throw corrupt("padding bits set in active bitmap");
    }
    ScaleModel& s = m.scales[j];
    s.grid = BlockGrid(j, m.block_size, counts);
    s.grid.set_active_bits(std::move(bits));
    if (active > r.remaining() / (per_net * sizeof(float))) {
      throw Error(ErrorCode::TruncatedFile, "parameters exceed file");
    }
    s.params.resize(active * per_net);
    for (float& p : s.params) p = r.f32();
  }
  if (r.remaining() != 0) throw corrupt("trailing bytes after parameters");
  if (declared_params != m.total_params()) throw corrupt("header parameter count disagrees with payload");
  return m;
}

}  // namespace

std::vector<std::uint8_t> serialize(const MinerModel& model) {
  model.validate();
  if (model.num_scales() > 255 || model.block_size > 0xFFFF || model.channels > 0xFFFF) {
    throw Error(ErrorCode::InvalidConfig, "model does not fit the file format's field widths");
  }
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(kModelVersion);
  w.u8(static_cast<std::uint8_t>(model.domain));
  w.u8(static_cast<std::uint8_t>(model.pyramid));
  w.u8(static_cast<std::uint8_t>(model.num_scales()));
  w.u16(static_cast<std::uint16_t>(model.block_size));
  for (std::size_t d : model.dims) {
    if (d > 0xFFFFFFFFu) throw Error(ErrorCode::InvalidConfig, "dimension exceeds u32");
    w.u32(static_cast<std::uint32_t>(d));
  }
  w.u16(static_cast<std::uint16_t>(model.channels));
  w.u16(model.arch.in_dim);
  w.u16(model.arch.out_dim);
  w.u16(model.arch.hidden_features);
  w.u16(model.arch.num_layers);
  w.f32(model.arch.omega0);
  w.u64(model.total_params());
  // Coarse to fine, so a reader can stop after any prefix of scales.
  for (std::size_t j = model.num_scales(); j-- > 0;) {
    const auto& s = model.scales[j];
    const auto& bits = s.grid.active_bits();
    std::vector<std::uint8_t> bitmap((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i]) bitmap[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    }
    w.bytes(bitmap);
    for (float p : s.params) w.f32(p);
  }
  const std::uint32_t crc = crc32_of(w.buffer());
  w.u32(crc);
  return std::move(w.buffer());
}

MinerModel deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size()) throw Error(ErrorCode::TruncatedFile, "file shorter than magic");
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) throw Error(ErrorCode::BadMagic, "not a MINR file");
  if (bytes.size() < 8) throw Error(ErrorCode::TruncatedFile, "file shorter than header");
  ByteReader head(bytes.subspan(4, 4));
  const std::uint32_t version = head.u32();
  if (version != kModelVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "version " + std::to_string(version));
  }
  if (bytes.size() < 12) throw Error(ErrorCode::TruncatedFile, "file shorter than header");

  const auto body = bytes.subspan(8, bytes.size() - 12);
  ByteReader tail(bytes.subspan(bytes.size() - 4));
  const bool crc_ok = crc32_of(bytes.first(bytes.size() - 4)) == tail.u32();

  ByteReader r(body);
  try {
    MinerModel m = parse_body(r);
    if (!crc_ok) throw Error(ErrorCode::ChecksumMismatch, "CRC32 does not match contents");
    return m;
  } catch (const Error& e) {
    // A structurally short file is reported as truncated; any other
    // inconsistency in a file whose checksum fails is a checksum error.
    if (e.code() == ErrorCode::TruncatedFile || crc_ok) throw;
    throw Error(ErrorCode::ChecksumMismatch, "CRC32 does not match contents");
  }
}

void save(const MinerModel& model, std::ostream& sink) {
  const auto bytes = serialize(model);
  sink.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!sink) throw Error(ErrorCode::Io, "failed writing model stream");
}

MinerModel load(std::istream& source) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(source)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

void save_file(const MinerModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  save(model, out);
}

MinerModel load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return load(in);
}

}  // namespace miner
