#include "sfb/codec.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "sfb/error.hpp"

namespace sfb {

namespace {

constexpr std::uint8_t kSfMagic[4] = {'S', 'F', 'B', '1'};
constexpr std::uint8_t kFmMagic[4] = {'F', 'M', 'S', '1'};
constexpr std::uint8_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::size_t reserve) { buf_.reserve(reserve); }

  void bytes(const std::uint8_t* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void crc() { u32(crc32(buf_)); }

  Bytes take() { return std::move(buf_); }

 private:
  Bytes buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw DecodeError(std::string("truncated message reading ") + what);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return data_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{data_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{data_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  void expect_magic(const std::uint8_t (&magic)[4]) {
    need(4, "magic");
    if (std::memcmp(data_.data() + pos_, magic, 4) != 0) throw DecodeError("bad magic");
    pos_ += 4;
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

/// Verifies that exactly a trailing CRC remains and that it matches.
void finish_crc(Reader& r, std::span<const std::uint8_t> bytes) {
  if (r.remaining() != kCrcBytes) throw DecodeError("message length does not match its header");
  const auto body = bytes.first(r.position());
  const std::uint32_t want = r.u32("checksum");
  if (crc32(body) != want) throw DecodeError("CRC32 mismatch");
}

std::size_t vec_size(const Vec64& v) {
  return 1 + 4 + 4 + v.nnz() * 8 + (v.is_sparse() ? v.nnz() * 4 : 0);
}

void write_vec(Writer& w, const Vec64& v) {
  w.u8(v.is_sparse() ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(v.dim()));
  w.u32(static_cast<std::uint32_t>(v.nnz()));
  for (double x : v.values()) w.f64(x);
  if (v.is_sparse()) {
    for (auto i : v.indices()) w.u32(i);
  }
}

Vec64 read_vec(Reader& r) {
  const auto flag = r.u8("vector flag");
  if (flag > 1) throw DecodeError("bad vector flag");
  const std::uint32_t dim = r.u32("vector dim");
  const std::uint32_t nnz = r.u32("vector nnz");
  if (flag == 0 && nnz != dim) throw DecodeError("dense vector with nnz != dim");
  if (nnz > dim) throw DecodeError("vector nnz exceeds dim");
  const std::size_t payload = std::size_t{nnz} * (flag == 1 ? 12 : 8);
  r.need(payload, "vector payload");
  std::vector<double> values(nnz);
  for (auto& x : values) {
    x = r.f64("vector value");
  }
  try {
    if (flag == 0) return Vec64::dense(std::move(values));
    std::vector<std::uint32_t> idx(nnz);
    for (auto& i : idx) i = r.u32("vector index");
    return Vec64::sparse(dim, std::move(idx), std::move(values));
  } catch (const std::invalid_argument& e) {
    throw DecodeError(std::string("invalid vector payload: ") + e.what());
  }
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> data) {
  uLong c = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(data.size() - off, 1u << 30));
    c = ::crc32(c, data.data() + off, n);
    off += n;
  }
  return static_cast<std::uint32_t>(c);
}

std::size_t encoded_size(const SFMessage& m) {
  std::size_t n = kSfHeaderBytes + kCrcBytes;
  for (const auto& p : m.pairs) n += vec_size(p.u) + vec_size(p.v);
  return n;
}

Bytes encode(const SFMessage& m) {
  Writer w(encoded_size(m));
  w.bytes(kSfMagic, 4);
  w.u8(kVersion);
  w.u32(m.sender);
  w.u64(m.clock);
  w.u8(static_cast<std::uint8_t>(m.model));
  w.f64(m.coeff);
  w.u32(static_cast<std::uint32_t>(m.pairs.size()));
  for (const auto& p : m.pairs) {
    write_vec(w, p.u);
    write_vec(w, p.v);
  }
  w.crc();
  return w.take();
}

SFMessage decode(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.expect_magic(kSfMagic);
  if (r.u8("version") != kVersion) throw DecodeError("unsupported version");
  SFMessage m;
  m.sender = r.u32("sender");
  m.clock = r.u64("clock");
  const auto model = r.u8("model");
  if (model < 1 || model > 4) throw DecodeError("unknown model id");
  m.model = static_cast<ModelKind>(model);
  m.coeff = r.f64("coeff");
  if (!std::isfinite(m.coeff)) throw DecodeError("non-finite coeff");
  const std::uint32_t count = r.u32("pair count");
  // Every pair needs at least two 9-byte vector headers.
  if (std::size_t{count} * 18 > r.remaining()) throw DecodeError("pair count exceeds message length");
  m.pairs.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Vec64 u = read_vec(r);
    Vec64 v = read_vec(r);
    m.pairs.push_back({std::move(u), std::move(v)});
  }
  finish_crc(r, bytes);
  return m;
}

Bytes encode(const FullMatrixMessage& m) {
  Writer w(4 + 1 + 4 + 8 + 4 + 4 + m.matrix.size() * 8 + kCrcBytes);
  w.bytes(kFmMagic, 4);
  w.u8(kVersion);
  w.u32(m.sender);
  w.u64(m.round);
  w.u32(static_cast<std::uint32_t>(m.matrix.rows()));
  w.u32(static_cast<std::uint32_t>(m.matrix.cols()));
  for (double x : m.matrix.data()) w.f64(x);
  w.crc();
  return w.take();
}

FullMatrixMessage decode_full_matrix(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.expect_magic(kFmMagic);
  if (r.u8("version") != kVersion) throw DecodeError("unsupported version");
  FullMatrixMessage m;
  m.sender = r.u32("sender");
  m.round = r.u64("round");
  const std::uint32_t rows = r.u32("rows");
  const std::uint32_t cols = r.u32("cols");
  const std::size_t n = std::size_t{rows} * cols;
  if (n > r.remaining() / 8) throw DecodeError("matrix size exceeds message length");
  std::vector<double> values(n);
  for (auto& x : values) x = r.f64("matrix value");
  finish_crc(r, bytes);
  try {
    m.matrix = ParamMatrix(rows, cols, std::move(values));
  } catch (const std::invalid_argument& e) {
    throw DecodeError(std::string("invalid matrix payload: ") + e.what());
  }
  return m;
}

MessageType peek_type(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) return MessageType::kUnknown;
  if (std::memcmp(bytes.data(), kSfMagic, 4) == 0) return MessageType::kSfBatch;
  if (std::memcmp(bytes.data(), kFmMagic, 4) == 0) return MessageType::kFullMatrix;
  return MessageType::kUnknown;
}

SFMessage to_message(const SFBatch& batch, ModelKind model) {
  return {batch.sender, batch.clock, model, batch.coeff, batch.pairs};
}

SFBatch to_batch(SFMessage message) {
  return {std::move(message.pairs), message.coeff, message.sender, message.clock};
}

void append_frame(Bytes& out, std::span<const std::uint8_t> payload) {
  const auto n = static_cast<std::uint32_t>(payload.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
  out.insert(out.end(), payload.begin(), payload.end());
}

void write_frame(std::ostream& out, std::span<const std::uint8_t> payload) {
  const auto n = static_cast<std::uint32_t>(payload.size());
  char head[4];
  for (int i = 0; i < 4; ++i) head[i] = static_cast<char>(n >> (8 * i));
  out.write(head, 4);
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
}

std::vector<Bytes> read_frames(std::istream& in) {
  std::vector<Bytes> frames;
  for (;;) {
    std::uint8_t head[4];
    in.read(reinterpret_cast<char*>(head), 4);
    if (in.gcount() == 0) break;
    if (in.gcount() != 4) throw DecodeError("truncated frame header");
    std::uint32_t n = 0;
    for (int i = 0; i < 4; ++i) n |= std::uint32_t{head[i]} << (8 * i);
    Bytes payload(n);
    in.read(reinterpret_cast<char*>(payload.data()), n);
    if (static_cast<std::uint32_t>(in.gcount()) != n) throw DecodeError("truncated frame payload");
    frames.push_back(std::move(payload));
  }
  return frames;
}

}  // namespace sfb
