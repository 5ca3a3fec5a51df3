#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "sfb/models.hpp"
#include "sfb/tensor.hpp"

namespace sfb {

using Bytes = std::vector<std::uint8_t>;

/// CRC-32 (IEEE 802.3 polynomial).
std::uint32_t crc32(std::span<const std::uint8_t> data);

/// Wire envelope of one committed SF batch.
///
/// Layout, all little-endian:
///   "SFB1" | version u8 = 1 | sender u32 | clock u64 | model u8 | coeff f64 |
///   pair count u32 | per pair, u then v: { flag u8 (0 dense, 1 sparse) |
///   dim u32 | nnz u32 | values f64[nnz] | indices u32[nnz] if sparse } |
///   CRC32 u32 over every preceding byte
struct SFMessage {
  WorkerId sender = 0;
  std::uint64_t clock = 0;
  ModelKind model = ModelKind::kMlr;
  double coeff = 0.0;
  std::vector<SFPair> pairs;

  friend bool operator==(const SFMessage&, const SFMessage&) = default;
};

/// Dense matrix payload of the full-matrix baseline.
///
///   "FMS1" | version u8 = 1 | sender u32 | round u64 | rows u32 | cols u32 |
///   values f64[rows*cols] row-major | CRC32 u32
struct FullMatrixMessage {
  WorkerId sender = 0;
  std::uint64_t round = 0;
  ParamMatrix matrix;

  friend bool operator==(const FullMatrixMessage&, const FullMatrixMessage&) = default;
};

enum class MessageType { kSfBatch, kFullMatrix, kUnknown };

inline constexpr std::size_t kSfHeaderBytes = 4 + 1 + 4 + 8 + 1 + 8 + 4;
inline constexpr std::size_t kCrcBytes = 4;

std::size_t encoded_size(const SFMessage& m);
Bytes encode(const SFMessage& m);
/// Throws DecodeError on a bad magic/version, any length inconsistency, a
/// CRC mismatch, or payload that violates Vec64 invariants.
SFMessage decode(std::span<const std::uint8_t> bytes);

Bytes encode(const FullMatrixMessage& m);
FullMatrixMessage decode_full_matrix(std::span<const std::uint8_t> bytes);

MessageType peek_type(std::span<const std::uint8_t> bytes);

SFMessage to_message(const SFBatch& batch, ModelKind model);
SFBatch to_batch(SFMessage message);

/// Length-prefixed (u32 little-endian) records, used for TCP framing and
/// batch logs.
void append_frame(Bytes& out, std::span<const std::uint8_t> payload);
void write_frame(std::ostream& out, std::span<const std::uint8_t> payload);
/// Reads every frame of a stream. Throws DecodeError on a truncated record.
std::vector<Bytes> read_frames(std::istream& in);

}  // namespace sfb
