#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "sfb/models.hpp"

namespace sfb {

/// LIBSVM-style text, one sample per line: `<label> <idx>:<val> ...` with
/// 0-based indices. The label is a class id for MLR / L2-MLR, a flag in
/// {1, -1} (similar / dissimilar) for DML, and ignored for SC. Blank lines and
/// lines starting with '#' are skipped.
std::vector<Sample> read_dataset(std::istream& in, ModelKind kind, std::size_t feature_dim);
std::vector<Sample> load_dataset(const std::filesystem::path& path, ModelKind kind,
                                 std::size_t feature_dim);

/// Writes only stored nonzero entries, values printed round-trip exact.
void write_dataset(std::ostream& out, std::span<const Sample> data);
void save_dataset(const std::filesystem::path& path, std::span<const Sample> data);

/// Round-robin by index: sample i goes to worker i mod P.
std::vector<std::vector<Sample>> shard_round_robin(std::span<const Sample> data, std::size_t workers);

}  // namespace sfb
