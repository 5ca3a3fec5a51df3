#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "sfb/error.hpp"
#include "sfb/harness.hpp"

namespace sfb {

std::filesystem::path batch_log_path(const std::filesystem::path& dir, WorkerId p) {
  return dir / ("worker_" + std::to_string(p) + ".sflog");
}

void append_batch_record(std::ostream& out, const SFMessage& record) { write_frame(out, encode(record)); }

void write_batch_log(const std::filesystem::path& path, std::span<const SFMessage> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write batch log " + path.string());
  for (const auto& r : records) append_batch_record(out, r);
}

std::vector<SFMessage> read_batch_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read batch log " + path.string());
  std::vector<SFMessage> out;
  for (const auto& frame : read_frames(in)) out.push_back(decode(frame));
  return out;
}

std::vector<std::vector<SFMessage>> read_batch_logs(const std::filesystem::path& dir, std::size_t workers) {
  std::vector<std::vector<SFMessage>> logs;
  for (std::size_t p = 0; p < workers; ++p) logs.push_back(read_batch_log(batch_log_path(dir, static_cast<WorkerId>(p))));
  return logs;
}

AuxiliaryReport reconstruct_auxiliary(std::span<const std::vector<SFMessage>> logs, const ParamMatrix& initial,
                                      bool keep_sequence) {
  const std::size_t P = logs.size();
  const auto rows = initial.rows();
  const auto cols = initial.cols();

  // own[q][k-1] is q's batch with clock k.
  std::vector<std::vector<SFBatch>> own(P);
  std::vector<std::vector<double>> norms(P);
  for (std::size_t q = 0; q < P; ++q) {
    for (const auto& m : logs[q]) {
      if (m.sender != q) continue;
      if (m.clock != own[q].size() + 1) {
        throw std::invalid_argument("incomplete log: worker " + std::to_string(q) + " own record with clock " +
                                    std::to_string(m.clock) + " follows clock " + std::to_string(own[q].size()));
      }
      own[q].push_back(to_batch(m));
      norms[q].push_back(materialize_update(own[q].back(), rows, cols).frobenius_norm());
    }
  }
  std::size_t C = 0;
  for (const auto& o : own) C = std::max(C, o.size());

  AuxiliaryReport report;
  report.sequence.reserve(C + 1);
  report.sequence.push_back(initial);
  for (std::size_t c = 1; c <= C; ++c) {
    auto next = report.sequence.back();
    for (std::size_t q = 0; q < P; ++q) {
      if (own[q].size() >= c) apply_sf_batch(next, own[q][c - 1]);
    }
    report.sequence.push_back(std::move(next));
  }
  report.max_by_iter.assign(C, std::numeric_limits<double>::quiet_NaN());

  for (std::size_t p = 0; p < P; ++p) {
    ParamMatrix wp = initial;
    std::vector<std::uint64_t> have(P, 0);
    for (const auto& m : logs[p]) {
      const auto q = m.sender;
      if (q >= P) throw std::invalid_argument("incomplete log: unknown sender " + std::to_string(q));
      if (q != p) {
        if (m.clock != have[q] + 1 || m.clock > own[q].size()) {
          throw std::invalid_argument("incomplete log: worker " + std::to_string(p) + " holds clock " +
                                      std::to_string(m.clock) + " from worker " + std::to_string(q) +
                                      " out of sequence or missing from its own log");
        }
        apply_sf_batch(wp, own[q][m.clock - 1]);
        have[q] = m.clock;
        continue;
      }
      const auto c = m.clock - 1;
      AuxiliaryPoint pt;
      pt.worker = static_cast<WorkerId>(p);
      pt.iter = c;
      pt.disagreement = frobenius_distance(report.sequence[c], wp);
      for (std::size_t r = 0; r < P; ++r) {
        const std::uint64_t in_aux = std::min<std::uint64_t>(c, own[r].size());
        const std::uint64_t in_local = r == p ? c : std::min<std::uint64_t>(have[r], in_aux);
        for (std::uint64_t k = in_local; k < in_aux; ++k) {
          ++pt.pending;
          pt.pending_norm_sum += norms[r][k];
        }
      }
      auto& slot = report.max_by_iter[c];
      slot = std::isnan(slot) ? pt.disagreement : std::max(slot, pt.disagreement);
      report.points.push_back(pt);
      apply_sf_batch(wp, own[p][c]);
      have[p] = m.clock;
    }
  }
  if (!keep_sequence) report.sequence.clear();
  return report;
}

}  // namespace sfb
