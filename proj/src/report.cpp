#include <fmt/format.h>

#include <fstream>
#include <ostream>

#include "sfb/error.hpp"
#include "sfb/harness.hpp"

namespace sfb {

void write_report_csv(std::ostream& out, std::span<const ReportRow> rows) {
  out << "iter,wall_ms,objective,comm_values,comm_bytes,max_disagreement\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{:.3f},{:.17g},{},{},{:.17g}\n", r.iter, r.wall_ms, r.objective, r.comm_values,
                       r.comm_bytes, r.max_disagreement);
  }
}

void save_report_csv(const std::filesystem::path& path, std::span<const ReportRow> rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write report " + path.string());
  write_report_csv(out, rows);
}

}  // namespace sfb
