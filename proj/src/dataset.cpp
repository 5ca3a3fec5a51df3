#include "sfb/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include "sfb/error.hpp"

namespace sfb {

namespace {

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
  throw std::runtime_error("dataset line " + std::to_string(line_no) + ": " + what);
}

Label parse_label(const std::string& tok, ModelKind kind, std::size_t line_no) {
  switch (kind) {
    case ModelKind::kMlr:
    case ModelKind::kL2Mlr: {
      std::uint32_t y = 0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), y);
      if (ec != std::errc() || p != tok.data() + tok.size()) parse_fail(line_no, "bad class label '" + tok + "'");
      return ClassLabel{y};
    }
    case ModelKind::kDml:
      if (tok == "1" || tok == "+1") return Similarity::kSimilar;
      if (tok == "-1") return Similarity::kDissimilar;
      parse_fail(line_no, "DML flag must be 1 or -1, got '" + tok + "'");
    case ModelKind::kSc:
      return std::monostate{};
  }
  return std::monostate{};
}

}  // namespace

std::vector<Sample> read_dataset(std::istream& in, ModelKind kind, std::size_t feature_dim) {
  std::vector<Sample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    Label label = parse_label(tok, kind, line_no);
    std::vector<std::uint32_t> idx;
    std::vector<double> val;
    while (ls >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) parse_fail(line_no, "expected idx:val, got '" + tok + "'");
      std::uint32_t i = 0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + colon, i);
      if (ec != std::errc() || p != tok.data() + colon) parse_fail(line_no, "bad index in '" + tok + "'");
      if (i >= feature_dim) parse_fail(line_no, "index " + std::to_string(i) + " >= feature dim");
      if (!idx.empty() && i <= idx.back()) parse_fail(line_no, "indices must be strictly increasing");
      double v = 0.0;
      try {
        v = std::stod(tok.substr(colon + 1));
      } catch (const std::exception&) {
        parse_fail(line_no, "bad value in '" + tok + "'");
      }
      idx.push_back(i);
      val.push_back(v);
    }
    out.push_back({Vec64::sparse(feature_dim, std::move(idx), std::move(val)), label});
  }
  return out;
}

std::vector<Sample> load_dataset(const std::filesystem::path& path, ModelKind kind,
                                 std::size_t feature_dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  return read_dataset(in, kind, feature_dim);
}

void write_dataset(std::ostream& out, std::span<const Sample> data) {
  char buf[64];
  for (const auto& s : data) {
    if (const auto* y = std::get_if<ClassLabel>(&s.label)) {
      out << y->id;
    } else if (const auto* f = std::get_if<Similarity>(&s.label)) {
      out << (*f == Similarity::kSimilar ? "1" : "-1");
    } else {
      out << '0';
    }
    s.features.for_each_stored([&](std::size_t i, double v) {
      if (v == 0.0) return;
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out << ' ' << i << ':' << std::string_view(buf, static_cast<std::size_t>(p - buf));
    });
    out << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, std::span<const Sample> data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset " + path.string());
  write_dataset(out, data);
}

std::vector<std::vector<Sample>> shard_round_robin(std::span<const Sample> data, std::size_t workers) {
  if (workers == 0) throw ConfigError("need at least one worker");
  std::vector<std::vector<Sample>> shards(workers);
  for (std::size_t i = 0; i < data.size(); ++i) shards[i % workers].push_back(data[i]);
  return shards;
}

}  // namespace sfb
