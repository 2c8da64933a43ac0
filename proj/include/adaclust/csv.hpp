#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "adaclust/datagen.hpp"
#include "adaclust/error.hpp"

namespace adaclust {

/// 17 significant digits: parses back to the identical double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(const std::string& s) {
  std::istringstream in(s);
  in.imbue(std::locale::classic());
  double v = 0.0;
  in >> v;
  detail::require(!in.fail() && in.eof(), ErrorCode::invalid_argument, "not a number: '" + s + "'");
  return v;
}

inline long long parse_integer(const std::string& s) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  detail::require(ec == std::errc{} && ptr == s.data() + s.size(), ErrorCode::invalid_argument,
                  "not an integer: '" + s + "'");
  return v;
}

/// Header x0,...,x{d-1},label[,domain]; one row per sample in generation order.
inline void write_dataset_csv(std::ostream& out, const AggregatedDataset& data, bool with_domains) {
  for (std::size_t j = 0; j < data.dim(); ++j) out << 'x' << j << ',';
  out << "label";
  if (with_domains) out << ",domain";
  out << '\n';
  std::span<const std::int64_t> domains;
  if (with_domains) domains = data.evaluator_domains();
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.features().row(i)) out << format_double(v) << ',';
    out << data.labels()[i];
    if (with_domains) out << ',' << domains[i];
    out << '\n';
  }
}

inline void write_dataset_csv(const std::string& path, const AggregatedDataset& data, bool with_domains) {
  std::ofstream out(path, std::ios::binary);
  detail::require(static_cast<bool>(out), ErrorCode::io, "cannot open '" + path + "' for writing");
  write_dataset_csv(out, data, with_domains);
  detail::require(static_cast<bool>(out), ErrorCode::io, "write failed for '" + path + "'");
}

inline AggregatedDataset read_dataset_csv(std::istream& in) {
  std::string line;
  detail::require(static_cast<bool>(std::getline(in, line)), ErrorCode::invalid_argument, "empty dataset file");
  const auto header = split_csv_line(line);
  std::size_t d = 0;
  while (d < header.size() && header[d] == "x" + std::to_string(d)) ++d;
  detail::require(d >= 1 && d < header.size() && header[d] == "label", ErrorCode::invalid_argument,
                  "dataset header must be x0,...,label[,domain]");
  const bool with_domains = header.size() == d + 2 && header[d + 1] == "domain";
  detail::require(header.size() == d + 1 || with_domains, ErrorCode::invalid_argument, "unexpected header columns");

  Matrix features(0, 0);
  std::vector<int> labels;
  std::vector<std::int64_t> domains;
  Vector row(d);
  int max_label = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    detail::require(cells.size() == header.size(), ErrorCode::invalid_argument, "ragged dataset row");
    for (std::size_t j = 0; j < d; ++j) row[j] = parse_double(cells[j]);
    features.append_row(row);
    const int label = static_cast<int>(parse_integer(cells[d]));
    detail::require(label >= 0, ErrorCode::invalid_argument, "negative label");
    max_label = std::max(max_label, label);
    labels.push_back(label);
    if (with_domains) domains.push_back(parse_integer(cells[d + 1]));
  }
  detail::require(!labels.empty(), ErrorCode::invalid_argument, "dataset has no rows");
  std::optional<std::vector<std::int64_t>> dom;
  if (with_domains) dom = std::move(domains);
  return AggregatedDataset(std::move(features), std::move(labels), std::move(dom), max_label + 1);
}

inline AggregatedDataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  detail::require(static_cast<bool>(in), ErrorCode::io, "cannot open dataset '" + path + "'");
  return read_dataset_csv(in);
}

}  // namespace adaclust
