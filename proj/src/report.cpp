#include <charconv>
#include <cstdio>
#include <sstream>

#include "tfw/error.hpp"
#include "tfw/runner.hpp"
#include "tfw/text.hpp"

namespace tfw {

using nlohmann::json;

namespace {

constexpr std::size_t kLabelWidth = 12;
constexpr std::size_t kValueWidth = 8;
constexpr std::size_t kGroupGap = 2;
constexpr std::size_t kDatasetsPerBlock = 3;

std::string percent(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.2f", value);
  return buffer;
}

std::string shortest(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, result.ptr);
}

std::string pad_right(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() < width ? std::string(width - s.size(), ' ') + s : s;
}

std::string center(const std::string& s, std::size_t width) {
  if (s.size() >= width) return s;
  const std::size_t left = (width - s.size()) / 2;
  return std::string(left, ' ') + s + std::string(width - s.size() - left, ' ');
}

std::string rstrip(std::string s) {
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

double parse_double(const std::string& field) {
  double value = 0.0;
  const auto result = std::from_chars(field.data(), field.data() + field.size(), value);
  if (result.ec != std::errc() || result.ptr != field.data() + field.size()) {
    throw ParseError("report csv: bad number '" + field + "'");
  }
  return value;
}

std::string emit_table(const RunReport& report) {
  const std::size_t group_width = 3 * kValueWidth;
  std::ostringstream out;
  if (report.datasets.empty()) {
    out << "Accuracy\n";
    return out.str();
  }
  for (std::size_t begin = 0; begin < report.datasets.size(); begin += kDatasetsPerBlock) {
    const std::size_t end = std::min(begin + kDatasetsPerBlock, report.datasets.size());
    if (begin) out << '\n';

    std::string names = std::string(kLabelWidth, ' ');
    std::string metrics = pad_right("Accuracy", kLabelWidth);
    for (std::size_t d = begin; d < end; ++d) {
      names += std::string(kGroupGap, ' ') + center(report.datasets[d], group_width);
      metrics += std::string(kGroupGap, ' ') + pad_left("TC", kValueWidth) + pad_left("LS", kValueWidth) +
                 pad_left("Total", kValueWidth);
    }
    out << rstrip(names) << '\n' << rstrip(metrics) << '\n';
    if (report.cells.empty()) continue;

    for (auto strategy : report.strategies) {
      std::string row = pad_right(std::string(display_name(strategy)), kLabelWidth);
      for (std::size_t d = begin; d < end; ++d) {
        row += std::string(kGroupGap, ' ');
        const ReportCell* cell = report.find(report.datasets[d], strategy);
        if (!cell) {
          row += pad_left("-", kValueWidth) + pad_left("-", kValueWidth) + pad_left("-", kValueWidth);
          continue;
        }
        row += pad_left(percent(cell->score.tc), kValueWidth);
        if (cell->pairs_scored()) {
          row += pad_left(percent(cell->score.ls), kValueWidth) + pad_left(percent(cell->score.total), kValueWidth);
        } else {
          row += pad_left("-", kValueWidth) + pad_left("-", kValueWidth);
        }
      }
      out << rstrip(row) << '\n';
    }
  }

  bool header_written = false;
  for (const auto& cell : report.cells) {
    if (!cell.failures) continue;
    if (!header_written) {
      out << "\nFailed requests (scored 0):\n";
      header_written = true;
    }
    out << "  " << cell.dataset << " / " << display_name(cell.strategy) << ": " << cell.failures << '\n';
  }
  return out.str();
}

std::string emit_csv(const RunReport& report) {
  std::ostringstream out;
  out << "dataset,strategy,tc,ls,total,n_samples,n_runs\n";
  for (const auto& cell : report.cells) {
    out << csv_field(cell.dataset) << ',' << csv_field(std::string(display_name(cell.strategy))) << ','
        << shortest(cell.score.tc) << ',' << (cell.pairs_scored() ? shortest(cell.score.ls) : "-") << ','
        << (cell.pairs_scored() ? shortest(cell.score.total) : "-") << ',' << cell.score.n_samples << ','
        << cell.score.n_runs << '\n';
  }
  return out.str();
}

std::string emit_json(const RunReport& report) {
  json cells = json::array();
  for (const auto& cell : report.cells) {
    cells.push_back({{"dataset", cell.dataset},
                     {"task", to_string(cell.task)},
                     {"strategy", to_string(cell.strategy)},
                     {"tc", cell.score.tc},
                     {"ls", cell.pairs_scored() ? json(cell.score.ls) : json()},
                     {"total", cell.pairs_scored() ? json(cell.score.total) : json()},
                     {"n_samples", cell.score.n_samples},
                     {"n_runs", cell.score.n_runs},
                     {"failures", cell.failures}});
  }
  json strategies = json::array();
  for (auto strategy : report.strategies) strategies.push_back(to_string(strategy));
  const json document = {
      {"datasets", report.datasets}, {"strategies", strategies}, {"cells", cells}, {"provenance", report.provenance}};
  return document.dump(2) + "\n";
}

}  // namespace

ReportFormat parse_report_format(std::string_view name) {
  if (text::iequals(name, "table")) return ReportFormat::kTable;
  if (text::iequals(name, "csv")) return ReportFormat::kCsv;
  if (text::iequals(name, "json")) return ReportFormat::kJson;
  throw ConfigError("unknown report format '" + std::string(name) + "'");
}

std::string emit_report(const RunReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::kTable:
      return emit_table(report);
    case ReportFormat::kCsv:
      return emit_csv(report);
    case ReportFormat::kJson:
      return emit_json(report);
  }
  return {};
}

std::vector<CsvRow> parse_report_csv(std::string_view csv) {
  std::vector<CsvRow> rows;
  std::istringstream in{std::string(csv)};
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto fields = split_csv_line(line);
    if (fields.size() != 7) throw ParseError("report csv: expected 7 fields");
    CsvRow row;
    row.dataset = fields[0];
    row.strategy = fields[1];
    row.tc = parse_double(fields[2]);
    if (fields[3] != "-") row.ls = parse_double(fields[3]);
    if (fields[4] != "-") row.total = parse_double(fields[4]);
    row.n_samples = static_cast<std::size_t>(std::stoull(fields[5]));
    row.n_runs = static_cast<std::size_t>(std::stoull(fields[6]));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace tfw
