#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ironia/detail/text.hpp"
#include "ironia/error.hpp"
#include "ironia/metrics.hpp"

namespace ironia {

struct ModelReport {
  std::string model;
  EvalReport report;
};

struct RenderedReport {
  std::string markdown;
  std::string csv;
};

/// One table row as it appears in both outputs.
struct ReportRow {
  std::string model;
  std::string category;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> accuracy;  // only on the aggregate row
};

inline std::vector<ReportRow> report_rows(const ModelReport& m) {
  std::vector<ReportRow> rows;
  for (const auto& c : m.report.table_rows()) {
    rows.push_back({m.model, std::string(display_name(c.label)), c.precision, c.recall, c.f1, std::nullopt});
  }
  const auto& a = m.report.aggregate;
  rows.push_back({m.model, std::string(aggregate_label(m.report.averaging)), a.precision, a.recall, a.f1,
                  m.report.accuracy});
  return rows;
}

inline constexpr std::string_view kReportCsvHeader = "model,category,precision,recall,f1,accuracy";

/// Markdown uses two decimals; the CSV carries the same cells at full
/// round-trip precision.
inline RenderedReport emit_report(const std::vector<ModelReport>& reports) {
  if (reports.empty()) throw Error(ErrorCode::EmptyReport, "nothing to report");
  RenderedReport out;
  out.csv = std::string(kReportCsvHeader) + "\n";
  for (const auto& m : reports) {
    out.markdown += "### " + m.model + "\n\n";
    out.markdown += "| Model | Category | Precision | Recall | F1 Score | Accuracy |\n";
    out.markdown += "|---|---|---|---|---|---|\n";
    for (const auto& r : report_rows(m)) {
      const std::string acc_md = r.accuracy ? detail::format_fixed(*r.accuracy, 2) : "";
      const std::string acc_csv = r.accuracy ? detail::format_exact(*r.accuracy) : "";
      out.markdown += "| " + r.model + " | " + r.category + " | " + detail::format_fixed(r.precision, 2) + " | " +
                      detail::format_fixed(r.recall, 2) + " | " + detail::format_fixed(r.f1, 2) + " | " + acc_md +
                      " |\n";
      out.csv += detail::csv_escape(r.model) + "," + detail::csv_escape(r.category) + "," +
                 detail::format_exact(r.precision) + "," + detail::format_exact(r.recall) + "," +
                 detail::format_exact(r.f1) + "," + acc_csv + "\n";
    }
    out.markdown += "\n";
  }
  return out;
}

inline std::vector<ReportRow> parse_report_csv(std::string_view csv) {
  auto rows = detail::parse_csv(csv);
  if (rows.empty() || rows[0].size() != 6) throw Error(ErrorCode::ParseError, "report CSV header missing");
  std::vector<ReportRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 6) throw Error(ErrorCode::ParseError, "report CSV row " + std::to_string(i) + " malformed");
    ReportRow row{r[0], r[1], std::strtod(r[2].c_str(), nullptr), std::strtod(r[3].c_str(), nullptr),
                  std::strtod(r[4].c_str(), nullptr), std::nullopt};
    if (!r[5].empty()) row.accuracy = std::strtod(r[5].c_str(), nullptr);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace ironia
