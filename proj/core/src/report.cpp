#include <cstdio>
#include <set>
#include <sstream>

#include "gazeauth/error.hpp"
#include "gazeauth/harness.hpp"

namespace gazeauth {

ReportFormat parse_report_format(std::string_view text) {
  if (text == "csv") return ReportFormat::Csv;
  if (text == "markdown" || text == "md") return ReportFormat::Markdown;
  throw ValidationError("unknown report format '" + std::string(text) + "'");
}

namespace {

std::string pct2(double fraction) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", fraction * 100.0);
  return buf;
}

}  // namespace

std::string render_report(const std::vector<ExperimentResult>& results, ReportFormat format) {
  if (results.empty()) throw ValidationError("report: no results");
  std::set<std::string> ids;
  for (const auto& r : results) {
    if (!ids.insert(r.exp_id).second) throw ValidationError("report: duplicate exp_id '" + r.exp_id + "'");
  }
  std::ostringstream out;
  if (format == ReportFormat::Csv) {
    out << "exp_id,eer_mean_pct,eer_sd_pct,frr_mean_pct,frr_sd_pct,unresolved_far\n";
    for (const auto& r : results) {
      out << r.exp_id << ',' << format_real(r.eer_mean * 100.0) << ',' << format_real(r.eer_sd * 100.0) << ','
          << format_real(r.frr_mean * 100.0) << ',' << format_real(r.frr_sd * 100.0) << ','
          << (r.unresolved_far ? 1 : 0) << '\n';
    }
  } else {
    out << "| Experiment | EER (%) | FRR@FAR (%) |\n";
    out << "|---|---|---|\n";
    for (const auto& r : results) {
      out << "| " << r.exp_id << " | " << pct2(r.eer_mean) << " (" << pct2(r.eer_sd) << ") | "
          << pct2(r.frr_mean) << " (" << pct2(r.frr_sd) << ")" << (r.unresolved_far ? "*" : "") << " |\n";
    }
    bool any_unresolved = false;
    for (const auto& r : results) any_unresolved = any_unresolved || r.unresolved_far;
    if (any_unresolved) out << "\n\\* target FAR below the resolvable minimum; FRR taken at FAR 0.\n";
  }
  return out.str();
}

}  // namespace gazeauth
