#pragma once

#include <string>
#include <utility>
#include <vector>

namespace sre {

// One metric observation; aggregate rows use subject_id "mean" / "sd".
struct ReportRow {
  std::string subject;
  std::string model;
  std::string method;
  std::string metric;
  double value = 0.0;
};

std::string format_value(double v);  // deterministic %.10g

class Report {
 public:
  void add(const std::string& subject, const std::string& model, const std::string& method,
           const std::string& metric, double value) {
    rows_.push_back({subject, model, method, metric, value});
  }
  const std::vector<ReportRow>& rows() const { return rows_; }

  void write_csv(const std::string& path) const;
  void write_jsonl(const std::string& path) const;

 private:
  std::vector<ReportRow> rows_;
};

void write_kv_file(const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>& entries);

}  // namespace sre
