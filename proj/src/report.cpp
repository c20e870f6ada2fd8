#include "sre/report.hpp"

#include <cstdio>
#include <fstream>

#include "sre/imaging.hpp"

namespace sre {

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void Report::write_csv(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write report: " + path);
  f << "subject_id,model,method,metric,value\n";
  for (const auto& r : rows_)
    f << r.subject << "," << r.model << "," << r.method << "," << r.metric << ","
      << format_value(r.value) << "\n";
}

void Report::write_jsonl(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write report: " + path);
  for (const auto& r : rows_)
    f << "{\"subject\":\"" << r.subject << "\",\"model\":\"" << r.model << "\",\"method\":\""
      << r.method << "\",\"metric\":\"" << r.metric << "\",\"value\":" << format_value(r.value)
      << "}\n";
}

void write_kv_file(const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write file: " + path);
  for (const auto& [k, v] : entries) f << k << " = " << v << "\n";
}

}  // namespace sre
