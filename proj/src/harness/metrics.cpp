#include "hcctc/harness/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "hcctc/errors.hpp"

namespace hcctc::harness {
namespace {

double parse_number(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::stod(s);
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

MetricsWriter::MetricsWriter(const std::string& path, const std::map<std::string, std::string>& attributes)
    : path_(path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot write metrics: " + path);
  for (const auto& [k, v] : attributes) os << "# " << k << '=' << v << '\n';
  os << "epoch\tsplit\tlevel\tloss\twer\n";
}

void MetricsWriter::append(const MetricRow& row) {
  std::ofstream os(path_, std::ios::app);
  os << row.epoch << '\t' << row.split << '\t' << row.level << '\t' << format_number(row.loss) << '\t'
     << format_number(row.wer) << '\n';
  if (!os) throw FormatError("append failed: " + path_);
}

MetricsLog read_metrics(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open metrics: " + path);
  MetricsLog log;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) log.attributes[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::istringstream ls(line);
    MetricRow r;
    std::string loss, wer;
    if (!std::getline(ls, r.epoch, '\t') || !std::getline(ls, r.split, '\t') || !std::getline(ls, r.level, '\t') ||
        !std::getline(ls, loss, '\t') || !std::getline(ls, wer))
      throw FormatError(path + ": malformed metrics row '" + line + "'");
    r.loss = parse_number(loss);
    r.wer = parse_number(wer);
    log.rows.push_back(std::move(r));
  }
  return log;
}

}  // namespace hcctc::harness
