#ifndef HCCTC_HARNESS_METRICS_HPP_
#define HCCTC_HARNESS_METRICS_HPP_

#include <map>
#include <string>
#include <vector>

namespace hcctc::harness {

/// One line of the metrics stream. `level` is a 1-based level number or
/// "total"; `wer` is NaN where no decode was run.
struct MetricRow {
  std::string epoch;
  std::string split;
  std::string level;
  double loss = 0.0;
  double wer = 0.0;

  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

/// Append-only tab-separated stream. The header comment lines carry run
/// attributes (objective, conditioning, seed, ...).
class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, const std::map<std::string, std::string>& attributes);
  void append(const MetricRow& row);

 private:
  std::string path_;
};

struct MetricsLog {
  std::map<std::string, std::string> attributes;
  std::vector<MetricRow> rows;
};

MetricsLog read_metrics(const std::string& path);

/// Round-trippable decimal rendering (nan/inf spelled out).
std::string format_number(double v);

}  // namespace hcctc::harness

#endif  // HCCTC_HARNESS_METRICS_HPP_
