#ifndef ATP_METRICS_HPP
#define ATP_METRICS_HPP

#include <string>
#include <vector>

#include "core/preprocess.hpp"

namespace atp {

// Point-wise errors over the predicted window of one flight. PHE is unsigned
// (nautical miles), PVE signed (feet). THE/TVE are the per-flight means; TVE
// keeps the sign, absolute values are taken only at corpus aggregation.
struct FlightErrorReport {
  std::string id;
  std::vector<double> phe_nmi;
  std::vector<double> pve_ft;
  double the_nmi = 0.0;
  double tve_ft = 0.0;
};

struct CorpusErrorReport {
  double maphe_nmi = 0.0;
  double mapve_ft = 0.0;
  double mathe_nmi = 0.0;
  double matve_ft = 0.0;
  std::size_t n_flights = 0;
  std::size_t n_points = 0;
};

// Predicted and truth tracks aligned by timestamp index over t >= warmup.
FlightErrorReport evaluate(const Flight& predicted, const Flight& truth, int warmup);

CorpusErrorReport aggregate(const std::vector<FlightErrorReport>& reports);

void write_report_csv(const std::string& path, const std::vector<FlightErrorReport>& reports,
                      const CorpusErrorReport& corpus);
void write_summary_json(const std::string& path, const CorpusErrorReport& corpus);
// Fixed-width histogram bin counts per error kind, for external plotting.
void write_histograms_csv(const std::string& path, const std::vector<FlightErrorReport>& reports,
                          int bins = 20);

}  // namespace atp

#endif
