#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

namespace atp {

FlightErrorReport evaluate(const Flight& predicted, const Flight& truth, int warmup) {
  if (predicted.track.size() != truth.track.size())
    throw data_error("evaluate: predicted/truth length mismatch for flight " + truth.id);
  if (warmup < 0 || static_cast<std::size_t>(warmup) >= truth.track.size())
    throw data_error("evaluate: warm-up outside track for flight " + truth.id);
  FlightErrorReport r;
  r.id = truth.id;
  for (std::size_t i = static_cast<std::size_t>(warmup); i < truth.track.size(); ++i) {
    const auto& p = predicted.track[i];
    const auto& t = truth.track[i];
    r.phe_nmi.push_back(haversine_nm({p.lon, p.lat}, {t.lon, t.lat}));
    r.pve_ft.push_back(p.alt_ft - t.alt_ft);
  }
  if (r.phe_nmi.empty()) throw data_error("evaluate: empty predicted window");
  double sh = 0, sv = 0;
  for (double v : r.phe_nmi) sh += v;
  for (double v : r.pve_ft) sv += v;
  r.the_nmi = sh / static_cast<double>(r.phe_nmi.size());
  r.tve_ft = sv / static_cast<double>(r.pve_ft.size());
  return r;
}

CorpusErrorReport aggregate(const std::vector<FlightErrorReport>& reports) {
  if (reports.empty()) throw data_error("aggregate: no reports");
  CorpusErrorReport c;
  double sph = 0, spv = 0, sth = 0, stv = 0;
  for (const auto& r : reports) {
    for (double v : r.phe_nmi) sph += std::abs(v);
    for (double v : r.pve_ft) spv += std::abs(v);
    sth += std::abs(r.the_nmi);
    stv += std::abs(r.tve_ft);
    c.n_points += r.phe_nmi.size();
  }
  c.n_flights = reports.size();
  c.maphe_nmi = sph / static_cast<double>(c.n_points);
  c.mapve_ft = spv / static_cast<double>(c.n_points);
  c.mathe_nmi = sth / static_cast<double>(c.n_flights);
  c.matve_ft = stv / static_cast<double>(c.n_flights);
  return c;
}

void write_report_csv(const std::string& path, const std::vector<FlightErrorReport>& reports,
                      const CorpusErrorReport& corpus) {
  std::ofstream f(path);
  if (!f) throw data_error("metrics: cannot write " + path);
  f << "flight_id,n_points,the_nmi,tve_ft,maphe_nmi,mapve_ft,mathe_nmi,matve_ft\n";
  f.precision(10);
  for (const auto& r : reports)
    f << r.id << "," << r.phe_nmi.size() << "," << r.the_nmi << "," << r.tve_ft << ",,,,\n";
  f << "ALL," << corpus.n_points << ",,," << corpus.maphe_nmi << "," << corpus.mapve_ft << ","
    << corpus.mathe_nmi << "," << corpus.matve_ft << "\n";
}

void write_summary_json(const std::string& path, const CorpusErrorReport& corpus) {
  nlohmann::json j{{"maphe_nmi", corpus.maphe_nmi}, {"mapve_ft", corpus.mapve_ft},
                   {"mathe_nmi", corpus.mathe_nmi}, {"matve_ft", corpus.matve_ft},
                   {"n_flights", corpus.n_flights}, {"n_points", corpus.n_points}};
  std::ofstream f(path);
  if (!f) throw data_error("metrics: cannot write " + path);
  f << j.dump(1) << "\n";
}

namespace {

void histogram_rows(std::ofstream& f, const std::string& name, const std::vector<double>& values,
                    int bins) {
  if (values.empty()) return;
  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  if (hi <= lo) hi = lo + 1.0;
  double width = (hi - lo) / bins;
  std::vector<int> count(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    int b = std::min(bins - 1, static_cast<int>((v - lo) / width));
    count[static_cast<std::size_t>(b)]++;
  }
  for (int b = 0; b < bins; ++b)
    f << name << "," << (lo + b * width) << "," << (lo + (b + 1) * width) << ","
      << count[static_cast<std::size_t>(b)] << "\n";
}

}  // namespace

void write_histograms_csv(const std::string& path, const std::vector<FlightErrorReport>& reports,
                          int bins) {
  std::ofstream f(path);
  if (!f) throw data_error("metrics: cannot write " + path);
  f.precision(10);
  f << "metric,bin_left,bin_right,count\n";
  std::vector<double> phe, pve, the, tve;
  for (const auto& r : reports) {
    phe.insert(phe.end(), r.phe_nmi.begin(), r.phe_nmi.end());
    pve.insert(pve.end(), r.pve_ft.begin(), r.pve_ft.end());
    the.push_back(r.the_nmi);
    tve.push_back(r.tve_ft);
  }
  histogram_rows(f, "phe_nmi", phe, bins);
  histogram_rows(f, "pve_ft", pve, bins);
  histogram_rows(f, "the_nmi", the, bins);
  histogram_rows(f, "tve_ft", tve, bins);
}

}  // namespace atp
