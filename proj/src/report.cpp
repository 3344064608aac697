#include "report.hpp"

#include <numeric>

#include "soma/errors.hpp"

namespace soma::report {

std::string kind_name(SamplerKind kind) { return std::string(to_string(kind)); }

CsvTable trace_table(const ChainRecord& record) {
  std::vector<std::string> cols{"iteration"};
  if (!record.trace.empty()) {
    const State& s = record.trace.front();
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.width() == 1) {
        cols.push_back("x" + std::to_string(i));
      } else {
        for (std::size_t k = 0; k < s.width(); ++k) cols.push_back("x" + std::to_string(i) + "_" + std::to_string(k));
      }
    }
  }
  CsvTable t(std::move(cols));
  for (std::size_t r = 0; r < record.trace.size(); ++r) {
    t.cell(record.iterations[r]);
    for (double v : record.trace[r].flat()) t.cell(v);
  }
  return t;
}

CsvTable meeting_table() { return CsvTable({"replicate", "kind", "tau", "censored"}); }

void add_meetings(CsvTable& table, SamplerKind kind, const std::vector<MeetingSample>& samples) {
  for (std::size_t r = 0; r < samples.size(); ++r) {
    table.cell(r).cell(kind_name(kind)).cell(samples[r].tau).cell(samples[r].censored);
  }
}

Json rate_json(SamplerKind kind, const std::vector<MeetingSample>& samples, std::size_t t_max) {
  Json j;
  j["kind"] = kind_name(kind);
  std::size_t censored = 0;
  for (const auto& s : samples) censored += s.censored ? 1 : 0;
  try {
    const RateEstimate est = estimate_rate(samples, t_max);
    j["r_hat"] = est.r_hat;
    j["points_used"] = est.points_used;
  } catch (const EstimationError& e) {
    j["r_hat"] = nullptr;
    j["error"] = e.what();
  }
  j["n_replicates"] = samples.size();
  j["censored_count"] = censored;
  return j;
}

CsvTable tidy_table() { return CsvTable({"metric", "kind", "iteration", "value", "replicate"}); }

CsvTable theta_table(std::size_t p) {
  std::vector<std::string> cols{"iteration"};
  for (std::size_t k = 0; k <= p; ++k) cols.push_back("beta_" + std::to_string(k));
  cols.insert(cols.end(), {"sigma2", "replicate", "kind"});
  return CsvTable(std::move(cols));
}

void add_theta_rows(CsvTable& table, const std::vector<RegressionTheta>& theta, std::size_t thin,
                    std::size_t replicate, SamplerKind kind) {
  for (std::size_t t = 0; t < theta.size(); ++t) {
    if (t % thin != 0) continue;
    table.cell(t);
    for (double b : theta[t].beta) table.cell(b);
    table.cell(theta[t].sigma2).cell(replicate).cell(kind_name(kind));
  }
}

Json summary_header(const Json& config, std::uint64_t seed, double wall_seconds) {
  Json j;
  j["config"] = config;
  j["seed"] = seed;
  j["wall_seconds"] = wall_seconds;
  return j;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace soma::report
