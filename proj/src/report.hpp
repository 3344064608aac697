#pragma once

// Table and summary builders shared by the subcommands and the recipes.

#include <chrono>
#include <string>
#include <vector>

#include "soma/config.hpp"
#include "soma/coupling.hpp"
#include "soma/damcmc.hpp"
#include "soma/io.hpp"
#include "soma/samplers.hpp"

namespace soma::report {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string kind_name(SamplerKind kind);

CsvTable trace_table(const ChainRecord& record);

CsvTable meeting_table();
void add_meetings(CsvTable& table, SamplerKind kind, const std::vector<MeetingSample>& samples);

/// {kind, r_hat, n_replicates, censored_count}; r_hat is null with an "error"
/// entry when the estimate is unavailable.
Json rate_json(SamplerKind kind, const std::vector<MeetingSample>& samples, std::size_t t_max);

/// Tidy diagnostics: metric, kind, iteration, value, replicate.
CsvTable tidy_table();

CsvTable theta_table(std::size_t p);
void add_theta_rows(CsvTable& table, const std::vector<RegressionTheta>& theta, std::size_t thin,
                    std::size_t replicate, SamplerKind kind);

/// Embeds the audit trail every summary carries.
Json summary_header(const Json& config, std::uint64_t seed, double wall_seconds);

std::string dump(const Json& j);

double mean_of(const std::vector<double>& v);

}  // namespace soma::report
