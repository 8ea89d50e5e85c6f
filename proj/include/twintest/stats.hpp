#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "twintest/verdict.hpp"

namespace twintest {

/// Fixed-width, sparsely stored histogram of one error field with running
/// moments. The density it describes is uniform inside each bin, so the CDF
/// is piecewise linear and continuous.
class ErrorHistogram {
 public:
  explicit ErrorHistogram(double bin_width = 0.5, double origin = 0.0);

  void record(double error);
  /// Throws kIncompatibleBinning unless widths and origins are identical.
  void merge(const ErrorHistogram& other);

  std::int64_t bin_index(double value) const;
  double bin_left(std::int64_t index) const { return origin_ + static_cast<double>(index) * width_; }

  /// (bin centre, density) for every bin from the lowest to the highest
  /// occupied one, empty bins included.
  std::vector<std::pair<double, double>> pdf() const;
  double cdf_at(double x) const;
  /// cdf_at(b) - cdf_at(a), computed from counts so it is exact on edges.
  double prob_between(double a, double b) const;
  double quantile(double q) const;

  double bin_width() const { return width_; }
  double origin() const { return origin_; }
  std::uint64_t total() const { return total_; }
  const std::map<std::int64_t, std::uint64_t>& counts() const { return counts_; }
  double mean() const { return mean_; }
  double variance() const;  // population variance
  double stddev() const;
  double min() const { return min_; }
  double max() const { return max_; }

 private:
  void require_samples() const;
  /// Number of samples (fractional inside a bin) lying below x.
  double mass_below(double x) const;

  double width_;
  double origin_;
  std::map<std::int64_t, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double min_ = std::numeric_limits<double>::infinity();
  double max_ = -std::numeric_limits<double>::infinity();
};

/// Per-field error distributions and pass counts fed from verdicts.
class VerdictStats {
 public:
  explicit VerdictStats(double temp_bin_width = 0.5, double position_bin_width = 0.1);

  void add(const Verdict& v);
  void merge(const VerdictStats& other);

  struct Field {
    ErrorHistogram histogram;
    std::uint64_t passed = 0;
    std::uint64_t failed = 0;
    double pass_rate() const;
  };

  const std::map<std::string, Field>& fields() const { return fields_; }
  std::uint64_t passed() const { return passed_; }
  std::uint64_t failed() const { return failed_; }
  std::uint64_t skipped() const { return skipped_; }
  double pass_rate() const;

 private:
  Field& field(const std::string& name);

  double temp_width_;
  double position_width_;
  std::map<std::string, Field> fields_;
  std::uint64_t passed_ = 0;
  std::uint64_t failed_ = 0;
  std::uint64_t skipped_ = 0;
};

/// CSV with header bin_left,bin_right,count,pdf,cdf.
void write_histogram_csv(std::ostream& out, const ErrorHistogram& h);

/// Summary object: overall counts plus, per field, count, mean, std, min,
/// max, q05, q50, q95, passed, failed, pass_rate and, for temperature
/// fields, p_between_m4_5 = prob_between(-4, 5).
std::string summary_json(const VerdictStats& stats);

}  // namespace twintest
