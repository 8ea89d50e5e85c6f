#include "twintest/stats.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "twintest/error.hpp"
#include "twintest/telemetry.hpp"

namespace twintest {

ErrorHistogram::ErrorHistogram(double bin_width, double origin) : width_(bin_width), origin_(origin) {
  if (!(bin_width > 0.0) || !std::isfinite(bin_width) || !std::isfinite(origin)) {
    throw Error(ErrorCode::kInvalidParameter, "bin width must be positive and origin finite");
  }
}

std::int64_t ErrorHistogram::bin_index(double value) const {
  return static_cast<std::int64_t>(std::floor((value - origin_) / width_));
}

void ErrorHistogram::record(double error) {
  if (!std::isfinite(error)) throw Error(ErrorCode::kNonFiniteValue, "cannot record a non-finite error");
  ++counts_[bin_index(error)];
  ++total_;
  const double delta = error - mean_;
  mean_ += delta / static_cast<double>(total_);
  m2_ += delta * (error - mean_);
  min_ = std::min(min_, error);
  max_ = std::max(max_, error);
}

void ErrorHistogram::merge(const ErrorHistogram& other) {
  if (other.width_ != width_ || other.origin_ != origin_) {
    throw Error(ErrorCode::kIncompatibleBinning, "histograms use different binning");
  }
  if (other.total_ == 0) return;
  for (const auto& [idx, n] : other.counts_) counts_[idx] += n;
  if (total_ == 0) {
    mean_ = other.mean_;
    m2_ = other.m2_;
  } else {
    const double na = static_cast<double>(total_);
    const double nb = static_cast<double>(other.total_);
    const double n = na + nb;
    const double delta = other.mean_ - mean_;
    mean_ += delta * nb / n;
    m2_ += other.m2_ + delta * delta * na * nb / n;
  }
  total_ += other.total_;
  min_ = std::min(min_, other.min_);
  max_ = std::max(max_, other.max_);
}

void ErrorHistogram::require_samples() const {
  if (total_ == 0) throw Error(ErrorCode::kEmptyHistogram, "histogram is empty");
}

double ErrorHistogram::variance() const {
  return total_ == 0 ? 0.0 : m2_ / static_cast<double>(total_);
}

double ErrorHistogram::stddev() const { return std::sqrt(variance()); }

std::vector<std::pair<double, double>> ErrorHistogram::pdf() const {
  require_samples();
  std::vector<std::pair<double, double>> out;
  const std::int64_t lo = counts_.begin()->first;
  const std::int64_t hi = counts_.rbegin()->first;
  const double norm = 1.0 / (static_cast<double>(total_) * width_);
  for (std::int64_t i = lo; i <= hi; ++i) {
    auto it = counts_.find(i);
    const double n = it == counts_.end() ? 0.0 : static_cast<double>(it->second);
    out.emplace_back(bin_left(i) + width_ / 2.0, n * norm);
  }
  return out;
}

double ErrorHistogram::mass_below(double x) const {
  double mass = 0.0;
  for (const auto& [idx, n] : counts_) {
    const double left = bin_left(idx);
    const double right = bin_left(idx + 1);
    if (x >= right) {
      mass += static_cast<double>(n);
    } else if (x > left) {
      mass += static_cast<double>(n) * (x - left) / width_;
    } else {
      break;
    }
  }
  return mass;
}

double ErrorHistogram::cdf_at(double x) const {
  require_samples();
  if (x == std::numeric_limits<double>::infinity()) return 1.0;
  return std::clamp(mass_below(x) / static_cast<double>(total_), 0.0, 1.0);
}

double ErrorHistogram::prob_between(double a, double b) const {
  require_samples();
  if (a > b) throw Error(ErrorCode::kReversedInterval, "interval bounds are reversed");
  return std::clamp((mass_below(b) - mass_below(a)) / static_cast<double>(total_), 0.0, 1.0);
}

double ErrorHistogram::quantile(double q) const {
  require_samples();
  const double target = std::clamp(q, 0.0, 1.0) * static_cast<double>(total_);
  double cum = 0.0;
  for (const auto& [idx, n] : counts_) {
    const double c = static_cast<double>(n);
    if (cum + c >= target) {
      return bin_left(idx) + (target - cum) / c * width_;
    }
    cum += c;
  }
  return bin_left(counts_.rbegin()->first + 1);
}

double VerdictStats::Field::pass_rate() const {
  const auto n = passed + failed;
  return n == 0 ? 0.0 : static_cast<double>(passed) / static_cast<double>(n);
}

VerdictStats::VerdictStats(double temp_bin_width, double position_bin_width)
    : temp_width_(temp_bin_width), position_width_(position_bin_width) {}

VerdictStats::Field& VerdictStats::field(const std::string& name) {
  auto it = fields_.find(name);
  if (it == fields_.end()) {
    const double w = name == kPositionField ? position_width_ : temp_width_;
    it = fields_.emplace(name, Field{ErrorHistogram(w), 0, 0}).first;
  }
  return it->second;
}

void VerdictStats::add(const Verdict& v) {
  if (v.skipped) {
    ++skipped_;
    return;
  }
  (v.passed ? passed_ : failed_) += 1;
  auto tally = [&](const std::string& name, double err) {
    auto& f = field(name);
    f.histogram.record(err);
    const bool failing =
        std::find(v.failing_fields.begin(), v.failing_fields.end(), name) != v.failing_fields.end();
    (failing ? f.failed : f.passed) += 1;
  };
  tally(std::string(kPositionField), v.position_error);
  for (const auto& [id, err] : v.sensor_errors) tally(sensor_field(id), err);
}

void VerdictStats::merge(const VerdictStats& other) {
  for (const auto& [name, f] : other.fields_) {
    auto& mine = field(name);
    mine.histogram.merge(f.histogram);
    mine.passed += f.passed;
    mine.failed += f.failed;
  }
  passed_ += other.passed_;
  failed_ += other.failed_;
  skipped_ += other.skipped_;
}

double VerdictStats::pass_rate() const {
  const auto n = passed_ + failed_;
  return n == 0 ? 0.0 : static_cast<double>(passed_) / static_cast<double>(n);
}

void write_histogram_csv(std::ostream& out, const ErrorHistogram& h) {
  out << "bin_left,bin_right,count,pdf,cdf\n";
  if (h.total() == 0) return;
  const auto density = h.pdf();
  std::int64_t idx = h.counts().begin()->first;
  for (const auto& [center, d] : density) {
    auto it = h.counts().find(idx);
    const std::uint64_t n = it == h.counts().end() ? 0 : it->second;
    const double left = h.bin_left(idx);
    const double right = h.bin_left(idx + 1);
    out << format_number(left) << ',' << format_number(right) << ',' << n << ',' << format_number(d)
        << ',' << format_number(h.cdf_at(right)) << '\n';
    ++idx;
  }
}

std::string summary_json(const VerdictStats& stats) {
  nlohmann::ordered_json j;
  j["passed"] = stats.passed();
  j["failed"] = stats.failed();
  j["skipped"] = stats.skipped();
  j["pass_rate"] = stats.pass_rate();
  nlohmann::ordered_json fields = nlohmann::ordered_json::object();
  for (const auto& [name, f] : stats.fields()) {
    const auto& h = f.histogram;
    nlohmann::ordered_json o;
    o["count"] = h.total();
    o["mean"] = h.mean();
    o["std"] = h.stddev();
    o["min"] = h.min();
    o["max"] = h.max();
    o["q05"] = h.quantile(0.05);
    o["q50"] = h.quantile(0.50);
    o["q95"] = h.quantile(0.95);
    o["passed"] = f.passed;
    o["failed"] = f.failed;
    o["pass_rate"] = f.pass_rate();
    if (name != kPositionField) o["p_between_m4_5"] = h.prob_between(-4.0, 5.0);
    fields[name] = std::move(o);
  }
  j["fields"] = std::move(fields);
  return j.dump(2);
}

}  // namespace twintest
