#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vrh {

inline constexpr std::string_view kHarnessVersion = "0.3.0";

// Error hierarchy. The CLI maps ConfigError to exit code 2 and DataError to 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// Raised when a numerical procedure cannot continue (NaN loss, singular input).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Neumaier compensated summation. Results are reproducible regardless of how
// the input is chunked, up to the last few ulps.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) {
    add(x);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double compensated_mean(const std::vector<double>& xs);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);

// Shortest round-trippable decimal form of a double ("0.125", "5", "1e-08").
std::string format_number(double v);

// Only [A-Za-z0-9._-] and no leading dot; these ids become path components.
bool is_safe_identifier(std::string_view id);

// Writes `content` to a sibling temp file and renames it over `path`, so
// readers see either the old or the new file. Creates parent directories.
void atomic_write(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace vrh
