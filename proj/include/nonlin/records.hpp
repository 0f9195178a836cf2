#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace nonlin::bench {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// One CSV row. NaN fields are written empty (error rows, envelope parts).
struct SweepRecord {
  std::string model;
  std::string variant;
  double alpha = kMissing;
  std::string measure;
  std::string weight;
  double value = kMissing;
  double bound = kMissing;
  double j_det = kMissing;
  double j_sto = kMissing;
  std::int64_t n_samples = 0;
  std::uint64_t seed = 0;
  std::string error;

  bool ok() const { return error.empty(); }
};

inline const char* kCsvHeader = "model,variant,alpha,measure,weight,value,bound,j_det,j_sto,n_samples,seed,error";

std::string format_double(double x);
std::string csv_row(const SweepRecord& r);

/// Metadata lines are written first, each prefixed with "# ".
void write_csv(std::ostream& out, const std::vector<SweepRecord>& records,
               const std::vector<std::string>& metadata = {});

/// Writes to a temporary file next to path and renames it into place.
void write_csv_file(const std::string& path, const std::vector<SweepRecord>& records,
                    const std::vector<std::string>& metadata = {});

std::vector<SweepRecord> read_csv(std::istream& in);
std::vector<SweepRecord> read_csv_file(const std::string& path);

}  // namespace nonlin::bench
