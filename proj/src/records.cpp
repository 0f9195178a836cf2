#include "nonlin/records.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nonlin/errors.hpp"

namespace nonlin::bench {

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

double parse_double(const std::string& s) {
  if (s.empty()) return kMissing;
  std::size_t used = 0;
  const double x = std::stod(s, &used);
  if (used != s.size()) throw ValidationError("bad number in csv: " + s);
  return x;
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_row(const SweepRecord& r) {
  std::ostringstream os;
  os << quote(r.model) << ',' << quote(r.variant) << ',' << format_double(r.alpha) << ',' << quote(r.measure) << ','
     << quote(r.weight) << ',' << format_double(r.value) << ',' << format_double(r.bound) << ','
     << format_double(r.j_det) << ',' << format_double(r.j_sto) << ',' << r.n_samples << ',' << r.seed << ','
     << quote(r.error);
  return os.str();
}

void write_csv(std::ostream& out, const std::vector<SweepRecord>& records, const std::vector<std::string>& metadata) {
  for (const auto& m : metadata) out << "# " << m << '\n';
  out << kCsvHeader << '\n';
  for (const auto& r : records) out << csv_row(r) << '\n';
}

void write_csv_file(const std::string& path, const std::vector<SweepRecord>& records,
                    const std::vector<std::string>& metadata) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    write_csv(out, records, metadata);
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot move output into place at " + path + ": " + ec.message());
  }
}

std::vector<SweepRecord> read_csv(std::istream& in) {
  std::vector<SweepRecord> out;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kCsvHeader) throw ValidationError("unexpected csv header: " + line);
      header = true;
      continue;
    }
    const auto f = split_row(line);
    if (f.size() != 12) throw ValidationError("csv row has " + std::to_string(f.size()) + " fields");
    SweepRecord r;
    r.model = f[0];
    r.variant = f[1];
    r.alpha = parse_double(f[2]);
    r.measure = f[3];
    r.weight = f[4];
    r.value = parse_double(f[5]);
    r.bound = parse_double(f[6]);
    r.j_det = parse_double(f[7]);
    r.j_sto = parse_double(f[8]);
    r.n_samples = std::stoll(f[9]);
    r.seed = std::stoull(f[10]);
    r.error = f[11];
    out.push_back(std::move(r));
  }
  if (!header) throw ValidationError("csv has no header");
  return out;
}

std::vector<SweepRecord> read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return read_csv(in);
}

}  // namespace nonlin::bench
