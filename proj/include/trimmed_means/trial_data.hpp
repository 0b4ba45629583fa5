#ifndef TRIMMED_MEANS_TRIAL_DATA_HPP
#define TRIMMED_MEANS_TRIAL_DATA_HPP

#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace trimmed_means {

// Which tail of the outcome distribution is the poor one. A pain-reduction
// endpoint where decreases are good trims the upper tail (WorseIsHigh).
enum class Direction { WorseIsLow, WorseIsHigh };

enum class MissReason { Observed, MarLike, MnarLike };

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrialRecord {
  std::string subject_id;
  int arm = 0;  // 0 = reference, 1 = experimental
  std::optional<double> outcome;
  MissReason reason = MissReason::Observed;
  std::vector<double> covariates;
};

struct TrialDataset {
  std::vector<TrialRecord> records;
  Direction direction = Direction::WorseIsLow;
};

struct ArmCounts {
  int n = 0;
  int n_missing = 0;
  int n_mar = 0;
  int n_mnar = 0;
  double missing_prop = 0.0;
};

inline void validate(const TrialDataset& d) {
  std::unordered_set<std::string> ids;
  std::array<int, 2> arm_n{0, 0};
  std::size_t arity = d.records.empty() ? 0 : d.records.front().covariates.size();
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const TrialRecord& r = d.records[i];
    const std::string where = "record " + std::to_string(i + 1) + " (subject '" +
                              r.subject_id + "')";
    if (r.arm != 0 && r.arm != 1)
      throw DataError(where + ": arm must be 0 or 1");
    if (r.outcome.has_value() != (r.reason == MissReason::Observed))
      throw DataError(where + ": outcome present iff reason is observed");
    if (r.covariates.size() != arity)
      throw DataError(where + ": covariate arity differs from first record");
    if (!ids.insert(r.subject_id).second)
      throw DataError(where + ": duplicate subject_id");
    ++arm_n[r.arm];
  }
  if (arm_n[0] == 0 || arm_n[1] == 0)
    throw DataError("dataset must contain records in both arms");
}

inline std::array<ArmCounts, 2> arm_summary(const TrialDataset& d) {
  std::array<ArmCounts, 2> out{};
  for (const TrialRecord& r : d.records) {
    ArmCounts& a = out[r.arm];
    ++a.n;
    if (r.reason != MissReason::Observed) ++a.n_missing;
    if (r.reason == MissReason::MarLike) ++a.n_mar;
    if (r.reason == MissReason::MnarLike) ++a.n_mnar;
  }
  for (ArmCounts& a : out)
    a.missing_prop = a.n > 0 ? static_cast<double>(a.n_missing) / a.n : 0.0;
  return out;
}

namespace detail {

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": not a number: '" + s + "'");
  }
}

}  // namespace detail

// CSV header: subject_id,arm,outcome,reason[,cov1,cov2,...]
// outcome is the empty string when missing; reason in {observed,mar,mnar}.
inline TrialDataset load_csv(std::istream& in, Direction direction) {
  TrialDataset d;
  d.direction = direction;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file");
  auto header = detail::split_csv_line(line);
  if (header.size() < 4 || header[0] != "subject_id" || header[1] != "arm" ||
      header[2] != "outcome" || header[3] != "reason")
    throw DataError("header must be subject_id,arm,outcome,reason[,cov...]");
  const std::size_t ncov = header.size() - 4;

  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const std::string where = "row " + std::to_string(row);
    auto f = detail::split_csv_line(line);
    if (f.size() != header.size())
      throw DataError(where + ": expected " + std::to_string(header.size()) +
                      " fields, got " + std::to_string(f.size()));
    TrialRecord r;
    r.subject_id = f[0];
    if (f[1] == "0")
      r.arm = 0;
    else if (f[1] == "1")
      r.arm = 1;
    else
      throw DataError(where + ": arm must be 0 or 1, got '" + f[1] + "'");
    const std::string reason = detail::lower(f[3]);
    if (reason == "observed")
      r.reason = MissReason::Observed;
    else if (reason == "mar")
      r.reason = MissReason::MarLike;
    else if (reason == "mnar")
      r.reason = MissReason::MnarLike;
    else
      throw DataError(where + ": reason must be observed|mar|mnar, got '" +
                      f[3] + "'");
    if (!f[2].empty()) {
      if (r.reason != MissReason::Observed)
        throw DataError(where + ": outcome given but reason is '" + reason + "'");
      r.outcome = detail::parse_double(f[2], where);
    } else if (r.reason == MissReason::Observed) {
      throw DataError(where + ": reason observed but outcome is empty");
    }
    for (std::size_t c = 0; c < ncov; ++c) {
      if (f[4 + c].empty())
        throw DataError(where + ": covariates must be fully observed");
      r.covariates.push_back(detail::parse_double(f[4 + c], where));
    }
    d.records.push_back(std::move(r));
  }
  validate(d);
  return d;
}

inline TrialDataset load_csv(const std::string& path, Direction direction) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  try {
    return load_csv(in, direction);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline std::string format_full_precision(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_csv(const TrialDataset& d, std::ostream& out) {
  const std::size_t ncov =
      d.records.empty() ? 0 : d.records.front().covariates.size();
  out << "subject_id,arm,outcome,reason";
  for (std::size_t c = 0; c < ncov; ++c) out << ",cov" << (c + 1);
  out << "\n";
  for (const TrialRecord& r : d.records) {
    out << r.subject_id << ',' << r.arm << ',';
    if (r.outcome) out << format_full_precision(*r.outcome);
    out << ',';
    switch (r.reason) {
      case MissReason::Observed: out << "observed"; break;
      case MissReason::MarLike: out << "mar"; break;
      case MissReason::MnarLike: out << "mnar"; break;
    }
    for (double c : r.covariates) out << ',' << format_full_precision(c);
    out << "\n";
  }
}

inline std::vector<double> observed_outcomes(const TrialDataset& d, int arm) {
  std::vector<double> out;
  for (const TrialRecord& r : d.records)
    if (r.arm == arm && r.outcome) out.push_back(*r.outcome);
  return out;
}

}  // namespace trimmed_means

#endif
