#pragma once

#include <cmath>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace refcurve {

enum class Sex { female, male };

enum class Response { ratio, fev1, fvc };

const char* to_string(Response r);
const char* to_string(Sex s);
Response response_from_string(const std::string& s);

/// One subject: covariates plus measured responses. weight_kg may be NaN
/// (the CSV column is optional); the FEV1/FVC ratio is always derived,
/// never stored.
struct Observation {
  long id = 0;
  Sex sex = Sex::female;
  double age_years = 0.0;
  double height_cm = 0.0;
  double weight_kg = std::numeric_limits<double>::quiet_NaN();
  double fev1_l = 0.0;
  double fvc_l = 0.0;

  double response(Response r) const {
    switch (r) {
      case Response::fev1: return fev1_l;
      case Response::fvc: return fvc_l;
      case Response::ratio: return fev1_l / fvc_l;
    }
    throw std::logic_error("unreachable");
  }
  bool has_weight() const { return !std::isnan(weight_kg); }
};

using Dataset = std::vector<Observation>;

/// Schema violation with the offending rows listed (1-based, counting the
/// header as row 1).
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string message, std::vector<std::string> row_errors);
  const std::vector<std::string>& row_errors() const { return rows_; }

 private:
  std::vector<std::string> rows_;
};

/// Reads the canonical CSV (header required, exact names):
///   id,sex,age_years,height_cm,weight_kg,fev1_l,fvc_l
/// sex is F or M; weight_kg may be empty. All other fields must parse and
/// be positive (age >= 0). Throws SchemaError listing every bad row.
Dataset read_csv(const std::string& path);
Dataset read_csv_stream(std::istream& in, const std::string& origin);

void write_csv(const Dataset& data, const std::string& path);

}  // namespace refcurve
