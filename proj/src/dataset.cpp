#include "refcurve/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace refcurve {

const char* to_string(Response r) {
  switch (r) {
    case Response::ratio: return "ratio";
    case Response::fev1: return "fev1";
    case Response::fvc: return "fvc";
  }
  return "?";
}

const char* to_string(Sex s) { return s == Sex::female ? "F" : "M"; }

Response response_from_string(const std::string& s) {
  if (s == "ratio") return Response::ratio;
  if (s == "fev1") return Response::fev1;
  if (s == "fvc") return Response::fvc;
  throw std::invalid_argument("unknown response: " + s);
}

SchemaError::SchemaError(std::string message, std::vector<std::string> row_errors)
    : std::runtime_error(std::move(message)), rows_(std::move(row_errors)) {}

namespace {

constexpr const char* kHeader = "id,sex,age_years,height_cm,weight_kg,fev1_l,fvc_l";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

bool parse_double(const std::string& s, double* out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto [ptr, ec] = std::from_chars(b, e, *out);
  return ec == std::errc() && ptr == e;
}

bool parse_long(const std::string& s, long* out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto [ptr, ec] = std::from_chars(b, e, *out);
  return ec == std::errc() && ptr == e;
}

}  // namespace

Dataset read_csv_stream(std::istream& in, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line)) {
    throw SchemaError(origin + ": empty file", {});
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) {
    throw SchemaError(origin + ": header must be exactly '" +
                          std::string(kHeader) + "'",
                      {"row 1: got '" + line + "'"});
  }

  Dataset data;
  std::vector<std::string> errors;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    const auto f = split_csv_line(line);
    auto bad = [&](const std::string& why) {
      errors.push_back("row " + std::to_string(row) + ": " + why);
    };
    if (f.size() != 7) {
      bad("expected 7 fields, got " + std::to_string(f.size()));
      continue;
    }
    Observation o;
    bool ok = true;
    if (!parse_long(f[0], &o.id)) {
      bad("id not an integer: '" + f[0] + "'");
      ok = false;
    }
    if (f[1] == "F") {
      o.sex = Sex::female;
    } else if (f[1] == "M") {
      o.sex = Sex::male;
    } else {
      bad("sex must be F or M, got '" + f[1] + "'");
      ok = false;
    }
    struct Field {
      const char* name;
      int idx;
      double* dst;
      bool optional;
      bool positive;
    };
    const Field fields[] = {
        {"age_years", 2, &o.age_years, false, false},
        {"height_cm", 3, &o.height_cm, false, true},
        {"weight_kg", 4, &o.weight_kg, true, true},
        {"fev1_l", 5, &o.fev1_l, false, true},
        {"fvc_l", 6, &o.fvc_l, false, true},
    };
    for (const auto& fl : fields) {
      const std::string& s = f[fl.idx];
      if (s.empty()) {
        if (!fl.optional) {
          bad(std::string(fl.name) + " is empty");
          ok = false;
        }
        continue;
      }
      if (!parse_double(s, fl.dst) || !std::isfinite(*fl.dst)) {
        bad(std::string(fl.name) + " not a finite number: '" + s + "'");
        ok = false;
        continue;
      }
      if (fl.positive && *fl.dst <= 0.0) {
        bad(std::string(fl.name) + " must be positive, got " + s);
        ok = false;
      }
    }
    if (o.age_years < 0.0) {
      bad("age_years must be >= 0");
      ok = false;
    }
    if (ok) data.push_back(o);
  }
  if (!errors.empty()) {
    throw SchemaError(origin + ": " + std::to_string(errors.size()) +
                          " schema violation(s)",
                      errors);
  }
  return data;
}

Dataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw SchemaError("cannot open " + path, {});
  }
  return read_csv_stream(in, path);
}

void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << kHeader << "\n";
  char buf[256];
  for (const auto& o : data) {
    if (o.has_weight()) {
      std::snprintf(buf, sizeof(buf), "%ld,%s,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                    o.id, to_string(o.sex), o.age_years, o.height_cm,
                    o.weight_kg, o.fev1_l, o.fvc_l);
    } else {
      std::snprintf(buf, sizeof(buf), "%ld,%s,%.10g,%.10g,,%.10g,%.10g\n",
                    o.id, to_string(o.sex), o.age_years, o.height_cm, o.fev1_l,
                    o.fvc_l);
    }
    out << buf;
  }
}

}  // namespace refcurve
