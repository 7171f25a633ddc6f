#include "refcurve/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "refcurve/normal.hpp"
#include "refcurve/rng.hpp"

namespace refcurve {

CubicCurve::CubicCurve(std::vector<double> xs, std::vector<double> ys)
    : xs_(std::move(xs)), ys_(std::move(ys)) {
  if (xs_.size() != ys_.size() || xs_.size() < 2) {
    throw std::invalid_argument("CubicCurve: need >= 2 control points");
  }
  for (std::size_t i = 1; i < xs_.size(); ++i) {
    if (!(xs_[i] > xs_[i - 1])) {
      throw std::invalid_argument("CubicCurve: x must be strictly increasing");
    }
  }
  const std::size_t n = xs_.size();
  slopes_.resize(n);
  slopes_[0] = (ys_[1] - ys_[0]) / (xs_[1] - xs_[0]);
  slopes_[n - 1] = (ys_[n - 1] - ys_[n - 2]) / (xs_[n - 1] - xs_[n - 2]);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    slopes_[i] = (ys_[i + 1] - ys_[i - 1]) / (xs_[i + 1] - xs_[i - 1]);
  }
}

double CubicCurve::operator()(double x) const {
  if (xs_.empty()) {
    throw std::logic_error("CubicCurve: empty");
  }
  if (x <= xs_.front()) return ys_.front();
  if (x >= xs_.back()) return ys_.back();
  const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  const std::size_t j = static_cast<std::size_t>(it - xs_.begin()) - 1;
  const double h = xs_[j + 1] - xs_[j];
  const double t = (x - xs_[j]) / h;
  const double y0 = ys_[j], y1 = ys_[j + 1];
  const double m0 = slopes_[j] * h, m1 = slopes_[j + 1] * h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 +
         (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1;
}

double TruthScenario::height_curve(double age) const {
  const double growth = 110.0 + 65.0 / (1.0 + std::exp(-(age - 12.0) / 2.5));
  const double senescence = age > 40.0 ? 0.05 * (age - 40.0) : 0.0;
  return growth - senescence;
}

bool TruthScenario::has_truth(Response r) const {
  switch (r) {
    case Response::fev1: return fev1.has_value();
    case Response::fvc: return fvc.has_value();
    case Response::ratio: return ratio.has_value();
  }
  return false;
}

const ResponseTruth& TruthScenario::truth(Response r) const {
  switch (r) {
    case Response::fev1:
      if (fev1) return *fev1;
      break;
    case Response::fvc:
      if (fvc) return *fvc;
      break;
    case Response::ratio:
      if (ratio) return *ratio;
      break;
  }
  throw std::invalid_argument(std::string("scenario '") + name +
                              "' has no direct truth for " + to_string(r));
}

void TruthScenario::validate() const {
  if (!(age_min < age_max)) {
    throw std::invalid_argument("scenario: empty age range");
  }
  if (!fvc || (!fev1 && !ratio) || (fev1 && ratio)) {
    throw std::invalid_argument(
        "scenario: need fvc plus exactly one of fev1 or ratio");
  }
  const int grid = 400;
  for (Response r : {Response::fev1, Response::fvc, Response::ratio}) {
    if (!has_truth(r)) continue;
    const ResponseTruth& rt = truth(r);
    for (int i = 0; i <= grid; ++i) {
      const double age =
          age_min + (age_max - age_min) * static_cast<double>(i) / grid;
      const BccgParams p = rt.at(age);
      validate_params(p);
    }
  }
}

namespace {

struct Draw {
  double y;
  double z;
};

Draw draw_bccg(Rng& rng, const BccgParams& p, std::int64_t* redraws) {
  for (;;) {
    const double z = normal_quantile(rng.uniform());
    if (std::fabs(p.nu) <= kNuEps) {
      return {p.mu * std::exp(p.sigma * z), z};
    }
    const double base = 1.0 + p.nu * p.sigma * z;
    if (base > 0.0) {
      return {p.mu * std::pow(base, 1.0 / p.nu), z};
    }
    ++*redraws;
  }
}

TruthRecord make_record(long id, Response r, const BccgParams& p, double z) {
  static const double z05 = normal_quantile(0.05);
  static const double z025 = normal_quantile(0.025);
  TruthRecord rec;
  rec.id = id;
  rec.response = r;
  rec.params = p;
  rec.z = z;
  rec.below_05 = z < z05;
  rec.below_025 = z < z025;
  return rec;
}

}  // namespace

SyntheticDataset generate(const TruthScenario& scenario, std::size_t n) {
  return generate(scenario, n, scenario.default_seed);
}

SyntheticDataset generate(const TruthScenario& scenario, std::size_t n,
                          std::uint64_t seed) {
  if (n < 1) {
    throw std::invalid_argument("generate: n must be >= 1");
  }
  scenario.validate();
  Rng rng(seed);
  SyntheticDataset out;
  out.data.reserve(n);
  std::int64_t redraws = 0;

  // Per subject the stream order is fixed: sex, age, height noise, weight
  // noise, then the response draws (fvc first, then fev1 or ratio).
  for (std::size_t i = 0; i < n; ++i) {
    Observation o;
    o.id = static_cast<long>(i) + 1;
    o.sex = rng.uniform() < 0.5 ? Sex::female : Sex::male;
    o.age_years = rng.uniform(scenario.age_min, scenario.age_max);
    o.height_cm = scenario.height_curve(o.age_years) +
                  (o.sex == Sex::male ? scenario.male_height_offset : 0.0) +
                  scenario.height_noise_sd * rng.normal();
    const double h_m = o.height_cm / 100.0;
    o.weight_kg = std::max(10.0, 21.5 * h_m * h_m + 2.5 * rng.normal());

    const BccgParams p_fvc = scenario.truth(Response::fvc).at(o.age_years);
    const Draw d_fvc = draw_bccg(rng, p_fvc, &redraws);
    o.fvc_l = d_fvc.y;
    out.truth.push_back(make_record(o.id, Response::fvc, p_fvc, d_fvc.z));

    if (scenario.ratio) {
      const BccgParams p_r = scenario.truth(Response::ratio).at(o.age_years);
      const Draw d_r = draw_bccg(rng, p_r, &redraws);
      o.fev1_l = d_r.y * o.fvc_l;
      out.truth.push_back(make_record(o.id, Response::ratio, p_r, d_r.z));
    } else {
      const BccgParams p_f = scenario.truth(Response::fev1).at(o.age_years);
      const Draw d_f = draw_bccg(rng, p_f, &redraws);
      o.fev1_l = d_f.y;
      out.truth.push_back(make_record(o.id, Response::fev1, p_f, d_f.z));
    }
    out.data.push_back(o);
  }
  if (static_cast<double>(redraws) > 0.001 * static_cast<double>(n)) {
    std::fprintf(stderr, "generate(%s): %lld out-of-support redraws for %zu subjects\n",
                 scenario.name.c_str(), static_cast<long long>(redraws), n);
  }
  return out;
}

namespace {

CubicCurve sample_curve(double lo, double hi, double step,
                        double (*f)(double)) {
  std::vector<double> xs, ys;
  for (double x = lo; x < hi + 0.5 * step; x += step) {
    const double xc = std::min(x, hi);
    xs.push_back(xc);
    ys.push_back(f(xc));
  }
  return CubicCurve(std::move(xs), std::move(ys));
}

double symm_fev1_mu(double a) {
  return a <= 20.0 ? 1.0 + 0.17 * a : 4.4 - 0.022 * (a - 20.0);
}
double symm_fev1_sigma(double a) { return 0.25 / symm_fev1_mu(a); }
double symm_fvc_mu(double a) {
  return a <= 20.0 ? 1.2 + 0.205 * a : 5.3 - 0.026 * (a - 20.0);
}
double symm_fvc_sigma(double a) { return 0.30 / symm_fvc_mu(a); }

ResponseTruth skew_fev1_truth() {
  ResponseTruth t;
  t.mu = CubicCurve({3, 8, 13, 18, 25, 40, 60, 80, 93},
                    {1.05, 1.95, 3.0, 3.85, 4.1, 3.95, 3.45, 2.85, 2.35});
  t.sigma = CubicCurve({3, 12, 25, 45, 70, 93},
                       {0.145, 0.155, 0.125, 0.115, 0.135, 0.155});
  t.nu = CubicCurve({3, 93}, {-0.5, -0.5});
  return t;
}

ResponseTruth skew_fvc_truth() {
  ResponseTruth t;
  t.mu = CubicCurve({3, 8, 13, 18, 25, 40, 60, 80, 93},
                    {1.25, 2.3, 3.6, 4.7, 5.1, 4.95, 4.35, 3.6, 3.0});
  t.sigma = CubicCurve({3, 12, 25, 45, 70, 93},
                       {0.14, 0.15, 0.12, 0.11, 0.13, 0.15});
  t.nu = CubicCurve({3, 93}, {-0.5, -0.5});
  return t;
}

}  // namespace

std::vector<TruthScenario> builtin_scenarios() {
  std::vector<TruthScenario> out;

  {
    // Right-skewed responses with a smoothly age-varying spread: the world
    // where a symmetric constant-variance model misses the lower tail.
    TruthScenario s;
    s.name = "skew-lung";
    s.default_seed = 424201;
    s.fev1 = skew_fev1_truth();
    s.fvc = skew_fvc_truth();
    out.push_back(std::move(s));
  }

  {
    // Hinge-linear means and constant residual SD (sigma ~ 1/mu with
    // nu = 1): the world a segmented normal model is correct for.
    TruthScenario s;
    s.name = "symmetric-homoscedastic";
    s.default_seed = 424202;
    ResponseTruth fev1;
    fev1.mu = sample_curve(3.0, 93.0, 0.5, &symm_fev1_mu);
    fev1.sigma = sample_curve(3.0, 93.0, 0.5, &symm_fev1_sigma);
    fev1.nu = CubicCurve({3, 93}, {1.0, 1.0});
    ResponseTruth fvc;
    fvc.mu = sample_curve(3.0, 93.0, 0.5, &symm_fvc_mu);
    fvc.sigma = sample_curve(3.0, 93.0, 0.5, &symm_fvc_sigma);
    fvc.nu = CubicCurve({3, 93}, {1.0, 1.0});
    s.fev1 = std::move(fev1);
    s.fvc = std::move(fvc);
    out.push_back(std::move(s));
  }

  {
    // Bounded-looking left-skewed ratio sampled directly; fev1 is derived
    // as ratio * fvc.
    TruthScenario s;
    s.name = "ratio-like";
    s.default_seed = 424203;
    ResponseTruth ratio;
    ratio.mu = CubicCurve({3, 20, 50, 93}, {0.88, 0.86, 0.82, 0.76});
    ratio.sigma = CubicCurve({3, 30, 93}, {0.055, 0.05, 0.065});
    ratio.nu = CubicCurve({3, 93}, {4.0, 4.0});
    s.ratio = std::move(ratio);
    s.fvc = skew_fvc_truth();
    out.push_back(std::move(s));
  }

  return out;
}

TruthScenario scenario_by_name(const std::string& name) {
  for (auto& s : builtin_scenarios()) {
    if (s.name == name) return s;
  }
  throw std::invalid_argument("unknown scenario: " + name);
}

void write_truth_csv(const std::vector<TruthRecord>& truth,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << "id,response,mu,sigma,nu,z,below_05,below_025\n";
  char buf[256];
  for (const auto& r : truth) {
    std::snprintf(buf, sizeof(buf), "%ld,%s,%.10g,%.10g,%.10g,%.10g,%d,%d\n",
                  r.id, to_string(r.response), r.params.mu, r.params.sigma,
                  r.params.nu, r.z, r.below_05 ? 1 : 0, r.below_025 ? 1 : 0);
    out << buf;
  }
}

}  // namespace refcurve
