#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "attrnoise/metrics.hpp"

namespace attrnoise {

namespace {

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

double sample_variance(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / double(v.size() - 1);
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("incomplete_beta: a and b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
  if (!(dof > 0.0)) throw std::invalid_argument("student_t_cdf: dof must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
  return t > 0.0 ? 1.0 - tail : tail;
}

double welch_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("welch_ttest: each sample needs >= 2 values");
  // Constancy is decided on the values: the mean of equal values can be off by an ulp.
  auto constant = [](std::span<const double> s) {
    return std::all_of(s.begin(), s.end(), [&](double v) { return v == s[0]; });
  };
  const bool ca = constant(a), cb = constant(b);
  if (ca && cb) return a[0] == b[0] ? 1.0 : 0.0;
  const double ma = ca ? a[0] : mean_of(a);
  const double mb = cb ? b[0] : mean_of(b);
  const double sa = ca ? 0.0 : sample_variance(a, ma) / double(a.size());
  const double sb = cb ? 0.0 : sample_variance(b, mb) / double(b.size());
  const double se2 = sa + sb;
  const double diff = ma - mb;
  const double t2 = diff * diff / se2;
  const double dof = se2 * se2 / (sa * sa / double(a.size() - 1) + sb * sb / double(b.size() - 1));
  // Two-sided tail: P(|T| > |t|) = I_{dof/(dof+t^2)}(dof/2, 1/2).
  return incomplete_beta(dof / 2.0, 0.5, dof / (dof + t2));
}

const char* mark_symbol(Mark m) {
  switch (m) {
    case Mark::better: return "•";
    case Mark::even: return "≡";
    case Mark::worse: return "◦";
  }
  return "?";
}

const char* to_string(Mark m) {
  switch (m) {
    case Mark::better: return "better";
    case Mark::even: return "even";
    case Mark::worse: return "worse";
  }
  return "?";
}

SignificanceMark mark_significance(std::span<const double> ours, std::span<const double> theirs, double alpha) {
  if (ours.size() != theirs.size()) throw std::invalid_argument("mark_significance: run counts differ");
  SignificanceMark m;
  m.mean_ours = mean_of(ours);
  m.mean_theirs = mean_of(theirs);
  m.p_value = welch_ttest(ours, theirs);
  if (m.p_value >= alpha)
    m.mark = Mark::even;
  else
    m.mark = m.mean_ours > m.mean_theirs ? Mark::better : Mark::worse;
  return m;
}

}  // namespace attrnoise
