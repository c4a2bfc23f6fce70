#include "cavitas/peaks.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <Eigen/Dense>

#include "cavitas/errors.hpp"

namespace cavitas {

namespace {

std::vector<double> moving_average(const std::vector<double>& v, std::size_t width) {
  const std::size_t half = width / 2;
  std::vector<double> out(v.size());
  std::vector<double> prefix(v.size() + 1, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) prefix[i + 1] = prefix[i] + v[i];
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(v.size(), i + half + 1);
    out[i] = (prefix[hi] - prefix[lo]) / double(hi - lo);
  }
  return out;
}

double median_of(std::vector<double> v) {
  const auto mid = v.begin() + std::ptrdiff_t(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

double enbw_of(const PsdSeries& data) {
  const auto it = data.meta.find("enbw_bins");
  if (it == data.meta.end()) return 1.0;
  try {
    return std::max(1.0, std::stod(it->second));
  } catch (...) {
    return 1.0;
  }
}

// Ratio test against a saddle: both numerator and denominator carry noise.
double prominence_ratio(std::size_t n_bins, double nu, const PeakOptions& opts) {
  const boost::math::normal_distribution<double> normal;
  const double z = std::max(
      opts.min_sigma, boost::math::quantile(boost::math::complement(
                          normal, opts.family_error / double(std::max<std::size_t>(n_bins, 1)))));
  return std::exp(z * std::sqrt(2.0 / nu));
}

// Maximum of a least-squares cubic through log-PSD around bin i; the cubic
// term soaks up the skew a neighbouring peak puts on the flank.
double refine(const std::vector<double>& freqs, const std::vector<double>& s, std::size_t i,
              std::size_t half) {
  const std::size_t lo = i >= half ? i - half : 0;
  const std::size_t hi = std::min(s.size() - 1, i + half);
  if (hi - lo < 4) return freqs[i];
  const double x0 = freqs[i];
  const double dx = (freqs[hi] - freqs[lo]) / 2.0;
  const auto m = Eigen::Index(hi - lo + 1);
  Eigen::MatrixXd a(m, 4);
  Eigen::VectorXd y(m);
  for (std::size_t j = lo; j <= hi; ++j) {
    const double x = (freqs[j] - x0) / dx;
    const auto r = Eigen::Index(j - lo);
    a.row(r) << 1.0, x, x * x, x * x * x;
    y[r] = std::log(s[j]);
  }
  const Eigen::Vector4d c = a.colPivHouseholderQr().solve(y);
  // p'(x) = c1 + 2 c2 x + 3 c3 x^2; take the root where p'' < 0
  const double qa = 3.0 * c[3], qb = 2.0 * c[2], qc = c[1];
  double vertex;
  if (std::abs(qa) < 1e-12 * std::abs(qb)) {
    if (!(qb < 0.0)) return freqs[i];
    vertex = -qc / qb;
  } else {
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0) return freqs[i];
    const double sq = std::sqrt(disc);
    const double q = -0.5 * (qb + std::copysign(sq, qb));
    const double r1 = q / qa, r2 = qc / q;
    vertex = (2.0 * qa * r1 + qb < 0.0) ? r1 : r2;
  }
  if (!std::isfinite(vertex) || std::abs(vertex) > 1.0) return freqs[i];
  return x0 + vertex * dx;
}

}  // namespace

double detection_ratio(std::size_t n_bins, double dof_averages, const PeakOptions& opts) {
  // Smoothed background bins ~ B * Gamma(nu, 1/nu); the threshold is the
  // family-wise quantile divided by the median (the background estimator).
  const boost::math::gamma_distribution<double> dist(dof_averages, 1.0 / dof_averages);
  const double p = opts.family_error / double(std::max<std::size_t>(n_bins, 1));
  const double q = boost::math::quantile(boost::math::complement(dist, p));
  const double med = boost::math::median(dist);
  return std::max(1.0 + opts.min_sigma / std::sqrt(dof_averages), q / med);
}

std::vector<Peak> extract_peaks(const PsdSeries& data, std::size_t max_peaks,
                                const PeakOptions& opts) {
  data.check();
  const std::size_t n = data.size();
  if (n < 3 || max_peaks == 0) return {};

  const std::size_t width = std::max<std::size_t>(1, opts.smooth_bins | 1);
  const auto s = moving_average(data.values, width);
  const double background = median_of(s);
  if (!(background > 0.0)) return {};

  const double nu = double(data.n_avg) * double(width) / enbw_of(data);
  const double level = background * detection_ratio(n, nu, opts);
  const double prom = prominence_ratio(n, nu, opts);

  std::vector<Peak> peaks;
  std::size_t i = 1;
  while (i + 1 < n) {
    if (!(s[i] > s[i - 1])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && s[j + 1] == s[i]) ++j;  // plateau: report its leftmost bin
    if (j + 1 >= n || !(s[j + 1] < s[i])) {
      i = j + 1;
      continue;
    }
    const std::size_t top = i;
    i = j + 1;
    if (s[top] < level) continue;

    // saddles towards the nearest higher point (or the edge) on each side
    double left_min = s[top];
    for (std::size_t l = top; l-- > 0;) {
      if (s[l] > s[top]) break;
      left_min = std::min(left_min, s[l]);
    }
    double right_min = s[top];
    for (std::size_t r = top + 1; r < n; ++r) {
      if (s[r] > s[top]) break;
      right_min = std::min(right_min, s[r]);
    }
    const double saddle = std::max({left_min, right_min, background});
    if (s[top] < prom * saddle) continue;

    const double half = background + 0.5 * (s[top] - background);
    std::size_t l = top;
    while (l > 0 && s[l] > half) --l;
    std::size_t r = top;
    while (r + 1 < n && s[r] > half) ++r;
    auto cross = [&](std::size_t inside, std::size_t outside) {
      const double a = s[inside], b = s[outside];
      if (a == b) return data.freqs[outside];
      const double t = (a - half) / (a - b);
      return data.freqs[inside] + t * (data.freqs[outside] - data.freqs[inside]);
    };
    const double w_lo = l < top ? cross(l + 1, l) : data.freqs[top];
    const double w_hi = r > top ? cross(r - 1, r) : data.freqs[top];

    Peak pk;
    pk.height = s[top];
    pk.width = w_hi - w_lo;
    // fit over the upper part of the peak
    std::size_t reach = 1;
    while (reach < (r - l) / 2 && top >= reach && top + reach < n &&
           s[top - reach] > 0.5 * s[top] && s[top + reach] > 0.5 * s[top]) {
      ++reach;
    }
    reach = std::max<std::size_t>(reach, 1);
    if (j > top) {
      pk.omega = data.freqs[top];
    } else {
      // recentre the window on the vertex: an off-centre window biases it
      std::size_t c = top;
      pk.omega = data.freqs[top];
      for (int it = 0; it < 4; ++it) {
        pk.omega = refine(data.freqs, s, c, reach);
        const auto next = std::size_t(
            std::lower_bound(data.freqs.begin(), data.freqs.end(), pk.omega) - data.freqs.begin());
        const std::size_t nc = std::min(next, n - 1);
        if (nc == c || nc < l || nc > r) break;
        c = nc;
      }
    }
    peaks.push_back(pk);
  }

  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const Peak& a, const Peak& b) { return a.height > b.height; });
  if (peaks.size() > max_peaks) peaks.resize(max_peaks);
  return peaks;
}

}  // namespace cavitas
