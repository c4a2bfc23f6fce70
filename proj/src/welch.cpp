#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "cavitas/constants.hpp"
#include "cavitas/errors.hpp"
#include "cavitas/langevin.hpp"
#include "cavitas/units.hpp"

namespace cavitas {

namespace {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
// the FFTW planner is not reentrant; execution is
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDestroy {
  void operator()(fftw_plan p) const {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};

std::vector<double> make_window(std::size_t n, Window window) {
  std::vector<double> w(n, 1.0);
  if (window == Window::Hann) {
    // periodic Hann
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(i) / double(n));
    }
  }
  return w;
}

}  // namespace

PsdSeries welch_psd(std::span<const double> series, double record_length, double sample_rate,
                    Window window) {
  const auto n = static_cast<std::size_t>(std::llround(record_length * sample_rate));
  if (n < 2 || series.size() < n) {
    throw InsufficientData("series has " + std::to_string(series.size()) +
                           " samples, need at least one record of " + std::to_string(n));
  }
  const std::size_t n_records = series.size() / n;
  const std::size_t n_bins = n / 2 + 1;

  const auto w = make_window(n, window);
  double w_sum = 0.0, w_sq = 0.0;
  for (double v : w) {
    w_sum += v;
    w_sq += v * v;
  }

  std::unique_ptr<double, FftwFree> in(fftw_alloc_real(n));
  std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(n_bins));
  std::unique_ptr<std::remove_pointer_t<fftw_plan>, PlanDestroy> plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));
  }

  std::vector<double> acc(n_bins, 0.0);
  for (std::size_t r = 0; r < n_records; ++r) {
    const auto rec = series.subspan(r * n, n);
    double mean = 0.0;
    for (double v : rec) mean += v;
    mean /= double(n);
    for (std::size_t i = 0; i < n; ++i) in.get()[i] = (rec[i] - mean) * w[i];
    fftw_execute(plan.get());
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double re = out.get()[k][0];
      const double im = out.get()[k][1];
      acc[k] += re * re + im * im;
    }
  }

  PsdSeries psd;
  psd.n_avg = static_cast<int>(n_records);
  psd.freqs.resize(n_bins);
  psd.values.resize(n_bins);
  const double norm = 1.0 / (sample_rate * w_sq * double(n_records));
  for (std::size_t k = 0; k < n_bins; ++k) {
    const bool edge = (k == 0) || (n % 2 == 0 && k == n / 2);
    psd.freqs[k] = hz_to_rad(double(k) * sample_rate / double(n));
    psd.values[k] = (edge ? 1.0 : 2.0) * acc[k] * norm;
  }
  psd.meta["source"] = "welch";
  psd.meta["window"] = window == Window::Hann ? "hann" : "rectangular";
  psd.meta["enbw_bins"] = format_double(double(n) * w_sq / (w_sum * w_sum));
  psd.meta["record_length_s"] = format_double(record_length);
  psd.meta["sample_rate_hz"] = format_double(sample_rate);
  return psd;
}

}  // namespace cavitas
