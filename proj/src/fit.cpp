#include "cavitas/fit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/QR>

#include "cavitas/constants.hpp"
#include "cavitas/errors.hpp"

namespace cavitas {

FreeMask FreeMask::defaults() {
  FreeMask m;
  for (auto p : {Param::OmegaY, Param::GammaM, Param::GY, Param::Kappa, Param::AmpX, Param::AmpY,
                 Param::AmpZ, Param::Background}) {
    m.set(p, true);
  }
  return m;
}

std::size_t FreeMask::count() const { return std::size_t(std::count(free.begin(), free.end(), true)); }

namespace {

using Vec = Eigen::VectorXd;
constexpr std::size_t kN = SpectrumModelParams::kSize;
const double kRateFloor = hz_to_rad(1e-3);

enum class Kind { Linear, Log };

// Maps the free parameters onto O(1) internal coordinates.
struct Transform {
  std::vector<std::size_t> index;
  std::vector<Kind> kind;
  std::vector<double> scale;   // Linear: value = scale * u
  std::vector<double> offset;  // Log: value = offset + exp(u)
  std::array<double, kN> base{};

  Transform(const SpectrumModelParams& init, const FreeMask& mask) : base(init.to_array()) {
    const double kappa_scale = init.kappa > 0.0 ? init.kappa : std::max(1e-3 * init.omega_y, 1.0);
    for (std::size_t i = 0; i < kN; ++i) {
      if (!mask.free[i]) continue;
      const auto p = static_cast<Param>(i);
      index.push_back(i);
      switch (p) {
        case Param::OmegaX:
        case Param::OmegaY:
        case Param::OmegaZ:
          kind.push_back(Kind::Linear);
          scale.push_back(base[i] > 0.0 ? base[i] : 1.0);
          offset.push_back(0.0);
          break;
        case Param::Detuning:
          kind.push_back(Kind::Linear);
          scale.push_back(std::max({std::abs(base[i]), init.omega_y, 1.0}));
          offset.push_back(0.0);
          break;
        case Param::GY:
          kind.push_back(Kind::Linear);
          scale.push_back(kappa_scale);
          offset.push_back(0.0);
          break;
        case Param::GammaM:
        case Param::Kappa:
          kind.push_back(Kind::Log);
          scale.push_back(1.0);
          offset.push_back(kRateFloor);
          break;
        default:
          kind.push_back(Kind::Log);
          scale.push_back(1.0);
          offset.push_back(0.0);
          break;
      }
    }
  }

  std::size_t size() const { return index.size(); }

  Vec to_internal(const SpectrumModelParams& p) const {
    const auto a = p.to_array();
    Vec u(static_cast<Eigen::Index>(size()));
    for (std::size_t k = 0; k < size(); ++k) {
      const double v = a[index[k]];
      if (kind[k] == Kind::Linear) {
        u[Eigen::Index(k)] = v / scale[k];
      } else {
        const double excess = v - offset[k];
        if (offset[k] > 0.0 && !(excess > 0.0)) {
          // rate at or below the floor: restart from twice the floor
          u[Eigen::Index(k)] = std::log(offset[k]);
        } else if (!(excess > 0.0)) {
          throw NonFiniteModel(std::string(SpectrumModelParams::names()[index[k]]) +
                               " must be > 0 to be fitted (got " + std::to_string(v) + ")");
        } else {
          u[Eigen::Index(k)] = std::log(excess);
        }
      }
    }
    return u;
  }

  SpectrumModelParams from_internal(const Vec& u) const {
    auto a = base;
    for (std::size_t k = 0; k < size(); ++k) {
      const double x = u[Eigen::Index(k)];
      a[index[k]] = kind[k] == Kind::Linear ? scale[k] * x : offset[k] + std::exp(x);
    }
    return SpectrumModelParams::from_array(a);
  }

  // d value / d u
  double derivative(std::size_t k, const Vec& u) const {
    const double x = u[Eigen::Index(k)];
    return kind[k] == Kind::Linear ? scale[k] : std::exp(x);
  }
};

struct LogResiduals {
  std::vector<double> omega;
  std::vector<double> log_data;
  double weight = 1.0;
};

LogResiduals select_bins(const PsdSeries& data, const FitOptions& opts) {
  LogResiduals lr;
  lr.weight = std::sqrt(double(data.n_avg));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double w = data.freqs[i];
    const double v = data.values[i];
    if (w <= 0.0 || w < opts.band_lo || w > opts.band_hi || !(v > 0.0)) continue;
    lr.omega.push_back(w);
    lr.log_data.push_back(std::log(v));
  }
  return lr;
}

lsq::ResidualFn make_residual_fn(const LogResiduals& lr, const Transform& tf,
                                 const ModeMasses& masses) {
  return [&lr, &tf, masses](const Vec& u, Vec& r) {
    const auto p = tf.from_internal(u);
    for (std::size_t i = 0; i < lr.omega.size(); ++i) {
      const double m = psd_model(lr.omega[i], p, masses);
      r[Eigen::Index(i)] = (m > 0.0 && std::isfinite(m))
                               ? lr.weight * (lr.log_data[i] - std::log(m))
                               : std::numeric_limits<double>::quiet_NaN();
    }
  };
}

std::string describe(const SpectrumModelParams& p, const FreeMask& mask) {
  std::ostringstream os;
  const auto a = p.to_array();
  for (std::size_t i = 0; i < kN; ++i) {
    if (mask.free[i]) os << SpectrumModelParams::names()[i] << "=" << a[i] << " ";
  }
  return os.str();
}

SpectrumModelParams standard_errors(const Transform& tf, const Vec& u, const Eigen::MatrixXd& cov) {
  std::array<double, kN> se{};
  for (std::size_t k = 0; k < tf.size(); ++k) {
    const double var = cov(Eigen::Index(k), Eigen::Index(k));
    se[tf.index[k]] = tf.derivative(k, u) * std::sqrt(std::max(var, 0.0));
  }
  return SpectrumModelParams::from_array(se);
}

std::vector<SpectrumModelParams> multistart_inits(const SpectrumModelParams& init,
                                                  const FreeMask& mask, const FitOptions& opts) {
  std::vector<SpectrumModelParams> out{init};
  std::mt19937_64 rng(opts.multistart_seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double kappa_scale = init.kappa > 0.0 ? init.kappa : 1e-3 * init.omega_y;
  for (int s = 1; s < opts.multistart; ++s) {
    auto a = init.to_array();
    for (std::size_t i = 0; i < kN; ++i) {
      if (!mask.free[i]) continue;
      const double r = u(rng);
      switch (static_cast<Param>(i)) {
        case Param::OmegaX:
        case Param::OmegaY:
        case Param::OmegaZ:
        case Param::Detuning:
          a[i] += opts.perturbation * kappa_scale * r;
          break;
        case Param::GY:
          a[i] = std::abs(a[i]) > 1e-3 * kappa_scale ? a[i] * (1.0 + opts.perturbation * r)
                                                      : opts.perturbation * kappa_scale * (1.0 + r);
          break;
        default:
          a[i] *= 1.0 + opts.perturbation * r;
          break;
      }
    }
    out.push_back(SpectrumModelParams::from_array(a));
  }
  return out;
}

}  // namespace

FitResult fit_psd(const PsdSeries& data, const SpectrumModelParams& init, const FreeMask& free,
                  const FitOptions& opts) {
  data.check();
  const auto lr = select_bins(data, opts);
  const std::size_t n_free = free.count();
  if (n_free == 0) throw InsufficientData("no free parameters");
  if (lr.omega.size() < 10 * n_free) {
    throw InsufficientData("fit needs >= 10 bins per free parameter (" +
                           std::to_string(lr.omega.size()) + " bins, " + std::to_string(n_free) +
                           " free)");
  }
  for (double v : init.to_array()) {
    if (!std::isfinite(v)) throw NonFiniteModel("initial parameters not finite: " + describe(init, free));
  }

  const auto n_res = static_cast<Eigen::Index>(lr.omega.size());
  std::optional<lsq::Result> best;
  std::optional<Transform> best_tf;
  const auto starts = multistart_inits(init, free, opts);
  for (std::size_t s = 0; s < starts.size(); ++s) {
    Transform tf(starts[s], free);
    const auto fn = make_residual_fn(lr, tf, opts.masses);
    try {
      auto res = lsq::levenberg_marquardt(fn, tf.to_internal(starts[s]), n_res, opts.lm);
      if (!best || res.cost < best->cost) {
        best = std::move(res);
        best_tf = tf;
      }
    } catch (const NonFiniteModel&) {
      if (s == 0) {
        throw NonFiniteModel("PSD model not finite at initial parameters: " +
                             describe(starts[0], free));
      }
    }
  }

  FitResult out;
  out.free = free;
  out.params = best_tf->from_internal(best->x);
  out.params.g_y = std::abs(out.params.g_y);
  out.cost = best->cost;
  out.n_iter = best->n_iter;
  out.converged = best->converged;
  out.n_bins = lr.omega.size();
  const double dof = double(lr.omega.size() - n_free);
  out.chi2_reduced = 2.0 * best->cost / dof;

  // Drop collapsed log-scale amplitudes before inverting. g_y enters as g^2,
  // so at g = 0 (the edge of |g_y|) its column vanishes the same way.
  const auto& jac = best->jacobian;
  const double col_max = jac.colwise().norm().maxCoeff();
  std::vector<Eigen::Index> keep;
  for (std::size_t k = 0; k < best_tf->size(); ++k) {
    const auto p = static_cast<Param>(best_tf->index[k]);
    const bool edge = p == Param::AmpX || p == Param::AmpY || p == Param::AmpZ ||
                      p == Param::Background || p == Param::GY;
    if (edge && jac.col(Eigen::Index(k)).norm() < 1e-6 * col_max) {
      out.at_lower_bound[best_tf->index[k]] = true;
    } else {
      keep.push_back(Eigen::Index(k));
    }
  }
  Eigen::MatrixXd reduced(jac.rows(), Eigen::Index(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) reduced.col(Eigen::Index(j)) = jac.col(keep[j]);
  const auto cov_reduced = lsq::covariance(reduced, out.chi2_reduced);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(jac.cols(), jac.cols());
  for (std::size_t a = 0; a < keep.size(); ++a) {
    for (std::size_t b = 0; b < keep.size(); ++b) {
      cov(keep[a], keep[b]) = cov_reduced.matrix(Eigen::Index(a), Eigen::Index(b));
    }
  }
  out.standard_error = standard_errors(*best_tf, best->x, cov);
  return out;
}

SpectrumModelParams fit_uncertainties(const FitResult& result, const PsdSeries& data,
                                      const FitOptions& opts) {
  const auto lr = select_bins(data, opts);
  const std::size_t n_free = result.free.count();
  if (lr.omega.size() <= n_free) throw InsufficientData("not enough bins for uncertainties");
  Transform tf(result.params, result.free);
  const auto fn = make_residual_fn(lr, tf, opts.masses);
  const Vec u = tf.to_internal(result.params);
  Vec r(static_cast<Eigen::Index>(lr.omega.size()));
  fn(u, r);
  const auto jac = lsq::numeric_jacobian(fn, u, r, opts.lm.fd_step);
  const double chi2 = r.squaredNorm() / double(lr.omega.size() - n_free);
  const auto cov = lsq::covariance(jac, chi2);
  return standard_errors(tf, u, cov.matrix);
}

// ---------------------------------------------------------------------------
// Avoided crossing

namespace {

struct BranchPoint {
  double delta;
  double value;
  double weight;
  bool upper;
};

std::vector<BranchPoint> branch_points(const BranchTrack& t, BranchUse use) {
  std::vector<BranchPoint> pts;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double w = t.confidence.empty() ? 1.0 : t.confidence[i];
    if (use != BranchUse::LowerOnly && std::isfinite(t.omega_plus[i])) {
      pts.push_back({t.coords[i], t.omega_plus[i], w, true});
    }
    if (use != BranchUse::UpperOnly && std::isfinite(t.omega_minus[i])) {
      pts.push_back({t.coords[i], t.omega_minus[i], w, false});
    }
  }
  return pts;
}

double branch_value(const BranchPoint& pt, double g, double omega_m) {
  const auto h = hybrid_frequencies(omega_m, pt.delta, g);
  return pt.upper ? h.omega_plus : h.omega_minus;
}

CrossingEstimate fit_branches(const std::vector<BranchPoint>& pts, BranchUse use, double scale,
                              std::optional<std::pair<double, double>> seed) {
  auto cost_of = [&](double g, double wm) {
    double c = 0.0;
    for (const auto& pt : pts) {
      const double d = (pt.value - branch_value(pt, g, wm)) / scale;
      c += pt.weight * d * d;
    }
    return c;
  };

  // coarse grid for a robust start
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& pt : pts) {
    lo = std::min(lo, pt.value);
    hi = std::max(hi, pt.value);
  }
  double best_g = 0.1 * scale, best_wm = 0.5 * (lo + hi);
  double best_c = cost_of(best_g, best_wm);
  if (seed) {
    const double c = cost_of(seed->first, seed->second);
    if (c < best_c) {
      best_c = c;
      best_g = seed->first;
      best_wm = seed->second;
    }
  }
  for (int i = 0; i < 48; ++i) {
    const double wm = lo + (hi - lo) * (i + 0.5) / 48.0;
    for (int j = 0; j < 40; ++j) {
      const double g = scale * 1e-3 * std::pow(10.0, 3.0 * j / 39.0);
      const double c = cost_of(g, wm);
      if (c < best_c) {
        best_c = c;
        best_g = g;
        best_wm = wm;
      }
    }
  }

  const auto n_res = static_cast<Eigen::Index>(pts.size());
  lsq::ResidualFn fn = [&](const Vec& u, Vec& r) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      r[Eigen::Index(i)] = std::sqrt(pts[i].weight) *
                           (pts[i].value - branch_value(pts[i], u[0] * scale, u[1] * scale)) / scale;
    }
  };
  Vec u0(2);
  u0 << best_g / scale, best_wm / scale;
  lsq::Options lm;
  lm.rel_cost_tol = 1e-15;
  lm.grad_tol = 1e-15;
  lm.jacobian = [&](const Vec& u, Eigen::MatrixXd& jac) {
    const double g = u[0] * scale, wm = u[1] * scale;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double half = 0.5 * (wm + pts[i].delta);
      const double root = std::sqrt(g * g + half * half);
      const double sign = pts[i].upper ? 1.0 : -1.0;
      const double w = std::sqrt(pts[i].weight);
      jac(Eigen::Index(i), 0) = root > 0.0 ? -w * sign * g / root : 0.0;
      jac(Eigen::Index(i), 1) = -w * (0.5 + (root > 0.0 ? 0.5 * sign * half / root : 0.0));
    }
  };
  auto res = lsq::levenberg_marquardt(fn, u0, n_res, lm);
  // a stop on cost change leaves x good to ~sqrt(eps); polish with plain Gauss-Newton
  for (int it = 0; it < 8; ++it) {
    const Vec step = res.jacobian.colPivHouseholderQr().solve(-res.residuals);
    if (!step.allFinite()) break;
    Vec x = res.x + step;
    Vec r(n_res);
    fn(x, r);
    const double cost = 0.5 * r.squaredNorm();
    if (!r.allFinite() || cost > res.cost * (1.0 + 1e-12)) break;
    res.x = x;
    res.residuals = r;
    res.cost = cost;
    lm.jacobian(res.x, res.jacobian);
    if (step.lpNorm<Eigen::Infinity>() <= 1e-15 * res.x.lpNorm<Eigen::Infinity>()) break;
  }

  CrossingEstimate est;
  est.used = use;
  est.g = std::abs(res.x[0]) * scale;
  est.omega_m = res.x[1] * scale;
  const double dof = double(pts.size()) - 2.0;
  est.chi2_reduced = dof > 0.0 ? 2.0 * res.cost / dof : 0.0;
  const auto cov = lsq::covariance(res.jacobian, est.chi2_reduced);
  est.stderr_g = std::sqrt(cov.matrix(0, 0)) * scale;
  est.stderr_omega_m = std::sqrt(cov.matrix(1, 1)) * scale;
  return est;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

AvoidedCrossingFit fit_avoided_crossing(const BranchTrack& track) {
  if (track.omega_plus.size() != track.size() || track.omega_minus.size() != track.size() ||
      (!track.confidence.empty() && track.confidence.size() != track.size())) {
    throw InsufficientPoints("branch track columns have different lengths");
  }
  std::size_t n_points = 0, n_upper = 0, n_lower = 0;
  std::vector<double> mags, wm_guess, g2_guess;
  for (std::size_t i = 0; i < track.size(); ++i) {
    const bool up = std::isfinite(track.omega_plus[i]);
    const bool dn = std::isfinite(track.omega_minus[i]);
    n_upper += up;
    n_lower += dn;
    if (up || dn) ++n_points;
    if (up) mags.push_back(std::abs(track.omega_plus[i]));
    if (dn) mags.push_back(std::abs(track.omega_minus[i]));
    if (up && dn) {
      // Omega_+ + Omega_- = Omega_m - Delta; (Omega_+ - Omega_-)^2/4 = g^2 + ((Omega_m + Delta)/2)^2
      const double wm = track.omega_plus[i] + track.omega_minus[i] + track.coords[i];
      const double half_split = 0.5 * (track.omega_plus[i] - track.omega_minus[i]);
      const double half_det = 0.5 * (wm + track.coords[i]);
      wm_guess.push_back(wm);
      g2_guess.push_back(half_split * half_split - half_det * half_det);
    }
  }
  if (n_points < 4) {
    throw InsufficientPoints("avoided-crossing fit needs >= 4 grid points, got " +
                             std::to_string(n_points));
  }
  const double scale = median(mags);
  if (!(scale > 0.0)) throw InsufficientPoints("branch frequencies are all zero");

  std::optional<std::pair<double, double>> seed;
  if (!wm_guess.empty()) {
    seed = std::make_pair(std::sqrt(std::max(median(g2_guess), 0.0)), median(wm_guess));
  }

  AvoidedCrossingFit out;
  if (n_upper >= 3) out.upper = fit_branches(branch_points(track, BranchUse::UpperOnly),
                                             BranchUse::UpperOnly, scale, seed);
  if (n_lower >= 3) out.lower = fit_branches(branch_points(track, BranchUse::LowerOnly),
                                             BranchUse::LowerOnly, scale, seed);

  if (n_upper > 0 && n_lower > 0) {
    out.joint = true;
    out.best = fit_branches(branch_points(track, BranchUse::Both), BranchUse::Both, scale, seed);
  } else {
    out.joint = false;
    const auto use = n_upper > 0 ? BranchUse::UpperOnly : BranchUse::LowerOnly;
    const auto& single = use == BranchUse::UpperOnly ? out.upper : out.lower;
    out.best = single ? *single : fit_branches(branch_points(track, use), use, scale, seed);
  }
  return out;
}

// ---------------------------------------------------------------------------
// |g_y|(y0)

SinusoidFit fit_position_sinusoid(std::span<const double> y0, std::span<const double> g_abs,
                                  double lambda_c) {
  if (y0.size() != g_abs.size()) throw InsufficientPoints("y0 and |g| lengths differ");
  if (y0.size() < 6) {
    throw InsufficientPoints("sinusoid fit needs >= 6 points, got " + std::to_string(y0.size()));
  }
  const auto [mn, mx] = std::minmax_element(y0.begin(), y0.end());
  if (*mx - *mn < 0.25 * lambda_c * (1.0 - 1e-9)) {
    throw InsufficientPoints("y0 span below lambda_c/4");
  }
  const double k = kTwoPi / lambda_c;
  double g_scale = 0.0;
  for (double g : g_abs) g_scale = std::max(g_scale, std::abs(g));
  if (!(g_scale > 0.0)) g_scale = 1.0;

  // grid over the phase, amplitude solved linearly
  double best_phase = 0.0, best_g = 0.0, best_cost = std::numeric_limits<double>::infinity();
  constexpr int kGrid = 256;
  for (int i = 0; i < kGrid; ++i) {
    const double phase = std::numbers::pi * i / kGrid;
    double sa = 0.0, saa = 0.0;
    for (std::size_t j = 0; j < y0.size(); ++j) {
      const double a = std::abs(std::sin(k * y0[j] - phase));
      sa += a * g_abs[j];
      saa += a * a;
    }
    const double g = saa > 0.0 ? sa / saa : 0.0;
    double c = 0.0;
    for (std::size_t j = 0; j < y0.size(); ++j) {
      const double d = g_abs[j] - g * std::abs(std::sin(k * y0[j] - phase));
      c += d * d;
    }
    if (c < best_cost) {
      best_cost = c;
      best_phase = phase;
      best_g = g;
    }
  }

  lsq::ResidualFn fn = [&](const Vec& u, Vec& r) {
    for (std::size_t j = 0; j < y0.size(); ++j) {
      r[Eigen::Index(j)] = (g_abs[j] - u[0] * g_scale * std::abs(std::sin(k * y0[j] - u[1]))) / g_scale;
    }
  };
  Vec u0(2);
  u0 << best_g / g_scale, best_phase;
  lsq::Options lm;
  lm.rel_cost_tol = 1e-15;
  lm.grad_tol = 1e-15;
  const auto res = lsq::levenberg_marquardt(fn, u0, static_cast<Eigen::Index>(y0.size()), lm);

  // Analytic Jacobian for the covariance: |sin| has a kink at the zeros.
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(y0.size()), 2);
  for (std::size_t j = 0; j < y0.size(); ++j) {
    const double arg = k * y0[j] - res.x[1];
    const double s = std::sin(arg);
    jac(Eigen::Index(j), 0) = -std::abs(s);
    jac(Eigen::Index(j), 1) = res.x[0] * (s >= 0.0 ? 1.0 : -1.0) * std::cos(arg);
  }
  const double dof = double(y0.size()) - 2.0;
  SinusoidFit out;
  out.chi2_reduced = 2.0 * res.cost / dof;
  const auto cov = lsq::covariance(jac, out.chi2_reduced, 1e-8);

  double phase = std::fmod(res.x[1], std::numbers::pi);
  if (phase < 0.0) phase += std::numbers::pi;
  out.g_max = std::abs(res.x[0]) * g_scale;
  out.y_offset = phase / k;
  out.stderr_g = std::sqrt(cov.matrix(0, 0)) * g_scale;
  out.stderr_offset = std::sqrt(cov.matrix(1, 1)) / k;
  out.band_lo = out.g_max - 3.0 * out.stderr_g;
  out.band_hi = out.g_max + 3.0 * out.stderr_g;
  return out;
}

}  // namespace cavitas
