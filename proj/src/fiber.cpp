#include "fq/fiber.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fq/fft.hpp"

namespace fq {

void FiberSpec::validate() const {
  if (!(alpha_db_per_km >= 0.0)) throw std::invalid_argument("fiber: alpha must be >= 0");
  if (!(length_km > 0.0)) throw std::invalid_argument("fiber: length must be > 0");
  if (!(step_km > 0.0)) throw std::invalid_argument("fiber: step must be > 0");
  const double ratio = length_km / step_km;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
    throw std::invalid_argument("fiber: step does not divide span length");
  }
}

int FiberSpec::steps() const { return static_cast<int>(std::lround(length_km / step_km)); }

double FiberSpec::alpha_per_km() const { return alpha_db_per_km * std::log(10.0) / 10.0; }

void LinkSpec::validate() const {
  fiber.validate();
  if (n_spans < 1) throw std::invalid_argument("link: n_spans must be >= 1");
  if (!(center_wavelength_nm > 0.0)) throw std::invalid_argument("link: wavelength must be > 0");
}

double LinkSpec::total_beta2_l() const {
  return beta2_from_D(fiber.dispersion_ps_nm_km, center_wavelength_nm) * fiber.length_km * n_spans;
}

LinkSpec link_preset(std::string_view name) {
  LinkSpec link;
  if (name == "twc_9x50") {
    link.fiber = {.alpha_db_per_km = 0.23, .dispersion_ps_nm_km = 2.8, .gamma_per_w_km = 2.5, .length_km = 50.0,
                  .step_km = 1.0};
    link.n_spans = 9;
  } else if (name == "ssmf_5x100") {
    link.fiber = {.alpha_db_per_km = 0.2, .dispersion_ps_nm_km = 17.0, .gamma_per_w_km = 1.2, .length_km = 100.0,
                  .step_km = 1.0};
    link.n_spans = 5;
  } else {
    throw std::invalid_argument("unknown link preset '" + std::string(name) + "'");
  }
  link.amp_noise_figure_db = 4.5;
  return link;
}

double beta2_from_D(double dispersion_ps_nm_km, double wavelength_nm) {
  if (!(wavelength_nm > 0.0)) throw std::invalid_argument("beta2_from_D: wavelength must be > 0");
  const double d_si = dispersion_ps_nm_km * 1e-12 / 1e-9;  // s / (m * km)
  const double lambda = wavelength_nm * 1e-9;
  return -d_si * lambda * lambda / (2.0 * kPi * kSpeedOfLight);
}

namespace {

bool edge_band_warning(const CVec& fx, const CVec& fy) {
  // Block-averaged power spectrum; flag when any block in the outer 5% of the
  // band on either side is within 3 dB of the strongest block.
  const std::size_t n = fx.size();
  const std::size_t block = std::max<std::size_t>(1, n / 512);
  const std::size_t nblocks = n / block;
  if (nblocks < 40) return false;
  std::vector<double> psd(nblocks, 0.0);
  for (std::size_t b = 0; b < nblocks; ++b) {
    for (std::size_t i = b * block; i < (b + 1) * block; ++i) psd[b] += std::norm(fx[i]) + std::norm(fy[i]);
  }
  // Bin order is 0..fs/2 then -fs/2..0, so the band edge sits at the middle.
  const double peak = *std::max_element(psd.begin(), psd.end());
  if (peak <= 0.0) return false;
  const std::size_t edge = nblocks / 20;
  for (std::size_t b = nblocks / 2 - edge; b < nblocks / 2 + edge; ++b) {
    if (psd[b] >= 0.5 * peak) return true;
  }
  return false;
}

}  // namespace

SignalFrame propagate_span(const SignalFrame& frame, const FiberSpec& fiber, double beta2_s2_per_km,
                           const SpanOptions& opts, SpanDiagnostics* diag) {
  fiber.validate();
  if (frame.samples_x.size() != frame.samples_y.size()) {
    throw std::invalid_argument("propagate_span: polarization length mismatch");
  }
  const std::size_t n = frame.size();
  const int steps = fiber.steps();
  const double h = fiber.length_km / steps;
  const double alpha = fiber.alpha_per_km();
  const double h_eff = alpha > 0.0 ? 2.0 * std::sinh(alpha * h / 2.0) / alpha : h;
  const double nl_coeff = fiber.gamma_per_w_km * opts.manakov_factor * h_eff;

  const auto w = angular_frequency_grid(n, frame.sample_rate());
  CVec half(n);
  for (std::size_t k = 0; k < n; ++k) {
    half[k] = std::exp(cplx(-alpha / 2.0, 0.5 * beta2_s2_per_km * w[k] * w[k]) * (h / 2.0));
  }

  SignalFrame out = frame;
  if (diag != nullptr) diag->power_in = mean_power(frame);
  Fft fft(n);
  CVec& x = out.samples_x;
  CVec& y = out.samples_y;
  fft.forward(x);
  fft.forward(y);
  std::vector<double> mag;
  // Adjacent linear half steps are merged into one full step.
  CVec full(n);
  for (std::size_t k = 0; k < n; ++k) full[k] = half[k] * half[k];
  for (std::size_t k = 0; k < n; ++k) {
    x[k] *= half[k];
    y[k] *= half[k];
  }
  for (int s = 0; s < steps; ++s) {
    fft.inverse(x);
    fft.inverse(y);
    if (opts.check_invariants) {
      mag.resize(n);
      for (std::size_t i = 0; i < n; ++i) mag[i] = std::norm(x[i]) + std::norm(y[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double phi = nl_coeff * (std::norm(x[i]) + std::norm(y[i]));
      const cplx rot(std::cos(phi), std::sin(phi));
      x[i] *= rot;
      y[i] *= rot;
    }
    if (opts.check_invariants) {
      for (std::size_t i = 0; i < n; ++i) {
        const double m = std::norm(x[i]) + std::norm(y[i]);
        if (std::abs(m - mag[i]) > 1e-12 * std::max(mag[i], 1e-300)) {
          throw InvalidState("nonlinear step changed a sample magnitude");
        }
      }
    }
    fft.forward(x);
    fft.forward(y);
    const CVec& lin = s + 1 == steps ? half : full;
    for (std::size_t k = 0; k < n; ++k) {
      x[k] *= lin[k];
      y[k] *= lin[k];
    }
  }
  if (diag != nullptr) {
    diag->aliasing_warning = edge_band_warning(x, y);
    diag->steps = steps;
  }
  fft.inverse(x);
  fft.inverse(y);
  if (diag != nullptr) diag->power_out = mean_power(out);
  return out;
}

double ase_variance_per_pol(double gain_db, double nf_db, double wavelength_nm, double sample_rate) {
  const double g = db_to_linear(gain_db);
  const double nu = kSpeedOfLight / (wavelength_nm * 1e-9);
  const double psd = (g - 1.0) * kPlanck * nu * db_to_linear(nf_db) / 2.0;
  return psd * sample_rate;
}

SignalFrame amplify_with_ase(const SignalFrame& frame, double gain_db, double nf_db, double wavelength_nm,
                             Rng* rng) {
  SignalFrame out = frame;
  const double a = std::pow(10.0, gain_db / 20.0);
  for (auto p : {Polarization::X, Polarization::Y}) {
    for (auto& z : out.pol(p)) z *= a;
  }
  if (rng == nullptr) return out;
  const double sigma = std::sqrt(ase_variance_per_pol(gain_db, nf_db, wavelength_nm, frame.sample_rate()) / 2.0);
  for (auto p : {Polarization::X, Polarization::Y}) {
    for (auto& z : out.pol(p)) {
      const auto [re, im] = rng->normal_pair();
      z += cplx(sigma * re, sigma * im);
    }
  }
  return out;
}

std::pair<SignalFrame, PropagationTrace> propagate_link(const SignalFrame& frame, const LinkSpec& link,
                                                        bool check_invariants) {
  link.validate();
  const double beta2 = beta2_from_D(link.fiber.dispersion_ps_nm_km, link.center_wavelength_nm);
  const SpanOptions opts{.manakov_factor = link.manakov_factor, .check_invariants = check_invariants};
  Rng rng(link.noise_seed);
  PropagationTrace trace;
  SignalFrame cur = frame;
  for (int s = 0; s < link.n_spans; ++s) {
    SpanDiagnostics d;
    cur = propagate_span(cur, link.fiber, beta2, opts, &d);
    cur = amplify_with_ase(cur, link.gain_db(), link.amp_noise_figure_db, link.center_wavelength_nm,
                           link.ase_enabled ? &rng : nullptr);
    trace.span_power_in.push_back(d.power_in);
    trace.span_power_out.push_back(d.power_out);
    trace.total_steps += d.steps;
    trace.aliasing_warning = trace.aliasing_warning || d.aliasing_warning;
  }
  return {std::move(cur), std::move(trace)};
}

}  // namespace fq
