#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fq/rng.hpp"
#include "fq/signal.hpp"

namespace fq {

inline constexpr double kManakovFactor = 8.0 / 9.0;

struct FiberSpec {
  double alpha_db_per_km = 0.2;
  double dispersion_ps_nm_km = 17.0;
  double gamma_per_w_km = 1.2;
  double length_km = 100.0;
  double step_km = 1.0;

  /// Throws std::invalid_argument when a field is out of range or the step
  /// grid does not divide the span length.
  void validate() const;
  int steps() const;
  /// Power attenuation coefficient in 1/km (natural units).
  double alpha_per_km() const;
  double loss_db() const { return alpha_db_per_km * length_km; }
};

struct LinkSpec {
  FiberSpec fiber;
  int n_spans = 5;
  double amp_noise_figure_db = 4.5;
  double center_wavelength_nm = 1550.0;
  std::uint64_t noise_seed = 1;
  bool ase_enabled = true;
  /// Scales gamma in the polarization-averaged nonlinear term; 8/9 or 1.
  double manakov_factor = kManakovFactor;

  void validate() const;
  /// Amplifier gain that exactly undoes one span's loss.
  double gain_db() const { return fiber.loss_db(); }
  /// Accumulated beta2 * L over all spans, s^2.
  double total_beta2_l() const;
};

/// Named presets "twc_9x50" and "ssmf_5x100"; throws std::invalid_argument
/// for any other name.
LinkSpec link_preset(std::string_view name);

/// beta2 = -D lambda^2 / (2 pi c), returned in s^2/km.
double beta2_from_D(double dispersion_ps_nm_km, double wavelength_nm);

struct SpanOptions {
  double manakov_factor = kManakovFactor;
  /// Verifies after every nonlinear step that per-sample magnitudes are
  /// unchanged; throws InvalidState on violation.
  bool check_invariants = false;
};

struct SpanDiagnostics {
  double power_in = 0.0;
  double power_out = 0.0;
  int steps = 0;
  /// Spectral content within 3 dB of the in-band peak near the band edge.
  bool aliasing_warning = false;
};

/// Symmetrized split-step solution of the Manakov system over one span.
/// Each step of length h applies exp[(-alpha/2 + i beta2/2 w^2) h/2] in the
/// frequency domain, then the nonlinear phase
/// exp[i gamma f (|Ex|^2 + |Ey|^2) h_eff] in time, then the second linear
/// half step. h_eff = 2 sinh(alpha h / 2) / alpha integrates the power decay
/// around the step midpoint, where the nonlinear operator is evaluated.
SignalFrame propagate_span(const SignalFrame& frame, const FiberSpec& fiber, double beta2_s2_per_km,
                           const SpanOptions& opts = {}, SpanDiagnostics* diag = nullptr);

/// ASE variance per polarization, W: (G - 1) h nu NF / 2 * sample_rate.
double ase_variance_per_pol(double gain_db, double nf_db, double wavelength_nm, double sample_rate);

/// Scales the field by 10^(gain_db/20) and, when rng is non-null, adds
/// circular complex Gaussian ASE of variance ase_variance_per_pol to each
/// polarization.
SignalFrame amplify_with_ase(const SignalFrame& frame, double gain_db, double nf_db, double wavelength_nm,
                             Rng* rng);

struct PropagationTrace {
  std::vector<double> span_power_in;
  std::vector<double> span_power_out;
  long total_steps = 0;
  bool aliasing_warning = false;
};

std::pair<SignalFrame, PropagationTrace> propagate_link(const SignalFrame& frame, const LinkSpec& link,
                                                        bool check_invariants = false);

}  // namespace fq
