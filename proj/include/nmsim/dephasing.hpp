#pragma once

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nmsim/exec.hpp"
#include "nmsim/qstate.hpp"
#include "nmsim/spectrum.hpp"

namespace nmsim {

// Quadrature refused: the omega grid cannot resolve exp(i w dn t) at t_max.
struct AliasingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OpenSystemConfig {
    double n_h = 1.53840;       // quartz ordinary index near 702 nm
    double n_v = 1.54746;       // extraordinary; delta_n = 0.00906
    double lambda0 = 702e-9;    // m, reference wavelength for path-difference units

    double delta_n() const { return n_v - n_h; }
    void validate() const;
};

// Interaction times t (s), strictly increasing from 0. Plate lengths map via
// t = L/c; the reported abscissa is the effective path difference dn*L/lambda0.
class TimeGrid {
public:
    static TimeGrid from_times(std::vector<double> times);
    static TimeGrid from_plate_lengths(std::vector<double> lengths_m);
    static TimeGrid from_path_difference(std::vector<double> dnl_over_lambda0,
                                         const OpenSystemConfig& cfg);
    static TimeGrid uniform(double t_max, int points);

    std::span<const double> times() const { return times_; }
    std::size_t size() const { return times_.size(); }

    // dn * c * t / lambda0
    std::vector<double> path_difference_over_lambda0(const OpenSystemConfig& cfg) const;

private:
    explicit TimeGrid(std::vector<double> times);
    std::vector<double> times_;
};

// One period 2 pi/(dw dn) of the beat between two peaks, or the Gaussian decay
// window for single-peak mixtures. Default sampling satisfies the >= 40 per
// period rule with a wide margin.
TimeGrid default_measure_grid(const GaussianMixtureSpectrum& m, const OpenSystemConfig& cfg,
                              double periods = 1.0, int points = 2001);

// kappa(t) sampled on a time grid; |kappa| <= 1 and kappa(0) = 1.
class DecoherenceTrajectory {
public:
    DecoherenceTrajectory(TimeGrid grid, std::vector<complexd> kappa, OpenSystemConfig cfg,
                          std::optional<double> quadrature_error = std::nullopt);

    const TimeGrid& grid() const { return grid_; }
    std::span<const complexd> kappa() const { return kappa_; }
    const OpenSystemConfig& config() const { return cfg_; }
    std::optional<double> quadrature_error_estimate() const { return quad_error_; }

    std::vector<double> modulus() const;

    // columns: x_over_lambda0, re_kappa, im_kappa
    std::string to_csv() const;

private:
    TimeGrid grid_;
    std::vector<complexd> kappa_;
    OpenSystemConfig cfg_;
    std::optional<double> quad_error_;
};

// kappa(t) = sum_k w_k exp(i w_k dn t - sigma_k^2 (dn t)^2 / 2); restricted to
// one- and two-peak mixtures (use quadrature beyond that).
DecoherenceTrajectory kappa_closed_form(const GaussianMixtureSpectrum& m,
                                        const OpenSystemConfig& cfg, const TimeGrid& grid);

// Eq-free route: trapezoidal Fourier transform of the sampled distribution.
DecoherenceTrajectory kappa_quadrature(const SampledSpectrum& s, const OpenSystemConfig& cfg,
                                       const TimeGrid& grid,
                                       ExecPolicy policy = ExecPolicy::parallel);

// Dephasing channel: populations fixed, rho_HV -> conj(kappa) rho_HV.
QubitState apply_map(complexd kappa, const QubitState& rho0);

// (Phi (x) I) on the system tensor factor.
TwoQubitState extend_to_ancilla(complexd kappa, const TwoQubitState& rho0);

// sqrt(a^2 + |kappa b|^2) where a is the population difference and b the
// coherence difference of an initial pair; requires a^2 + |b|^2 <= 1.
double analytic_pair_distance(double a, complexd b, complexd kappa);

}  // namespace nmsim
