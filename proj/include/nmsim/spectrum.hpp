#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace nmsim {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

// Numerical failure of the spectral fit (residual too large or no convergence).
struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GaussianPeak {
    double center = 0.0;  // rad/s
    double weight = 0.0;  // dimensionless, mixture weights sum to 1
    double width = 0.0;   // rad/s (standard deviation)
};

// Environment frequency distribution |f(w)|^2 as a normalized Gaussian mixture.
class GaussianMixtureSpectrum {
public:
    explicit GaussianMixtureSpectrum(std::vector<GaussianPeak> peaks);

    static GaussianMixtureSpectrum single(double center, double width);
    // Two equal-width peaks split by delta_omega around center_omega, with
    // weights 1/(1+A) and A/(1+A). A == 0 degenerates to the single low peak.
    static GaussianMixtureSpectrum two_peak(double relative_amplitude, double width,
                                            double delta_omega, double center_omega);

    const std::vector<GaussianPeak>& peaks() const { return peaks_; }
    double density(double omega) const;

    nlohmann::json to_json() const;
    static GaussianMixtureSpectrum from_json(const nlohmann::json& j);

private:
    std::vector<GaussianPeak> peaks_;
};

// Ratio weight_2/weight_1 with the two peaks ordered by ascending center.
double relative_amplitude(const GaussianMixtureSpectrum& m);

// Normalized spectral density sampled on a strictly increasing grid;
// trapezoidal integral equals 1 within 1e-9.
class SampledSpectrum {
public:
    SampledSpectrum(std::vector<double> grid, std::vector<double> values);

    // Normalizes raw nonnegative samples by their trapezoidal integral.
    static SampledSpectrum from_density(std::vector<double> grid, std::vector<double> raw);
    static SampledSpectrum synthesize(const GaussianMixtureSpectrum& m,
                                      std::vector<double> grid);

    std::span<const double> grid() const { return grid_; }
    std::span<const double> values() const { return values_; }
    double max_spacing() const;

    std::string to_csv() const;
    static SampledSpectrum from_csv(const std::string& text);

private:
    std::vector<double> grid_;
    std::vector<double> values_;
};

// Uniform grid covering the mixture's support (centers +- span_sigmas widths).
std::vector<double> default_mixture_grid(const GaussianMixtureSpectrum& m,
                                         int points = 20001, double span_sigmas = 10.0);

enum class FilterShape { gaussian, lorentzian };

struct CavityConfig {
    double thickness = 0.04e-3;         // m
    double reflectivity = 0.85;         // per-surface reflection probability
    double refractive_index = 1.455;    // fused silica near 702 nm
    double tilt_deg = 0.0;
    double filter_center = 702e-9;      // m
    double filter_fwhm = 4e-9;          // m
    double source_center = 702e-9;      // m
    double phase_offset = 0.0;          // rad, comb calibration at theta = 0
    double broadening_sigma = 2.6e12;   // rad/s, instrument/divergence smearing
    FilterShape filter_shape = FilterShape::gaussian;

    void validate() const;
};

// Snell: sin(theta) = n sin(theta_r).
double internal_refraction_angle(const CavityConfig& cfg);

// delta = 2 n d w cos(theta_r)/c + phase_offset.
double round_trip_phase(const CavityConfig& cfg, double omega);

// Airy transmission (1-R)^2 / (1 - 2R cos(delta) + R^2), in (0, 1].
double airy_transmission(const CavityConfig& cfg, double omega);

// Free spectral range pi c / (n d cos(theta_r)) in rad/s.
double free_spectral_range(const CavityConfig& cfg);

std::vector<double> default_cavity_grid(const CavityConfig& cfg, int points = 4001,
                                        double span_fwhm = 3.0);

// Broadened Airy comb times the filter envelope, with only the two
// largest-weight transmission peaks retained, renormalized to unit integral.
SampledSpectrum cavity_spectrum(const CavityConfig& cfg, std::span<const double> grid);

struct TwoGaussianFit {
    GaussianMixtureSpectrum mixture;  // one peak when the input is single-peaked
    double weight_low = 0.0;          // raw fitted weights ordered by center
    double weight_high = 0.0;
    double residual_l2 = 0.0;          // integral-sense L2 norm of model - data
    double relative_residual = 0.0;    // residual_l2 / L2 norm of data
    int iterations = 0;
    bool degenerate = false;
};

// Least-squares fit of two equal-width Gaussians (or one, for single-peaked
// inputs). Throws FitError when the optimizer stalls or the relative residual
// exceeds 10%; rejects inputs with more than two maxima above 1% of the peak.
TwoGaussianFit fit_two_gaussians(const SampledSpectrum& s);

}  // namespace nmsim
