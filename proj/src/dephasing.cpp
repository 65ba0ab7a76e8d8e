#include "nmsim/dephasing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "nmsim/io.hpp"

namespace nmsim {

namespace {
constexpr double kKappaTol = 1e-9;
}

void OpenSystemConfig::validate() const {
    if (!std::isfinite(n_h) || !std::isfinite(n_v))
        throw std::invalid_argument("open system: indices must be finite");
    if (!(lambda0 > 0.0)) throw std::invalid_argument("open system: lambda0 must be > 0");
    if (delta_n() == 0.0)
        throw std::invalid_argument("open system: birefringence must be nonzero");
}

TimeGrid::TimeGrid(std::vector<double> times) : times_(std::move(times)) {
    if (times_.empty()) throw std::invalid_argument("time grid: empty");
    if (times_.front() != 0.0) throw std::invalid_argument("time grid: first entry must be 0");
    for (std::size_t i = 0; i + 1 < times_.size(); ++i)
        if (!(times_[i] < times_[i + 1]))
            throw std::invalid_argument("time grid: must be strictly increasing");
}

TimeGrid TimeGrid::from_times(std::vector<double> times) { return TimeGrid(std::move(times)); }

TimeGrid TimeGrid::from_plate_lengths(std::vector<double> lengths_m) {
    for (double& v : lengths_m) v /= kSpeedOfLight;
    return TimeGrid(std::move(lengths_m));
}

TimeGrid TimeGrid::from_path_difference(std::vector<double> dnl_over_lambda0,
                                        const OpenSystemConfig& cfg) {
    cfg.validate();
    const double scale = cfg.lambda0 / (cfg.delta_n() * kSpeedOfLight);
    for (double& v : dnl_over_lambda0) v *= scale;
    return TimeGrid(std::move(dnl_over_lambda0));
}

TimeGrid TimeGrid::uniform(double t_max, int points) {
    if (points < 2) throw std::invalid_argument("time grid: need >= 2 points");
    if (!(t_max > 0.0)) throw std::invalid_argument("time grid: t_max must be > 0");
    std::vector<double> t(points);
    for (int i = 0; i < points; ++i)
        t[i] = t_max * static_cast<double>(i) / static_cast<double>(points - 1);
    return TimeGrid(std::move(t));
}

std::vector<double> TimeGrid::path_difference_over_lambda0(const OpenSystemConfig& cfg) const {
    std::vector<double> x(times_.size());
    const double scale = cfg.delta_n() * kSpeedOfLight / cfg.lambda0;
    for (std::size_t i = 0; i < times_.size(); ++i) x[i] = scale * times_[i];
    return x;
}

TimeGrid default_measure_grid(const GaussianMixtureSpectrum& m, const OpenSystemConfig& cfg,
                              double periods, int points) {
    cfg.validate();
    if (!(periods > 0.0)) throw std::invalid_argument("measure grid: periods must be > 0");
    const double dn = std::abs(cfg.delta_n());
    double t_max;
    if (m.peaks().size() >= 2) {
        double lo = m.peaks().front().center, hi = lo;
        for (const auto& p : m.peaks()) {
            lo = std::min(lo, p.center);
            hi = std::max(hi, p.center);
        }
        t_max = periods * 2.0 * std::numbers::pi / ((hi - lo) * dn);
    } else {
        // decay window: |kappa| = exp(-sigma^2 x^2/2) falls to ~3e-4 at 4/sigma
        t_max = periods * 4.0 / (m.peaks().front().width * dn);
    }
    return TimeGrid::uniform(t_max, points);
}

DecoherenceTrajectory::DecoherenceTrajectory(TimeGrid grid, std::vector<complexd> kappa,
                                             OpenSystemConfig cfg,
                                             std::optional<double> quadrature_error)
    : grid_(std::move(grid)), kappa_(std::move(kappa)), cfg_(cfg), quad_error_(quadrature_error) {
    cfg_.validate();
    if (kappa_.size() != grid_.size())
        throw std::invalid_argument("trajectory: kappa/grid size mismatch");
    if (std::abs(kappa_.front() - complexd(1.0, 0.0)) > kKappaTol)
        throw std::invalid_argument("trajectory: kappa(0) must be 1 (spectrum normalized?)");
    for (const complexd& k : kappa_)
        if (!(std::abs(k) <= 1.0 + kKappaTol))
            throw std::invalid_argument("trajectory: |kappa| exceeds 1");
}

std::vector<double> DecoherenceTrajectory::modulus() const {
    std::vector<double> m(kappa_.size());
    for (std::size_t i = 0; i < kappa_.size(); ++i) m[i] = std::abs(kappa_[i]);
    return m;
}

std::string DecoherenceTrajectory::to_csv() const {
    const auto x = grid_.path_difference_over_lambda0(cfg_);
    std::ostringstream out;
    out << "x_over_lambda0,re_kappa,im_kappa\n";
    for (std::size_t i = 0; i < kappa_.size(); ++i)
        out << io::format_g17(x[i]) << ',' << io::format_g17(kappa_[i].real()) << ','
            << io::format_g17(kappa_[i].imag()) << '\n';
    return out.str();
}

DecoherenceTrajectory kappa_closed_form(const GaussianMixtureSpectrum& m,
                                        const OpenSystemConfig& cfg, const TimeGrid& grid) {
    cfg.validate();
    if (m.peaks().size() > 2)
        throw std::invalid_argument(
            "kappa_closed_form: stated for one- or two-peak mixtures; use quadrature");
    const double dn = cfg.delta_n();
    std::vector<complexd> kappa(grid.size());
    const auto t = grid.times();
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double x = dn * t[i];
        complexd acc(0.0, 0.0);
        for (const auto& p : m.peaks()) {
            const double damp = std::exp(-0.5 * p.width * p.width * x * x);
            acc += p.weight * damp * std::polar(1.0, p.center * x);
        }
        kappa[i] = acc;
    }
    return DecoherenceTrajectory(grid, std::move(kappa), cfg);
}

namespace {

// Trapezoid over a stride-s subsampling of the spectrum (s = 1 is the full rule).
complexd fourier_trapezoid(std::span<const double> w, std::span<const double> f, double x,
                           std::size_t stride) {
    complexd acc(0.0, 0.0);
    std::size_t prev = 0;
    for (std::size_t j = stride; j < w.size(); j += stride) {
        const double h = w[j] - w[prev];
        const complexd a = f[prev] * std::polar(1.0, w[prev] * x);
        const complexd b = f[j] * std::polar(1.0, w[j] * x);
        acc += 0.5 * h * (a + b);
        prev = j;
    }
    if (prev + 1 < w.size()) {
        const std::size_t j = w.size() - 1;
        const double h = w[j] - w[prev];
        acc += 0.5 * h *
               (f[prev] * std::polar(1.0, w[prev] * x) + f[j] * std::polar(1.0, w[j] * x));
    }
    return acc;
}

}  // namespace

DecoherenceTrajectory kappa_quadrature(const SampledSpectrum& s, const OpenSystemConfig& cfg,
                                       const TimeGrid& grid, ExecPolicy policy) {
    cfg.validate();
    const double dn = cfg.delta_n();
    const double t_max = grid.times().back();
    const double worst_phase_step = s.max_spacing() * std::abs(dn) * t_max;
    if (worst_phase_step > std::numbers::pi / 4.0)
        throw AliasingError("kappa_quadrature: omega grid too coarse for t_max (phase step " +
                            io::format_g17(worst_phase_step) + " rad > pi/4)");

    const auto w = s.grid();
    const auto f = s.values();
    const auto t = grid.times();
    std::vector<complexd> kappa(t.size());
    std::vector<double> err(t.size());
    parallel_for(static_cast<std::int64_t>(t.size()), policy, [&](std::int64_t i) {
        const double x = dn * t[i];
        const complexd fine = fourier_trapezoid(w, f, x, 1);
        const complexd coarse = fourier_trapezoid(w, f, x, 2);
        kappa[i] = fine;
        err[i] = std::abs(fine - coarse) / 3.0;  // h^2 Richardson estimate
    });
    const double est = *std::max_element(err.begin(), err.end());
    return DecoherenceTrajectory(grid, std::move(kappa), cfg, est);
}

QubitState apply_map(complexd kappa, const QubitState& rho0) {
    if (!(std::abs(kappa) <= 1.0 + kKappaTol))
        throw std::invalid_argument("apply_map: |kappa| > 1 breaks complete positivity");
    Eigen::Matrix2cd m = rho0.matrix();
    m(0, 1) *= std::conj(kappa);
    m(1, 0) = std::conj(m(0, 1));
    return QubitState(m);
}

TwoQubitState extend_to_ancilla(complexd kappa, const TwoQubitState& rho0) {
    if (!(std::abs(kappa) <= 1.0 + kKappaTol))
        throw std::invalid_argument("extend_to_ancilla: |kappa| > 1 breaks complete positivity");
    Eigen::Matrix4cd m = rho0.matrix();
    // system = first factor: |H..><V..| block picks up conj(kappa)
    for (int r = 0; r < 2; ++r)
        for (int c = 2; c < 4; ++c) {
            m(r, c) *= std::conj(kappa);
            m(c, r) = std::conj(m(r, c));
        }
    return TwoQubitState(m);
}

double analytic_pair_distance(double a, complexd b, complexd kappa) {
    if (!(std::abs(kappa) <= 1.0 + kKappaTol))
        throw std::invalid_argument("analytic_pair_distance: |kappa| > 1");
    const double norm2 = a * a + std::norm(b);
    if (!(norm2 <= 1.0 + kKappaTol))
        throw std::invalid_argument(
            "analytic_pair_distance: (a, b) is not a difference of two valid states");
    return std::sqrt(a * a + std::norm(kappa * b));
}

}  // namespace nmsim
