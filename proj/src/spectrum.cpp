#include "nmsim/spectrum.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "nmsim/io.hpp"

namespace nmsim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kFwhmToSigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)

double gaussian_density(double x, double center, double sigma) {
    const double u = (x - center) / sigma;
    return std::exp(-0.5 * u * u) / (sigma * std::sqrt(kTwoPi));
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i)
        acc += 0.5 * (x[i + 1] - x[i]) * (y[i] + y[i + 1]);
    return acc;
}

// Per-point trapezoid weights: integral == sum_i w_i y_i.
std::vector<double> trapezoid_weights(std::span<const double> x) {
    std::vector<double> w(x.size(), 0.0);
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        const double h = 0.5 * (x[i + 1] - x[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    return w;
}

}  // namespace

GaussianMixtureSpectrum::GaussianMixtureSpectrum(std::vector<GaussianPeak> peaks)
    : peaks_(std::move(peaks)) {
    if (peaks_.empty()) throw std::invalid_argument("mixture: no peaks");
    double sum = 0.0;
    for (const auto& p : peaks_) {
        if (!(p.weight > 0.0)) throw std::invalid_argument("mixture: weights must be positive");
        if (!(p.width > 0.0)) throw std::invalid_argument("mixture: widths must be positive");
        if (!std::isfinite(p.center)) throw std::invalid_argument("mixture: center not finite");
        sum += p.weight;
    }
    if (!(std::abs(sum - 1.0) <= 1e-12))
        throw std::invalid_argument("mixture: weights must sum to 1");
}

GaussianMixtureSpectrum GaussianMixtureSpectrum::single(double center, double width) {
    return GaussianMixtureSpectrum({GaussianPeak{center, 1.0, width}});
}

GaussianMixtureSpectrum GaussianMixtureSpectrum::two_peak(double relative_amplitude,
                                                          double width, double delta_omega,
                                                          double center_omega) {
    if (!(relative_amplitude >= 0.0))
        throw std::invalid_argument("two_peak: relative amplitude must be >= 0");
    const double w1 = center_omega - 0.5 * delta_omega;
    const double w2 = center_omega + 0.5 * delta_omega;
    if (relative_amplitude == 0.0) return single(w1, width);
    const double a1 = 1.0 / (1.0 + relative_amplitude);
    const double a2 = relative_amplitude / (1.0 + relative_amplitude);
    return GaussianMixtureSpectrum(
        {GaussianPeak{w1, a1, width}, GaussianPeak{w2, a2, width}});
}

double GaussianMixtureSpectrum::density(double omega) const {
    double acc = 0.0;
    for (const auto& p : peaks_) acc += p.weight * gaussian_density(omega, p.center, p.width);
    return acc;
}

nlohmann::json GaussianMixtureSpectrum::to_json() const {
    nlohmann::json j;
    j["centers"] = nlohmann::json::array();
    j["weights"] = nlohmann::json::array();
    for (const auto& p : peaks_) {
        j["centers"].push_back(p.center);
        j["weights"].push_back(p.weight);
    }
    j["width"] = peaks_.front().width;
    return j;
}

GaussianMixtureSpectrum GaussianMixtureSpectrum::from_json(const nlohmann::json& j) {
    const auto centers = j.at("centers").get<std::vector<double>>();
    const auto weights = j.at("weights").get<std::vector<double>>();
    const double width = j.at("width").get<double>();
    if (centers.size() != weights.size())
        throw std::invalid_argument("mixture json: centers/weights size mismatch");
    std::vector<GaussianPeak> peaks;
    for (std::size_t i = 0; i < centers.size(); ++i)
        peaks.push_back(GaussianPeak{centers[i], weights[i], width});
    return GaussianMixtureSpectrum(std::move(peaks));
}

double relative_amplitude(const GaussianMixtureSpectrum& m) {
    if (m.peaks().size() != 2)
        throw std::invalid_argument("relative_amplitude: exactly two peaks required");
    const auto& p = m.peaks();
    const std::size_t lo = p[0].center <= p[1].center ? 0 : 1;
    return p[1 - lo].weight / p[lo].weight;
}

SampledSpectrum::SampledSpectrum(std::vector<double> grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (grid_.size() < 2 || grid_.size() != values_.size())
        throw std::invalid_argument("sampled spectrum: bad grid/value sizes");
    for (std::size_t i = 0; i + 1 < grid_.size(); ++i)
        if (!(grid_[i] < grid_[i + 1]))
            throw std::invalid_argument("sampled spectrum: grid must be strictly increasing");
    for (double v : values_)
        if (!(v >= 0.0)) throw std::invalid_argument("sampled spectrum: negative density");
    const double integral = trapezoid(grid_, values_);
    if (!(std::abs(integral - 1.0) <= 1e-9))
        throw std::invalid_argument("sampled spectrum: integral differs from 1");
}

SampledSpectrum SampledSpectrum::from_density(std::vector<double> grid,
                                              std::vector<double> raw) {
    const double integral = trapezoid(grid, raw);
    if (!(integral > 1e-300) || !std::isfinite(integral))
        throw std::invalid_argument("sampled spectrum: vanishing or non-finite integral");
    for (double& v : raw) v /= integral;
    return SampledSpectrum(std::move(grid), std::move(raw));
}

SampledSpectrum SampledSpectrum::synthesize(const GaussianMixtureSpectrum& m,
                                            std::vector<double> grid) {
    std::vector<double> vals(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) vals[i] = m.density(grid[i]);
    return from_density(std::move(grid), std::move(vals));
}

double SampledSpectrum::max_spacing() const {
    double h = 0.0;
    for (std::size_t i = 0; i + 1 < grid_.size(); ++i) h = std::max(h, grid_[i + 1] - grid_[i]);
    return h;
}

std::string SampledSpectrum::to_csv() const {
    std::ostringstream out;
    out << "omega_rad_per_s,density\n";
    for (std::size_t i = 0; i < grid_.size(); ++i)
        out << io::format_g17(grid_[i]) << ',' << io::format_g17(values_[i]) << '\n';
    return out.str();
}

SampledSpectrum SampledSpectrum::from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<double> grid, vals;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        const auto cells = io::split_csv_line(line);
        if (cells.size() != 2) throw std::invalid_argument("spectrum csv: expected 2 columns");
        grid.push_back(std::stod(cells[0]));
        vals.push_back(std::stod(cells[1]));
    }
    return SampledSpectrum(std::move(grid), std::move(vals));
}

std::vector<double> default_mixture_grid(const GaussianMixtureSpectrum& m, int points,
                                         double span_sigmas) {
    if (points < 2) throw std::invalid_argument("default_mixture_grid: need >= 2 points");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& p : m.peaks()) {
        lo = std::min(lo, p.center - span_sigmas * p.width);
        hi = std::max(hi, p.center + span_sigmas * p.width);
    }
    std::vector<double> grid(points);
    const double h = (hi - lo) / (points - 1);
    for (int i = 0; i < points; ++i) grid[i] = lo + h * i;
    return grid;
}

void CavityConfig::validate() const {
    if (!(thickness > 0.0)) throw std::invalid_argument("cavity: thickness must be > 0");
    if (!(reflectivity > 0.0 && reflectivity < 1.0))
        throw std::invalid_argument("cavity: reflectivity must be in (0,1)");
    if (!(refractive_index >= 1.0))
        throw std::invalid_argument("cavity: refractive index must be >= 1");
    if (!(tilt_deg >= 0.0 && tilt_deg < 90.0))
        throw std::invalid_argument("cavity: tilt must be in [0, 90) degrees");
    if (!(filter_center > 0.0) || !(filter_fwhm > 0.0) || !(source_center > 0.0))
        throw std::invalid_argument("cavity: filter/source wavelengths must be > 0");
    if (!(broadening_sigma >= 0.0))
        throw std::invalid_argument("cavity: broadening sigma must be >= 0");
    if (!std::isfinite(phase_offset)) throw std::invalid_argument("cavity: bad phase offset");
}

double internal_refraction_angle(const CavityConfig& cfg) {
    const double theta = cfg.tilt_deg * std::numbers::pi / 180.0;
    return std::asin(std::sin(theta) / cfg.refractive_index);
}

double round_trip_phase(const CavityConfig& cfg, double omega) {
    const double cos_r = std::cos(internal_refraction_angle(cfg));
    return 2.0 * cfg.refractive_index * cfg.thickness * omega * cos_r / kSpeedOfLight +
           cfg.phase_offset;
}

double airy_transmission(const CavityConfig& cfg, double omega) {
    cfg.validate();
    const double R = cfg.reflectivity;
    const double delta = round_trip_phase(cfg, omega);
    return (1.0 - R) * (1.0 - R) / (1.0 - 2.0 * R * std::cos(delta) + R * R);
}

double free_spectral_range(const CavityConfig& cfg) {
    const double cos_r = std::cos(internal_refraction_angle(cfg));
    return std::numbers::pi * kSpeedOfLight / (cfg.refractive_index * cfg.thickness * cos_r);
}

std::vector<double> default_cavity_grid(const CavityConfig& cfg, int points, double span_fwhm) {
    cfg.validate();
    if (points < 2) throw std::invalid_argument("default_cavity_grid: need >= 2 points");
    const double wc = kTwoPi * kSpeedOfLight / cfg.filter_center;
    const double fwhm_w =
        kTwoPi * kSpeedOfLight / (cfg.filter_center * cfg.filter_center) * cfg.filter_fwhm;
    const double lo = wc - span_fwhm * fwhm_w;
    const double hi = wc + span_fwhm * fwhm_w;
    std::vector<double> grid(points);
    const double h = (hi - lo) / (points - 1);
    for (int i = 0; i < points; ++i) grid[i] = lo + h * i;
    return grid;
}

namespace {

double filter_envelope(const CavityConfig& cfg, double omega) {
    const double lam = kTwoPi * kSpeedOfLight / omega;
    const double d = lam - cfg.filter_center;
    if (cfg.filter_shape == FilterShape::gaussian) {
        const double s = cfg.filter_fwhm / kFwhmToSigma;
        return std::exp(-0.5 * (d / s) * (d / s));
    }
    const double g = 0.5 * cfg.filter_fwhm;
    return 1.0 / (1.0 + (d / g) * (d / g));
}

// Gaussian smearing of the transmission comb; kernel truncated at 6 sigma and
// renormalized per point so edges keep unit response.
std::vector<double> broaden(std::span<const double> grid, std::span<const double> y,
                            double sigma) {
    if (sigma <= 0.0) return std::vector<double>(y.begin(), y.end());
    const auto tw = trapezoid_weights(grid);
    const double support = 6.0 * sigma;
    std::vector<double> out(y.size(), 0.0);
    std::size_t lo = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        while (lo < grid.size() && grid[lo] < grid[i] - support) ++lo;
        double acc = 0.0, mass = 0.0;
        for (std::size_t j = lo; j < grid.size() && grid[j] <= grid[i] + support; ++j) {
            const double k = tw[j] * gaussian_density(grid[j], grid[i], sigma);
            acc += k * y[j];
            mass += k;
        }
        out[i] = mass > 0.0 ? acc / mass : y[i];
    }
    return out;
}

}  // namespace

SampledSpectrum cavity_spectrum(const CavityConfig& cfg, std::span<const double> grid) {
    cfg.validate();
    if (grid.size() < 16) throw std::invalid_argument("cavity_spectrum: grid too small");

    std::vector<double> airy(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) airy[i] = airy_transmission(cfg, grid[i]);
    std::vector<double> smooth = broaden(grid, airy, cfg.broadening_sigma);

    std::vector<double> y(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) y[i] = smooth[i] * filter_envelope(cfg, grid[i]);

    const double raw_integral = trapezoid(grid, y);
    if (!(raw_integral > 1e-300))
        throw std::invalid_argument("cavity_spectrum: grid misses the transmission peaks");

    // keep at most the two largest-weight transmission peaks
    std::vector<std::size_t> cuts{0};
    for (std::size_t i = 1; i + 1 < y.size(); ++i)
        if (y[i] <= y[i - 1] && y[i] < y[i + 1]) cuts.push_back(i);
    cuts.push_back(y.size() - 1);

    struct Segment {
        std::size_t begin, end;
        double mass;
    };
    std::vector<Segment> segs;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        Segment seg{cuts[s], cuts[s + 1], 0.0};
        seg.mass = trapezoid(grid.subspan(seg.begin, seg.end - seg.begin + 1),
                             std::span<const double>(y).subspan(seg.begin, seg.end - seg.begin + 1));
        segs.push_back(seg);
    }
    std::sort(segs.begin(), segs.end(),
              [](const Segment& a, const Segment& b) { return a.mass > b.mass; });

    std::vector<double> kept(y.size(), 0.0);
    const std::size_t n_keep = std::min<std::size_t>(2, segs.size());
    for (std::size_t s = 0; s < n_keep; ++s)
        for (std::size_t i = segs[s].begin; i <= segs[s].end; ++i) kept[i] = y[i];

    return SampledSpectrum::from_density(std::vector<double>(grid.begin(), grid.end()),
                                         std::move(kept));
}

// ---------------------------------------------------------------------------
// two-Gaussian least squares (Levenberg-Marquardt, analytic Jacobian)
// ---------------------------------------------------------------------------

namespace {

struct PeakSeed {
    double center;
    double mass;
    double width;
};

// Local maxima above 1% of the global peak, with segment moments for seeding.
std::vector<PeakSeed> peak_seeds(std::span<const double> x, std::span<const double> y) {
    const double ymax = *std::max_element(y.begin(), y.end());
    if (!(ymax > 0.0)) throw std::invalid_argument("fit: all-zero spectrum");

    std::vector<std::size_t> maxima;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const bool up = i == 0 || y[i] > y[i - 1];
        const bool down = i + 1 == y.size() || y[i] >= y[i + 1];
        if (up && down && y[i] >= 0.01 * ymax) maxima.push_back(i);
    }
    if (maxima.size() > 2)
        throw std::invalid_argument("fit: more than two maxima above 1% of peak");
    if (maxima.empty()) throw std::invalid_argument("fit: no maxima found");

    // split at the minimum between the two maxima
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    if (maxima.size() == 1) {
        ranges.emplace_back(0, y.size() - 1);
    } else {
        std::size_t imin = maxima[0];
        for (std::size_t i = maxima[0]; i <= maxima[1]; ++i)
            if (y[i] < y[imin]) imin = i;
        ranges.emplace_back(0, imin);
        ranges.emplace_back(imin, y.size() - 1);
    }

    std::vector<PeakSeed> seeds;
    for (std::size_t r = 0; r < ranges.size(); ++r) {
        const auto [a, b] = ranges[r];
        double m0 = 0.0, m1 = 0.0, m2 = 0.0;
        for (std::size_t i = a; i < b; ++i) {
            const double h = x[i + 1] - x[i];
            const double xm = 0.5 * (x[i] + x[i + 1]);
            const double ym = 0.5 * (y[i] + y[i + 1]);
            m0 += h * ym;
            m1 += h * ym * xm;
            m2 += h * ym * xm * xm;
        }
        PeakSeed s;
        s.center = x[maxima[r]];
        s.mass = m0;
        const double mean = m0 > 0 ? m1 / m0 : s.center;
        const double var = m0 > 0 ? std::max(m2 / m0 - mean * mean, 0.0) : 0.0;
        s.width = std::sqrt(var);
        seeds.push_back(s);
    }
    return seeds;
}

struct LmResult {
    Eigen::VectorXd params;
    double ssr = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Generic damped Gauss-Newton over analytic residual/Jacobian callbacks.
template <typename EvalFn>
LmResult levenberg_marquardt(Eigen::VectorXd p, EvalFn&& eval, int max_iters) {
    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    eval(p, r, &J);
    double ssr = r.squaredNorm();
    double lambda = 1e-3;

    LmResult out;
    for (int it = 0; it < max_iters; ++it) {
        out.iterations = it + 1;
        const Eigen::MatrixXd JtJ = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;

        bool stepped = false;
        for (int tries = 0; tries < 12; ++tries) {
            Eigen::MatrixXd A = JtJ;
            for (int i = 0; i < A.rows(); ++i)
                A(i, i) += lambda * std::max(JtJ(i, i), 1e-30);
            const Eigen::VectorXd step = A.ldlt().solve(-g);
            Eigen::VectorXd p_new = p + step;
            Eigen::VectorXd r_new;
            eval(p_new, r_new, nullptr);
            const double ssr_new = r_new.squaredNorm();
            if (ssr_new < ssr) {
                const double drop = ssr - ssr_new;
                p = std::move(p_new);
                eval(p, r, &J);
                ssr = ssr_new;
                lambda = std::max(lambda / 3.0, 1e-14);
                stepped = true;
                if (drop <= 1e-14 * ssr + 1e-300) {
                    out.converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if (lambda > 1e14) break;
        }
        if (!stepped) {
            out.converged = true;  // stationary within damping range
            break;
        }
        if (out.converged) break;
    }
    out.params = std::move(p);
    out.ssr = ssr;
    return out;
}

double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

}  // namespace

TwoGaussianFit fit_two_gaussians(const SampledSpectrum& s) {
    const auto x = s.grid();
    const auto y = s.values();
    const auto tw = trapezoid_weights(x);
    std::vector<double> sqw(tw.size());
    for (std::size_t i = 0; i < tw.size(); ++i) sqw[i] = std::sqrt(tw[i]);

    double y_norm2 = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) y_norm2 += tw[i] * y[i] * y[i];
    const double y_norm = std::sqrt(y_norm2);

    auto seeds = peak_seeds(x, y);
    const double span = x.back() - x.front();
    const double h_min = span / static_cast<double>(x.size() - 1);

    if (seeds.size() == 1) {
        // single-Gaussian limit: the second weight is reported as zero
        const double s0 = std::clamp(seeds[0].width, h_min, 0.5 * span);
        Eigen::VectorXd p(2);
        p << seeds[0].center, std::log(s0);
        auto eval = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
            const double c = q(0), sg = std::exp(q(1));
            r.resize(static_cast<Eigen::Index>(x.size()));
            if (J) J->resize(static_cast<Eigen::Index>(x.size()), 2);
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double g = gaussian_density(x[i], c, sg);
                r(static_cast<Eigen::Index>(i)) = sqw[i] * (g - y[i]);
                if (J) {
                    const double u = (x[i] - c) / sg;
                    (*J)(static_cast<Eigen::Index>(i), 0) = sqw[i] * g * u / sg;
                    (*J)(static_cast<Eigen::Index>(i), 1) = sqw[i] * g * (u * u - 1.0);
                }
            }
        };
        const LmResult lm = levenberg_marquardt(p, eval, 300);
        if (!lm.converged) throw FitError("single-Gaussian fit did not converge");
        TwoGaussianFit fit{GaussianMixtureSpectrum::single(lm.params(0), std::exp(lm.params(1)))};
        fit.weight_low = 1.0;
        fit.weight_high = 0.0;
        fit.residual_l2 = std::sqrt(lm.ssr);
        fit.iterations = lm.iterations;
        fit.degenerate = true;
        fit.relative_residual = y_norm > 0 ? fit.residual_l2 / y_norm : 0.0;
        if (fit.relative_residual > 0.10)
            throw FitError("fit residual " + io::format_g17(fit.relative_residual) +
                           " exceeds 10% of spectrum norm");
        return fit;
    }
    {
        if (seeds[0].center > seeds[1].center) std::swap(seeds[0], seeds[1]);
        const double mass_total = seeds[0].mass + seeds[1].mass;
        const double w0 = std::clamp(mass_total > 0 ? seeds[0].mass / mass_total : 0.5,
                                     1e-3, 1.0 - 1e-3);
        const std::size_t dominant = seeds[0].mass >= seeds[1].mass ? 0 : 1;
        const double s0 = std::clamp(seeds[dominant].width, h_min, 0.5 * span);

        Eigen::VectorXd p(4);
        p << seeds[0].center, seeds[1].center, std::log(s0),
            std::log(w0 / (1.0 - w0));
        auto eval = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
            const double c1 = q(0), c2 = q(1), sg = std::exp(q(2));
            const double u = std::clamp(q(3), -35.0, 35.0);
            const double w1 = sigmoid(u), w2 = 1.0 - w1;
            r.resize(static_cast<Eigen::Index>(x.size()));
            if (J) J->resize(static_cast<Eigen::Index>(x.size()), 4);
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double g1 = gaussian_density(x[i], c1, sg);
                const double g2 = gaussian_density(x[i], c2, sg);
                r(static_cast<Eigen::Index>(i)) = sqw[i] * (w1 * g1 + w2 * g2 - y[i]);
                if (J) {
                    const double u1 = (x[i] - c1) / sg;
                    const double u2 = (x[i] - c2) / sg;
                    (*J)(static_cast<Eigen::Index>(i), 0) = sqw[i] * w1 * g1 * u1 / sg;
                    (*J)(static_cast<Eigen::Index>(i), 1) = sqw[i] * w2 * g2 * u2 / sg;
                    (*J)(static_cast<Eigen::Index>(i), 2) =
                        sqw[i] * (w1 * g1 * (u1 * u1 - 1.0) + w2 * g2 * (u2 * u2 - 1.0));
                    (*J)(static_cast<Eigen::Index>(i), 3) =
                        sqw[i] * (g1 - g2) * w1 * (1.0 - w1);
                }
            }
        };
        const LmResult lm = levenberg_marquardt(p, eval, 300);
        if (!lm.converged) throw FitError("two-Gaussian fit did not converge");

        double c1 = lm.params(0), c2 = lm.params(1);
        const double sg = std::exp(lm.params(2));
        double w1 = sigmoid(std::clamp(lm.params(3), -35.0, 35.0));
        double w2 = 1.0 - w1;
        if (c1 > c2) {
            std::swap(c1, c2);
            std::swap(w1, w2);
        }
        TwoGaussianFit fit{GaussianMixtureSpectrum(
            {GaussianPeak{c1, w1, sg}, GaussianPeak{c2, w2, sg}})};
        fit.weight_low = w1;
        fit.weight_high = w2;
        fit.residual_l2 = std::sqrt(lm.ssr);
        fit.iterations = lm.iterations;
        fit.relative_residual = y_norm > 0 ? fit.residual_l2 / y_norm : 0.0;
        if (fit.relative_residual > 0.10)
            throw FitError("fit residual " + io::format_g17(fit.relative_residual) +
                           " exceeds 10% of spectrum norm");
        return fit;
    }
}

}  // namespace nmsim
