#include "nmsim/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nmsim {

namespace {
constexpr double kPlateauTol = 1e-12;
}

TrajectoryAnalysis analyze_trajectory(std::span<const double> grid,
                                      std::span<const double> values, double min_rise) {
    if (grid.size() != values.size())
        throw std::invalid_argument("analyze_trajectory: grid/value size mismatch");
    if (grid.size() < 2) throw std::invalid_argument("analyze_trajectory: need >= 2 points");
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
        if (!(grid[i] < grid[i + 1]))
            throw std::invalid_argument("analyze_trajectory: grid must be strictly increasing");
    if (min_rise < 0.0) throw std::invalid_argument("analyze_trajectory: negative threshold");

    const double rise_tol = std::max(min_rise, kPlateauTol);
    TrajectoryAnalysis out;
    out.grid.assign(grid.begin(), grid.end());
    out.values.assign(values.begin(), values.end());

    bool open = false;
    IncreasingInterval cur;
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
        const bool rising = values[i + 1] - values[i] > rise_tol;
        if (rising && !open) {
            cur.start = i;
            open = true;
        }
        if (!rising && open) {
            cur.end = i;
            out.increasing_intervals.push_back(cur);
            open = false;
        }
    }
    if (open) {
        cur.end = values.size() - 1;
        out.increasing_intervals.push_back(cur);
    }
    for (const auto& iv : out.increasing_intervals)
        out.total_increase += values[iv.end] - values[iv.start];
    return out;
}

double PairParameterization::population_difference() const { return 0.5 * (first.z - second.z); }

complexd PairParameterization::coherence_difference() const {
    return complexd(0.5 * (first.x - second.x), -0.5 * (first.y - second.y));
}

const char* to_string(MeasureMethod m) {
    switch (m) {
        case MeasureMethod::analytic: return "analytic";
        case MeasureMethod::optimized: return "optimized";
        case MeasureMethod::concurrence: return "concurrence";
    }
    return "unknown";
}

nlohmann::json NonMarkovianityResult::to_json() const {
    nlohmann::json j;
    j["value"] = value;
    j["value_single_interval"] = value_single_interval;
    j["method"] = to_string(method);
    j["converged"] = converged;
    j["intervals"] = nlohmann::json::array();
    for (const auto& [a, b] : intervals) j["intervals"].push_back({a, b});
    j["optimal_pair"] = {
        {"first", {optimal_pair.first.x, optimal_pair.first.y, optimal_pair.first.z}},
        {"second", {optimal_pair.second.x, optimal_pair.second.y, optimal_pair.second.z}},
        {"population_difference", optimal_pair.population_difference()},
        {"coherence_difference_abs", std::abs(optimal_pair.coherence_difference())},
    };
    return j;
}

namespace {

struct RefinedExtremum {
    double x;
    double value;
};

// Vertex of the parabola through three neighbouring samples; falls back to the
// grid sample when the curvature has the wrong sign or the vertex escapes the
// bracketing interval.
RefinedExtremum refine_extremum(std::span<const double> x, std::span<const double> y,
                                std::size_t i, bool minimum) {
    RefinedExtremum grid_pt{x[i], y[i]};
    if (i == 0 || i + 1 >= x.size()) return grid_pt;
    const double h1 = x[i] - x[i - 1];
    const double h2 = x[i + 1] - x[i];
    const double d1 = y[i] - y[i - 1];
    const double d2 = y[i + 1] - y[i];
    const double denom = h1 * h2 * (h1 + h2);
    const double alpha = (h1 * d2 - h2 * d1) / denom;
    const double beta = (h1 * h1 * d2 + h2 * h2 * d1) / denom;
    if (minimum ? !(alpha > 0.0) : !(alpha < 0.0)) return grid_pt;
    const double dx = -beta / (2.0 * alpha);
    if (!(dx >= -h1 && dx <= h2)) return grid_pt;
    return RefinedExtremum{x[i] + dx, y[i] + beta * dx + alpha * dx * dx};
}

}  // namespace

NonMarkovianityResult measure_from_series(std::vector<double> x, std::vector<double> values,
                                          double min_rise) {
    NonMarkovianityResult res;
    res.analysis = analyze_trajectory(x, values, min_rise);

    for (const auto& iv : res.analysis.increasing_intervals) {
        RefinedExtremum lo = refine_extremum(x, values, iv.start, true);
        RefinedExtremum hi = refine_extremum(x, values, iv.end, false);
        lo.value = std::clamp(lo.value, 0.0, values[iv.start]);
        hi.value = std::clamp(hi.value, values[iv.end], 1.0);
        const double rise = hi.value - lo.value;
        res.value += rise;
        if (res.intervals.empty()) res.value_single_interval = rise;
        res.intervals.emplace_back(lo.x, hi.x);
    }
    return res;
}

NonMarkovianityResult blp_analytic(const DecoherenceTrajectory& traj, double min_rise) {
    auto res = measure_from_series(traj.grid().path_difference_over_lambda0(traj.config()),
                                   traj.modulus(), min_rise);
    res.method = MeasureMethod::analytic;
    return res;
}

NonMarkovianityResult rhp_concurrence_measure(const DecoherenceTrajectory& traj,
                                              double min_rise) {
    Eigen::Vector4cd bell_ket;
    bell_ket << 1.0 / std::numbers::sqrt2, 0.0, 0.0, 1.0 / std::numbers::sqrt2;
    const TwoQubitState bell = TwoQubitState::pure(bell_ket);

    const auto kappa = traj.kappa();
    std::vector<double> c(kappa.size());
    for (std::size_t i = 0; i < kappa.size(); ++i)
        c[i] = concurrence(extend_to_ancilla(kappa[i], bell));

    auto res = measure_from_series(traj.grid().path_difference_over_lambda0(traj.config()),
                                   std::move(c), min_rise);
    res.method = MeasureMethod::concurrence;
    return res;
}

// ---------------------------------------------------------------------------
// pair optimization
// ---------------------------------------------------------------------------

namespace {

BlochVector sphere_point(double z, double phi) {
    const double r = std::sqrt(std::max(1.0 - z * z, 0.0));
    return BlochVector{r * std::cos(phi), r * std::sin(phi), z};
}

// Dephased-pair trace distance series from the matrix entries of the two
// states; identical arithmetic to apply_map + trace_distance without
// re-validating known-valid density matrices inside the hot loop.
void pair_distance_series(std::span<const complexd> kappa, const Eigen::Matrix2cd& rho1,
                          const Eigen::Matrix2cd& rho2, std::span<const std::size_t> idx,
                          std::vector<double>& out) {
    const complexd d00 = rho1(0, 0) - rho2(0, 0);
    const complexd d11 = rho1(1, 1) - rho2(1, 1);
    const complexd d01 = rho1(0, 1) - rho2(0, 1);
    out.resize(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const complexd c = d01 * std::conj(kappa[idx[k]]);
        const double tr = (d00 + d11).real();
        const double det = (d00 * d11).real() - std::norm(c);
        const double disc = std::sqrt(std::max(tr * tr - 4.0 * det, 0.0));
        out[k] = 0.5 * (std::abs(0.5 * (tr + disc)) + std::abs(0.5 * (tr - disc)));
    }
}

struct Candidate {
    std::array<double, 4> q;  // z1, phi1, z2, phi2
    double score = 0.0;
};

Eigen::Matrix2cd bloch_matrix(double z, double phi) {
    const BlochVector v = sphere_point(z, phi);
    Eigen::Matrix2cd m;
    m(0, 0) = complexd(0.5 * (1.0 + v.z), 0.0);
    m(1, 1) = complexd(0.5 * (1.0 - v.z), 0.0);
    m(0, 1) = complexd(0.5 * v.x, -0.5 * v.y);
    m(1, 0) = std::conj(m(0, 1));
    return m;
}

}  // namespace

double pair_total_increase(const DecoherenceTrajectory& traj, const PairParameterization& pair) {
    const QubitState rho1 = bloch_to_state(pair.first);
    const QubitState rho2 = bloch_to_state(pair.second);
    const auto kappa = traj.kappa();
    std::vector<std::size_t> idx(kappa.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<double> d;
    pair_distance_series(kappa, rho1.matrix(), rho2.matrix(), idx, d);
    return measure_from_series(traj.grid().path_difference_over_lambda0(traj.config()),
                               std::move(d))
        .value;
}

NonMarkovianityResult blp_optimized(const DecoherenceTrajectory& traj,
                                    const OptimizerSettings& settings) {
    if (settings.polar_points < 2 || settings.azimuth_points < 2 ||
        settings.max_refine_iterations < 1)
        throw std::invalid_argument("blp_optimized: empty search budget");

    const auto kappa = traj.kappa();
    const auto x_full = traj.grid().path_difference_over_lambda0(traj.config());

    // coarse stage works on a subsampled grid; ranking only
    std::vector<std::size_t> coarse_idx;
    const std::size_t stride = std::max(1, settings.coarse_stride);
    for (std::size_t i = 0; i < kappa.size(); i += stride) coarse_idx.push_back(i);
    if (coarse_idx.back() != kappa.size() - 1) coarse_idx.push_back(kappa.size() - 1);
    std::vector<double> x_coarse(coarse_idx.size());
    for (std::size_t k = 0; k < coarse_idx.size(); ++k) x_coarse[k] = x_full[coarse_idx[k]];

    std::vector<double> zs(settings.polar_points);
    for (int i = 0; i < settings.polar_points; ++i)
        zs[i] = -1.0 + 2.0 * i / (settings.polar_points - 1);
    std::vector<double> phis(settings.azimuth_points);
    for (int i = 0; i < settings.azimuth_points; ++i)
        phis[i] = 2.0 * std::numbers::pi * i / settings.azimuth_points;

    struct Site {
        double z, phi;
        Eigen::Matrix2cd m;
    };
    std::vector<Site> sites;
    for (double z : zs)
        for (double phi : phis) sites.push_back(Site{z, phi, bloch_matrix(z, phi)});

    // seed with the analytic optimum so a flat (Markovian) landscape still
    // reports the equatorial antipodal pair
    std::vector<Candidate> cands;
    cands.push_back(Candidate{{0.0, 0.0, 0.0, std::numbers::pi}, 0.0});
    for (std::size_t i = 0; i < sites.size(); ++i)
        for (std::size_t j = i + 1; j < sites.size(); ++j)
            cands.push_back(Candidate{{sites[i].z, sites[i].phi, sites[j].z, sites[j].phi}, 0.0});

    auto coarse_objective = [&](const std::array<double, 4>& q) {
        std::vector<double> d;
        pair_distance_series(kappa, bloch_matrix(q[0], q[1]), bloch_matrix(q[2], q[3]),
                             coarse_idx, d);
        return analyze_trajectory(x_coarse, d).total_increase;
    };
    parallel_for(static_cast<std::int64_t>(cands.size()), settings.policy,
                 [&](std::int64_t i) { cands[i].score = coarse_objective(cands[i].q); });
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });

    std::vector<std::size_t> full_idx(kappa.size());
    for (std::size_t i = 0; i < full_idx.size(); ++i) full_idx[i] = i;
    auto objective = [&](const std::array<double, 4>& q) {
        std::array<double, 4> c = q;
        c[0] = std::clamp(c[0], -1.0, 1.0);
        c[2] = std::clamp(c[2], -1.0, 1.0);
        std::vector<double> d;
        pair_distance_series(kappa, bloch_matrix(c[0], c[1]), bloch_matrix(c[2], c[3]),
                             full_idx, d);
        return measure_from_series(std::vector<double>(x_full), std::move(d)).value;
    };

    // Nelder-Mead from the best coarse candidates
    std::array<double, 4> best_q = cands.front().q;
    double best_val = objective(best_q);
    bool converged = false;

    const int n_starts = std::min<int>(settings.refine_from_top, static_cast<int>(cands.size()));
    for (int s = 0; s < n_starts; ++s) {
        std::array<std::array<double, 4>, 5> simplex;
        std::array<double, 5> fval;
        simplex[0] = cands[s].q;
        const double step_z = 0.5 * (zs.size() > 1 ? zs[1] - zs[0] : 0.25);
        const double step_phi = 0.5 * (phis.size() > 1 ? phis[1] - phis[0] : 0.5);
        for (int v = 1; v < 5; ++v) {
            simplex[v] = simplex[0];
            simplex[v][v - 1] += (v - 1) % 2 == 0 ? step_z : step_phi;
        }
        for (int v = 0; v < 5; ++v) fval[v] = objective(simplex[v]);

        for (int it = 0; it < settings.max_refine_iterations; ++it) {
            std::array<int, 5> order{0, 1, 2, 3, 4};
            std::sort(order.begin(), order.end(),
                      [&](int a, int b) { return fval[a] > fval[b]; });
            if (fval[order[0]] - fval[order[4]] <= settings.tolerance) {
                converged = true;
                break;
            }
            std::array<double, 4> centroid{};
            for (int v = 0; v < 4; ++v)
                for (int k = 0; k < 4; ++k) centroid[k] += simplex[order[v]][k] / 4.0;
            const int worst = order[4];
            auto blend = [&](double t) {
                std::array<double, 4> p;
                for (int k = 0; k < 4; ++k)
                    p[k] = centroid[k] + t * (centroid[k] - simplex[worst][k]);
                return p;
            };
            const auto refl = blend(1.0);
            const double f_refl = objective(refl);
            if (f_refl > fval[order[0]]) {
                const auto exp_p = blend(2.0);
                const double f_exp = objective(exp_p);
                if (f_exp > f_refl) {
                    simplex[worst] = exp_p;
                    fval[worst] = f_exp;
                } else {
                    simplex[worst] = refl;
                    fval[worst] = f_refl;
                }
            } else if (f_refl > fval[order[3]]) {
                simplex[worst] = refl;
                fval[worst] = f_refl;
            } else {
                const auto con = blend(-0.5);
                const double f_con = objective(con);
                if (f_con > fval[worst]) {
                    simplex[worst] = con;
                    fval[worst] = f_con;
                } else {
                    for (int v = 0; v < 5; ++v) {
                        if (v == order[0]) continue;
                        for (int k = 0; k < 4; ++k)
                            simplex[v][k] =
                                0.5 * (simplex[v][k] + simplex[order[0]][k]);
                        fval[v] = objective(simplex[v]);
                    }
                }
            }
        }
        const int top = static_cast<int>(
            std::max_element(fval.begin(), fval.end()) - fval.begin());
        if (fval[top] > best_val) {
            best_val = fval[top];
            best_q = simplex[top];
        }
    }

    if (!converged)
        throw std::runtime_error("blp_optimized: refinement stalled above tolerance");

    best_q[0] = std::clamp(best_q[0], -1.0, 1.0);
    best_q[2] = std::clamp(best_q[2], -1.0, 1.0);
    PairParameterization pair{sphere_point(best_q[0], best_q[1]),
                              sphere_point(best_q[2], best_q[3])};

    // final evaluation through the fully validated public pipeline
    const QubitState rho1 = bloch_to_state(pair.first);
    const QubitState rho2 = bloch_to_state(pair.second);
    std::vector<double> d(kappa.size());
    for (std::size_t i = 0; i < kappa.size(); ++i)
        d[i] = trace_distance(apply_map(kappa[i], rho1), apply_map(kappa[i], rho2));
    auto res = measure_from_series(std::vector<double>(x_full), std::move(d));
    res.method = MeasureMethod::optimized;
    res.optimal_pair = pair;
    res.converged = converged;
    return res;
}

// ---------------------------------------------------------------------------
// transition scans
// ---------------------------------------------------------------------------

namespace {

void collect_brackets(TransitionScan& scan) {
    const ScanPoint* prev = nullptr;
    for (const auto& p : scan.points) {
        if (p.failed) continue;
        if (prev) {
            const bool was = prev->n_value > scan.floor;
            const bool now = p.n_value > scan.floor;
            if (was != now) scan.transition_brackets.emplace_back(prev->control, p.control);
        }
        prev = &p;
    }
}

}  // namespace

TransitionScan markovian_transition_scan(std::span<const GaussianMixtureSpectrum> spectra,
                                         std::span<const double> controls,
                                         const OpenSystemConfig& cfg, double periods,
                                         int grid_points) {
    if (spectra.size() != controls.size())
        throw std::invalid_argument("scan: controls/spectra size mismatch");
    if (spectra.empty()) throw std::invalid_argument("scan: empty");

    TransitionScan scan;
    scan.points.resize(spectra.size());
    for (std::size_t i = 0; i < spectra.size(); ++i) {
        ScanPoint& p = scan.points[i];
        p.control = controls[i];
        try {
            const TimeGrid grid = default_measure_grid(spectra[i], cfg, periods, grid_points);
            p.n_value = blp_analytic(kappa_closed_form(spectra[i], cfg, grid)).value;
        } catch (const std::exception& e) {
            p.failed = true;
            p.error = e.what();
        }
    }
    collect_brackets(scan);
    return scan;
}

TransitionScan markovian_transition_scan_theta(const CavityConfig& base,
                                               std::span<const double> thetas_deg,
                                               const OpenSystemConfig& cfg, int spectrum_points,
                                               double periods, int grid_points,
                                               ExecPolicy policy) {
    if (thetas_deg.empty()) throw std::invalid_argument("scan: empty");
    TransitionScan scan;
    scan.points.resize(thetas_deg.size());
    parallel_for(static_cast<std::int64_t>(thetas_deg.size()), policy, [&](std::int64_t i) {
        ScanPoint& p = scan.points[i];
        p.control = thetas_deg[i];
        try {
            CavityConfig cav = base;
            cav.tilt_deg = thetas_deg[i];
            const auto grid = default_cavity_grid(cav, spectrum_points);
            const auto fit = fit_two_gaussians(cavity_spectrum(cav, grid));
            const TimeGrid tg = default_measure_grid(fit.mixture, cfg, periods, grid_points);
            p.n_value = blp_analytic(kappa_closed_form(fit.mixture, cfg, tg)).value;
        } catch (const std::exception& e) {
            p.failed = true;
            p.error = e.what();
        }
    });
    collect_brackets(scan);
    return scan;
}

}  // namespace nmsim
