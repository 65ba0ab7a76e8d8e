#include "nmsim/lab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "nmsim/io.hpp"
#include "nmsim/rng.hpp"

namespace nmsim {

namespace {

const char* kAxes = "XYZ";

Eigen::Matrix2cd pauli_by_index(int i) {
    switch (i) {
        case 0: return pauli::x();
        case 1: return pauli::y();
        default: return pauli::z();
    }
}

// Projectors (I +- sigma)/2 for one measurement axis.
std::array<Eigen::Matrix2cd, 2> axis_projectors(int axis) {
    const Eigen::Matrix2cd s = pauli_by_index(axis);
    const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
    return {0.5 * (id + s), 0.5 * (id - s)};
}

std::vector<double> clean_probabilities(std::vector<double> p) {
    double sum = 0.0;
    for (double& v : p) {
        v = std::max(v, 0.0);
        sum += v;
    }
    if (sum <= 0.0) throw std::runtime_error("tomography: degenerate outcome distribution");
    for (double& v : p) v /= sum;
    return p;
}

std::vector<long> draw_counts(std::mt19937_64& engine, long shots,
                              const std::vector<double>& probs, bool poisson) {
    return poisson ? poisson_sample(engine, shots, probs)
                   : multinomial_sample(engine, shots, probs);
}

template <typename Matrix>
Matrix project_psd_trace1(const Matrix& m) {
    const Matrix herm = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(herm);
    auto vals = es.eigenvalues();
    double sum = 0.0;
    for (int i = 0; i < vals.size(); ++i) {
        vals(i) = std::max(vals(i), 0.0);
        sum += vals(i);
    }
    if (!(sum > 0.0)) throw std::runtime_error("psd projection: zero spectrum");
    Matrix out = Matrix::Zero();
    for (int i = 0; i < vals.size(); ++i)
        out += (vals(i) / sum) * (es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint());
    return 0.5 * (out + out.adjoint()).eval();
}

}  // namespace

void TomographyConfig::validate() const {
    if (counts_per_setting < 1)
        throw std::invalid_argument("tomography: counts per setting must be >= 1");
    if (bootstrap_resamples < 0)
        throw std::invalid_argument("tomography: bootstrap resamples must be >= 0");
}

PresetStates preset_states() {
    Eigen::Vector2cd plus, minus;
    plus << 1.0 / std::numbers::sqrt2, 1.0 / std::numbers::sqrt2;
    minus << 1.0 / std::numbers::sqrt2, -1.0 / std::numbers::sqrt2;
    Eigen::Vector4cd bell;
    bell << 1.0 / std::numbers::sqrt2, 0.0, 0.0, 1.0 / std::numbers::sqrt2;
    return PresetStates{QubitState::pure(plus), QubitState::pure(minus),
                        TwoQubitState::pure(bell)};
}

CountsTable simulate_counts(const QubitState& rho, const TomographyConfig& cfg,
                            std::mt19937_64& engine) {
    cfg.validate();
    CountsTable t;
    t.num_qubits = 1;
    t.shots_per_setting = cfg.counts_per_setting;
    for (int axis = 0; axis < 3; ++axis) {
        const auto proj = axis_projectors(axis);
        std::vector<double> p(2);
        for (int a = 0; a < 2; ++a) p[a] = (rho.matrix() * proj[a]).trace().real();
        p = clean_probabilities(std::move(p));
        t.settings.emplace_back(1, kAxes[axis]);
        t.counts.push_back(draw_counts(engine, cfg.counts_per_setting, p, cfg.poisson));
    }
    return t;
}

CountsTable simulate_counts(const TwoQubitState& rho, const TomographyConfig& cfg,
                            std::mt19937_64& engine) {
    cfg.validate();
    CountsTable t;
    t.num_qubits = 2;
    t.shots_per_setting = cfg.counts_per_setting;
    for (int ax1 = 0; ax1 < 3; ++ax1) {
        const auto proj1 = axis_projectors(ax1);
        for (int ax2 = 0; ax2 < 3; ++ax2) {
            const auto proj2 = axis_projectors(ax2);
            std::vector<double> p(4);
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) {
                    Eigen::Matrix4cd P = Eigen::Matrix4cd::Zero();
                    for (int i = 0; i < 2; ++i)
                        for (int j = 0; j < 2; ++j)
                            for (int k = 0; k < 2; ++k)
                                for (int l = 0; l < 2; ++l)
                                    P(2 * i + k, 2 * j + l) = proj1[a](i, j) * proj2[b](k, l);
                    p[2 * a + b] = (rho.matrix() * P).trace().real();
                }
            p = clean_probabilities(std::move(p));
            t.settings.push_back(std::string(1, kAxes[ax1]) + std::string(1, kAxes[ax2]));
            t.counts.push_back(draw_counts(engine, cfg.counts_per_setting, p, cfg.poisson));
        }
    }
    return t;
}

CountsTable simulate_counts(const QubitState& rho, const TomographyConfig& cfg) {
    auto engine = make_engine(cfg.seed);
    return simulate_counts(rho, cfg, engine);
}

CountsTable simulate_counts(const TwoQubitState& rho, const TomographyConfig& cfg) {
    auto engine = make_engine(cfg.seed);
    return simulate_counts(rho, cfg, engine);
}

namespace {

void check_complete(const CountsTable& t, int qubits, std::size_t n_settings,
                    std::size_t n_outcomes) {
    if (t.num_qubits != qubits || t.settings.size() != n_settings ||
        t.counts.size() != n_settings)
        throw std::invalid_argument("reconstruct: incomplete measurement settings");
    for (const auto& c : t.counts)
        if (c.size() != n_outcomes)
            throw std::invalid_argument("reconstruct: bad outcome count");
}

}  // namespace

QubitState reconstruct_qubit(const CountsTable& t) {
    check_complete(t, 1, 3, 2);
    Eigen::Matrix2cd m = 0.5 * Eigen::Matrix2cd::Identity();
    for (int axis = 0; axis < 3; ++axis) {
        const auto& c = t.counts[axis];
        const double n = static_cast<double>(c[0] + c[1]);
        if (!(n > 0)) throw std::invalid_argument("reconstruct: empty setting");
        const double expect = (static_cast<double>(c[0]) - static_cast<double>(c[1])) / n;
        m += 0.5 * expect * pauli_by_index(axis);
    }
    return QubitState(project_psd_trace1<Eigen::Matrix2cd>(m), 1e-9);
}

TwoQubitState reconstruct_two_qubit(const CountsTable& t) {
    check_complete(t, 2, 9, 4);

    // pairwise expectations from their own setting; singles averaged over the
    // three settings that contain the same local axis
    double pair_e[3][3] = {};
    double single1[3] = {}, single2[3] = {};
    for (int ax1 = 0; ax1 < 3; ++ax1)
        for (int ax2 = 0; ax2 < 3; ++ax2) {
            const auto& c = t.counts[3 * ax1 + ax2];
            const double n =
                static_cast<double>(c[0]) + c[1] + c[2] + c[3];
            if (!(n > 0)) throw std::invalid_argument("reconstruct: empty setting");
            const double pp = c[0] / n, pm = c[1] / n, mp = c[2] / n, mm = c[3] / n;
            pair_e[ax1][ax2] = pp - pm - mp + mm;
            single1[ax1] += (pp + pm - mp - mm) / 3.0;
            single2[ax2] += (pp - pm + mp - mm) / 3.0;
        }

    Eigen::Matrix4cd m = Eigen::Matrix4cd::Zero();
    const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
    auto kron = [](const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
        Eigen::Matrix4cd out;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k)
                    for (int l = 0; l < 2; ++l) out(2 * i + k, 2 * j + l) = a(i, j) * b(k, l);
        return out;
    };
    m += 0.25 * kron(id, id);
    for (int ax = 0; ax < 3; ++ax) {
        m += 0.25 * single1[ax] * kron(pauli_by_index(ax), id);
        m += 0.25 * single2[ax] * kron(id, pauli_by_index(ax));
    }
    for (int ax1 = 0; ax1 < 3; ++ax1)
        for (int ax2 = 0; ax2 < 3; ++ax2)
            m += 0.25 * pair_e[ax1][ax2] * kron(pauli_by_index(ax1), pauli_by_index(ax2));

    return TwoQubitState(project_psd_trace1<Eigen::Matrix4cd>(m), 1e-9);
}

CountsTable resample_counts(const CountsTable& t, std::mt19937_64& engine) {
    CountsTable out = t;
    for (std::size_t s = 0; s < t.counts.size(); ++s) {
        const auto& c = t.counts[s];
        long n = 0;
        for (long v : c) n += v;
        std::vector<double> p(c.size());
        for (std::size_t k = 0; k < c.size(); ++k)
            p[k] = n > 0 ? static_cast<double>(c[k]) / static_cast<double>(n) : 0.0;
        out.counts[s] = multinomial_sample(engine, n, p);
    }
    return out;
}

// ---------------------------------------------------------------------------
// sweeps
// ---------------------------------------------------------------------------

void SweepSpec::validate() const {
    if (control_grid.empty()) throw std::invalid_argument("sweep: empty control grid");
    for (std::size_t i = 0; i + 1 < control_grid.size(); ++i)
        if (!(control_grid[i] < control_grid[i + 1]))
            throw std::invalid_argument("sweep: control grid must be strictly increasing");
    if (control == SweepControl::tilt_angle) {
        if (!cavity.has_value())
            throw std::invalid_argument("sweep: tilt-angle sweep requires a cavity config");
    } else if (!mixture.has_value() && !cavity.has_value()) {
        throw std::invalid_argument("sweep: environment (mixture or cavity) required");
    }
    if (measure_points < 2 || measure_points_tomo < 2 || spectrum_points < 16)
        throw std::invalid_argument("sweep: bad grid sizes");
    if (!(measure_periods > 0.0)) throw std::invalid_argument("sweep: bad measure window");
}

namespace {

struct PointEstimate {
    double value = 0.0;
    double stderr_value = 0.0;
};

double stddev(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

// Count tables for one trajectory point: two single-qubit tomographies for the
// trace-distance arm, one two-qubit tomography for the concurrence arm.
std::vector<CountsTable> simulate_point_tables(complexd kappa, SweepArm arm,
                                               const PresetStates& preset,
                                               const TomographyConfig& tomo,
                                               std::mt19937_64& engine) {
    std::vector<CountsTable> tables;
    if (arm == SweepArm::trace_distance) {
        tables.push_back(simulate_counts(apply_map(kappa, preset.plus), tomo, engine));
        tables.push_back(simulate_counts(apply_map(kappa, preset.minus), tomo, engine));
    } else {
        tables.push_back(simulate_counts(extend_to_ancilla(kappa, preset.bell), tomo, engine));
    }
    return tables;
}

double point_value(const std::vector<CountsTable>& tables, SweepArm arm) {
    if (arm == SweepArm::trace_distance)
        return trace_distance(reconstruct_qubit(tables[0]), reconstruct_qubit(tables[1]));
    return concurrence(reconstruct_two_qubit(tables[0]));
}

std::vector<CountsTable> resample_point_tables(const std::vector<CountsTable>& tables,
                                               std::mt19937_64& engine) {
    std::vector<CountsTable> out;
    out.reserve(tables.size());
    for (const auto& t : tables) out.push_back(resample_counts(t, engine));
    return out;
}

// D or C at one trajectory point from simulated tomography, with a
// nonparametric bootstrap standard error over resampled count tables.
PointEstimate tomographic_point(complexd kappa, SweepArm arm, const PresetStates& preset,
                                const TomographyConfig& tomo, std::uint64_t point_seed) {
    auto engine = make_engine(point_seed);
    const auto tables = simulate_point_tables(kappa, arm, preset, tomo, engine);
    PointEstimate est;
    est.value = point_value(tables, arm);
    std::vector<double> boots(tomo.bootstrap_resamples);
    for (int b = 0; b < tomo.bootstrap_resamples; ++b)
        boots[b] = point_value(resample_point_tables(tables, engine), arm);
    est.stderr_value = stddev(boots);
    return est;
}

double exact_point(complexd kappa, SweepArm arm, const PresetStates& preset) {
    if (arm == SweepArm::trace_distance)
        return trace_distance(apply_map(kappa, preset.plus), apply_map(kappa, preset.minus));
    return concurrence(extend_to_ancilla(kappa, preset.bell));
}

GaussianMixtureSpectrum resolve_mixture(const SweepSpec& spec) {
    if (spec.mixture.has_value()) return *spec.mixture;
    const auto grid = default_cavity_grid(*spec.cavity, spec.spectrum_points);
    return fit_two_gaussians(cavity_spectrum(*spec.cavity, grid)).mixture;
}

nlohmann::json sweep_metadata(const SweepSpec& spec, const std::optional<TomographyConfig>& tomo,
                              const OpenSystemConfig& cfg) {
    nlohmann::json j;
    j["software_version"] = kSoftwareVersion;
    j["control"] =
        spec.control == SweepControl::path_difference ? "path_difference" : "tilt_angle";
    j["arm"] = spec.arm == SweepArm::trace_distance ? "trace_distance" : "concurrence";
    j["control_grid"] = spec.control_grid;
    j["open_system"] = {{"n_h", cfg.n_h}, {"n_v", cfg.n_v}, {"lambda0_m", cfg.lambda0}};
    if (spec.mixture.has_value()) j["mixture"] = spec.mixture->to_json();
    if (spec.cavity.has_value()) {
        const auto& c = *spec.cavity;
        j["cavity"] = {{"thickness_m", c.thickness},
                       {"reflectivity", c.reflectivity},
                       {"refractive_index", c.refractive_index},
                       {"tilt_deg", c.tilt_deg},
                       {"filter_center_m", c.filter_center},
                       {"filter_fwhm_m", c.filter_fwhm},
                       {"source_center_m", c.source_center},
                       {"phase_offset_rad", c.phase_offset},
                       {"broadening_sigma_rad_s", c.broadening_sigma},
                       {"filter_shape",
                        c.filter_shape == FilterShape::gaussian ? "gaussian" : "lorentzian"}};
    }
    if (tomo.has_value()) {
        j["mode"] = "tomographic";
        j["tomography"] = {{"counts_per_setting", tomo->counts_per_setting},
                           {"seed", tomo->seed},
                           {"bootstrap_resamples", tomo->bootstrap_resamples},
                           {"poisson", tomo->poisson}};
    } else {
        j["mode"] = "exact";
    }
    return j;
}

}  // namespace

SweepDataset run_sweep(const SweepSpec& spec, const std::optional<TomographyConfig>& tomo,
                       const OpenSystemConfig& cfg, ExecPolicy policy) {
    spec.validate();
    cfg.validate();
    if (tomo.has_value()) tomo->validate();

    const PresetStates preset = preset_states();
    SweepDataset ds;
    ds.metadata = sweep_metadata(spec, tomo, cfg);
    ds.rows.resize(spec.control_grid.size());

    if (spec.control == SweepControl::path_difference) {
        const GaussianMixtureSpectrum mixture = resolve_mixture(spec);
        ds.metadata["resolved_mixture"] = mixture.to_json();

        // the trajectory needs t = 0 for normalization; prepend when absent
        std::vector<double> xs = spec.control_grid;
        const bool prepended = xs.front() != 0.0;
        if (xs.front() < 0.0) throw std::invalid_argument("sweep: negative path difference");
        if (prepended) xs.insert(xs.begin(), 0.0);
        const TimeGrid grid = TimeGrid::from_path_difference(xs, cfg);
        const DecoherenceTrajectory traj = kappa_closed_form(mixture, cfg, grid);
        const auto kappa = traj.kappa();
        const std::size_t offset = prepended ? 1 : 0;

        parallel_for(static_cast<std::int64_t>(spec.control_grid.size()), policy,
                     [&](std::int64_t i) {
                         SweepRow& row = ds.rows[i];
                         row.control = spec.control_grid[i];
                         try {
                             const complexd k = kappa[i + offset];
                             if (tomo.has_value()) {
                                 const auto est = tomographic_point(
                                     k, spec.arm, preset, *tomo,
                                     derive_seed(tomo->seed, static_cast<std::uint64_t>(i)));
                                 row.value = est.value;
                                 row.stderr_value = est.stderr_value;
                             } else {
                                 row.value = exact_point(k, spec.arm, preset);
                             }
                         } catch (const std::exception& e) {
                             row.failed = true;
                             row.error = e.what();
                         }
                     });
    } else {
        parallel_for(
            static_cast<std::int64_t>(spec.control_grid.size()), policy, [&](std::int64_t i) {
                SweepRow& row = ds.rows[i];
                row.control = spec.control_grid[i];
                try {
                    CavityConfig cav = *spec.cavity;
                    cav.tilt_deg = row.control;
                    const auto sgrid = default_cavity_grid(cav, spec.spectrum_points);
                    const auto fit = fit_two_gaussians(cavity_spectrum(cav, sgrid));
                    const int pts =
                        tomo.has_value() ? spec.measure_points_tomo : spec.measure_points;
                    const TimeGrid tg =
                        default_measure_grid(fit.mixture, cfg, spec.measure_periods, pts);
                    const DecoherenceTrajectory traj = kappa_closed_form(fit.mixture, cfg, tg);
                    const auto x = tg.path_difference_over_lambda0(cfg);
                    const auto kap = traj.kappa();

                    if (!tomo.has_value()) {
                        std::vector<double> series(kap.size());
                        for (std::size_t p = 0; p < kap.size(); ++p)
                            series[p] = exact_point(kap[p], spec.arm, preset);
                        row.value = measure_from_series(x, std::move(series)).value;
                    } else {
                        const std::uint64_t theta_seed =
                            derive_seed(tomo->seed, static_cast<std::uint64_t>(i));
                        std::vector<std::vector<CountsTable>> tables(kap.size());
                        std::vector<double> series(kap.size());
                        std::vector<double> errs(kap.size());
                        const int b_point = std::min(50, tomo->bootstrap_resamples);
                        for (std::size_t p = 0; p < kap.size(); ++p) {
                            auto engine = make_engine(
                                derive_seed(theta_seed, static_cast<std::uint64_t>(p)));
                            tables[p] = simulate_point_tables(kap[p], spec.arm, preset, *tomo,
                                                              engine);
                            series[p] = point_value(tables[p], spec.arm);
                            std::vector<double> pb(b_point);
                            for (int b = 0; b < b_point; ++b)
                                pb[b] = point_value(resample_point_tables(tables[p], engine),
                                                    spec.arm);
                            errs[p] = stddev(pb);
                        }
                        // noise threshold: rises below twice the typical point
                        // error do not count as information backflow
                        std::vector<double> sorted_errs = errs;
                        std::sort(sorted_errs.begin(), sorted_errs.end());
                        const double eps = 2.0 * sorted_errs[sorted_errs.size() / 2];
                        row.value = measure_from_series(x, std::vector<double>(series), eps).value;

                        // nonparametric bootstrap of the full series
                        auto engine = make_engine(derive_seed(theta_seed, 0x626f6f74ull));
                        std::vector<double> boots(tomo->bootstrap_resamples);
                        for (int b = 0; b < tomo->bootstrap_resamples; ++b) {
                            std::vector<double> s2(kap.size());
                            for (std::size_t p = 0; p < kap.size(); ++p)
                                s2[p] = point_value(resample_point_tables(tables[p], engine),
                                                    spec.arm);
                            boots[b] = measure_from_series(std::vector<double>(x),
                                                           std::move(s2), eps)
                                           .value;
                        }
                        row.stderr_value = stddev(boots);
                    }
                } catch (const std::exception& e) {
                    row.failed = true;
                    row.error = e.what();
                }
            });
    }
    return ds;
}

std::string SweepDataset::to_csv() const {
    std::ostringstream out;
    out << "control,value,stderr\n";
    for (const auto& r : rows) {
        out << io::format_g17(r.control) << ',';
        if (r.failed)
            out << "nan,nan";
        else
            out << io::format_g17(r.value) << ',' << io::format_g17(r.stderr_value);
        out << '\n';
    }
    return out.str();
}

SweepDataset SweepDataset::from_csv(const std::string& csv_text, nlohmann::json metadata) {
    SweepDataset ds;
    ds.metadata = std::move(metadata);
    std::istringstream in(csv_text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        const auto cells = io::split_csv_line(line);
        if (cells.size() != 3) throw std::invalid_argument("sweep csv: expected 3 columns");
        SweepRow r;
        r.control = std::stod(cells[0]);
        r.value = std::stod(cells[1]);
        r.stderr_value = std::stod(cells[2]);
        r.failed = std::isnan(r.value);
        ds.rows.push_back(r);
    }
    return ds;
}

}  // namespace nmsim
