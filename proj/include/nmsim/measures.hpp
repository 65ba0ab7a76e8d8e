#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nmsim/dephasing.hpp"
#include "nmsim/exec.hpp"
#include "nmsim/qstate.hpp"

namespace nmsim {

struct IncreasingInterval {
    std::size_t start = 0;  // index of the local minimum opening the run
    std::size_t end = 0;    // index of the local maximum closing it
};

struct TrajectoryAnalysis {
    std::vector<double> grid;
    std::vector<double> values;
    std::vector<IncreasingInterval> increasing_intervals;
    double total_increase = 0.0;
};

// Maximal runs of strictly increasing samples; rises below
// max(min_rise, 1e-12) count as plateaus and break runs.
TrajectoryAnalysis analyze_trajectory(std::span<const double> grid,
                                      std::span<const double> values, double min_rise = 0.0);

struct PairParameterization {
    BlochVector first{1.0, 0.0, 0.0};
    BlochVector second{-1.0, 0.0, 0.0};

    double population_difference() const;   // a = (z1 - z2)/2
    complexd coherence_difference() const;  // b = ((x1 - x2) - i (y1 - y2))/2
};

enum class MeasureMethod { analytic, optimized, concurrence };
const char* to_string(MeasureMethod m);

struct NonMarkovianityResult {
    double value = 0.0;                  // general multi-interval sum
    double value_single_interval = 0.0;  // first local min -> subsequent max
    std::vector<std::pair<double, double>> intervals;  // x-coordinate endpoints
    PairParameterization optimal_pair;
    MeasureMethod method = MeasureMethod::analytic;
    TrajectoryAnalysis analysis;
    bool converged = true;

    nlohmann::json to_json() const;
};

// Shared analysis path: grid-level runs plus three-point parabolic refinement
// of interior extrema (interval endpoints), so all three measures compare.
NonMarkovianityResult measure_from_series(std::vector<double> x, std::vector<double> values,
                                          double min_rise = 0.0);

NonMarkovianityResult blp_analytic(const DecoherenceTrajectory& traj, double min_rise = 0.0);

struct OptimizerSettings {
    int polar_points = 9;
    int azimuth_points = 12;
    int coarse_stride = 8;         // grid subsampling for the coarse stage
    int refine_from_top = 3;
    int max_refine_iterations = 400;
    double tolerance = 1e-9;       // simplex objective-spread stall threshold
    ExecPolicy policy = ExecPolicy::parallel;
};

// Eq-free maximization over initial state pairs: coarse grid over two Bloch
// sphere points, Nelder-Mead refinement of the best candidates.
NonMarkovianityResult blp_optimized(const DecoherenceTrajectory& traj,
                                    const OptimizerSettings& settings = {});

NonMarkovianityResult rhp_concurrence_measure(const DecoherenceTrajectory& traj,
                                              double min_rise = 0.0);

// Matrix-pipeline objective for one candidate pair (dephase both states,
// trace distance per grid point, measure of the resulting series).
double pair_total_increase(const DecoherenceTrajectory& traj, const PairParameterization& pair);

struct ScanPoint {
    double control = 0.0;
    double n_value = 0.0;
    bool failed = false;
    std::string error;
};

struct TransitionScan {
    std::vector<ScanPoint> points;
    // consecutive control values where N crosses the floor
    std::vector<std::pair<double, double>> transition_brackets;
    double floor = 1e-9;
};

TransitionScan markovian_transition_scan(std::span<const GaussianMixtureSpectrum> spectra,
                                         std::span<const double> controls,
                                         const OpenSystemConfig& cfg, double periods = 1.0,
                                         int grid_points = 2001);

TransitionScan markovian_transition_scan_theta(const CavityConfig& base,
                                               std::span<const double> thetas_deg,
                                               const OpenSystemConfig& cfg,
                                               int spectrum_points = 4001, double periods = 1.0,
                                               int grid_points = 2001,
                                               ExecPolicy policy = ExecPolicy::parallel);

}  // namespace nmsim
