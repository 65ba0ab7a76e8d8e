#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "nmsim/dephasing.hpp"
#include "nmsim/exec.hpp"
#include "nmsim/measures.hpp"
#include "nmsim/qstate.hpp"
#include "nmsim/spectrum.hpp"

namespace nmsim {

inline constexpr const char* kSoftwareVersion = "nmsim 1.0.0";

struct TomographyConfig {
    long counts_per_setting = 10000;
    std::uint64_t seed = 0;
    int bootstrap_resamples = 200;
    bool poisson = false;  // independent Poisson counts instead of multinomial

    void validate() const;
};

struct PresetStates {
    QubitState plus;    // (|H> + |V>)/sqrt(2)
    QubitState minus;   // (|H> - |V>)/sqrt(2)
    TwoQubitState bell; // (|HH> + |VV>)/sqrt(2)
};

PresetStates preset_states();

// Raw photon-counting record: one row of outcome counts per measurement
// setting (X/Y/Z for one qubit, the 9 local Pauli pairs for two).
struct CountsTable {
    int num_qubits = 1;
    long shots_per_setting = 0;
    std::vector<std::string> settings;
    std::vector<std::vector<long>> counts;
};

CountsTable simulate_counts(const QubitState& rho, const TomographyConfig& cfg);
CountsTable simulate_counts(const TwoQubitState& rho, const TomographyConfig& cfg);
CountsTable simulate_counts(const QubitState& rho, const TomographyConfig& cfg,
                            std::mt19937_64& engine);
CountsTable simulate_counts(const TwoQubitState& rho, const TomographyConfig& cfg,
                            std::mt19937_64& engine);

// Linear inversion from empirical Pauli expectations, then eigenvalue
// clipping + trace renormalization onto the physical set.
QubitState reconstruct_qubit(const CountsTable& t);
TwoQubitState reconstruct_two_qubit(const CountsTable& t);

// Bootstrap resample of a counts table (multinomial draw from the empirical
// outcome frequencies, same shot count).
CountsTable resample_counts(const CountsTable& t, std::mt19937_64& engine);

enum class SweepControl { path_difference, tilt_angle };
enum class SweepArm { trace_distance, concurrence };

struct SweepSpec {
    SweepControl control = SweepControl::path_difference;
    SweepArm arm = SweepArm::trace_distance;
    std::vector<double> control_grid;  // dn L / lambda0 values, or tilt angles in degrees
    std::optional<GaussianMixtureSpectrum> mixture;
    std::optional<CavityConfig> cavity;
    int spectrum_points = 4001;    // cavity sampling for tilt sweeps
    double measure_periods = 1.0;  // trajectory window per tilt point
    int measure_points = 2001;     // trajectory samples per tilt point (exact mode)
    int measure_points_tomo = 101; // trajectory samples per tilt point (tomographic mode)

    void validate() const;
};

struct SweepRow {
    double control = 0.0;
    double value = 0.0;
    double stderr_value = 0.0;
    bool failed = false;
    std::string error;
};

struct SweepDataset {
    std::vector<SweepRow> rows;
    nlohmann::json metadata;

    std::string to_csv() const;  // header: control,value,stderr
    static SweepDataset from_csv(const std::string& csv_text, nlohmann::json metadata);
};

// Path-difference sweeps report D or C per control point (Fig. 3 style);
// tilt sweeps report the non-Markovianity measure per angle (Fig. 4 style).
// Passing no TomographyConfig selects exact mode (stderr 0).
SweepDataset run_sweep(const SweepSpec& spec, const std::optional<TomographyConfig>& tomo,
                       const OpenSystemConfig& cfg, ExecPolicy policy = ExecPolicy::parallel);

}  // namespace nmsim
