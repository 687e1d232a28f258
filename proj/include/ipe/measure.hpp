// measure.hpp — event Monte Carlo for the entanglement sequences.
//
// A sequence: Raman pulse -> photon maybe leaks from the cavity ->
// waveplate analyzer and polarizing beamsplitter -> avalanche
// photodiodes with finite efficiency and dark counts -> ion readout in a
// chosen Pauli basis. The two analyzer paths have unequal efficiencies;
// every basis therefore gets measured twice, once with the output
// waveplates rotated so the paths swap, and partner counts are summed
// before tomography.
//
// Determinism: each sequence draws from an Rng keyed by (seed, setting
// index, sequence index), so results are independent of threading and
// byte-identical across runs.

#pragma once

#include "ipe/core.hpp"
#include "ipe/dynamics.hpp"
#include "ipe/rng.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ipe {

enum class PhotonBasis { HV = 0, DA = 1, RL = 2 };
enum class IonAxis { X = 0, Y = 1, Z = 2 };
enum class IonOutcome { S = 0, D = 1 };

const char* to_string(PhotonBasis b);
const char* to_string(IonAxis a);

// One of the 9 basis pairs, plus the path-swap flag: 18 settings total.
struct BasisSetting {
    IonAxis ion = IonAxis::Z;
    PhotonBasis photon = PhotonBasis::HV;
    bool swapped = false;

    int base_index() const { return static_cast<int>(ion) * 3 + static_cast<int>(photon); } // 0..8
    int index() const { return base_index() + (swapped ? 9 : 0); }                          // 0..17
    std::string id() const; // e.g. "x:HV"

    static BasisSetting from_index(int index);
    static BasisSetting parse(const std::string& id, bool swapped);

    // The 18 settings of a full tomography run (9 pairs x swap).
    static std::vector<BasisSetting> tomography_set();
};

struct NoiseModel {
    double exit_efficiency = 0.16;  // photon leaves through the output mirror
    double apd_efficiency0 = 0.40;
    double apd_efficiency1 = 0.40;
    double dark_rate = 36.0;        // combined dark counts of both APDs, events/s
    double detection_window = usec(40.0);
    double readout_error = 0.0;
    double path_imbalance = 1.0;    // transmission of analyzer path 1 relative to path 0

    static NoiseModel noiseless();
    void validate() const;
};

struct DetectionEvent {
    std::int64_t sequence_index = 0;
    int setting_index = 0; // 0..17
    int detector = 0;      // APD 0 or 1
    double detection_time = 0.0; // seconds from pulse start
    bool dark = false;
    IonOutcome ion = IonOutcome::S;
};

// Per-setting tally. Joint outcomes are indexed 2*detector + ion, with
// ion S=0, D=1.
struct SettingCounts {
    std::array<std::int64_t, 4> joint{};
    std::int64_t no_photon = 0;
    std::int64_t sequences = 0;

    std::int64_t detected() const { return joint[0] + joint[1] + joint[2] + joint[3]; }
};

// Counts for all settings of a run. A raw table has 18 rows (unswapped
// 0..8, swapped 9..17); summed() folds each swapped row into its partner
// with the detector index flipped, leaving the 9-row path-compensated
// table tomography consumes.
class CountTable {
public:
    explicit CountTable(bool compensated = false) : rows_(compensated ? 9 : 18), compensated_(compensated) {}

    bool compensated() const { return compensated_; }
    int n_settings() const { return static_cast<int>(rows_.size()); }
    SettingCounts& row(int index) { return rows_.at(static_cast<size_t>(index)); }
    const SettingCounts& row(int index) const { return rows_.at(static_cast<size_t>(index)); }

    CountTable summed() const;

    std::int64_t total_detected() const;
    std::int64_t total_sequences() const;

    void write(std::ostream& os) const;
    static CountTable read(std::istream& is);

private:
    std::vector<SettingCounts> rows_;
    bool compensated_;
};

// Jones matrix of a waveplate: fast axis at `theta` from horizontal,
// retardance `retardance` (pi for a half-wave plate, pi/2 for a
// quarter-wave plate).
Operator waveplate(double theta, double retardance);

// Polarization unitary in front of the beamsplitter for one setting
// (quarter-wave plate after half-wave plate). Port 0 transmits what the
// basis labels as its first element; a swapped setting routes it to
// port 1 instead.
Operator analyzer_unitary(const BasisSetting& setting);

// Projector (on the photon qubit) for a click on `detector` behind the
// analyzer of `setting`.
Operator port_projector(const BasisSetting& setting, int detector);

// Born-rule readout of the ion half of a joint ion-photon state along a
// Pauli axis. Outcome D corresponds to the +1 eigenstate (ion basis
// D=+z). The outcome flips with probability `error`.
struct ReadoutResult {
    IonOutcome outcome;
    Operator collapsed; // joint state after the ion projection
};
ReadoutResult ion_readout(const Operator& joint, IonAxis axis, double error, Rng& rng);

// One full experimental sequence; nullopt when neither a photon nor a
// dark count was registered.
std::optional<DetectionEvent> simulate_sequence(const RamanTrajectory& traj,
                                                const NoiseModel& noise,
                                                const BasisSetting& setting,
                                                std::uint64_t seed,
                                                std::int64_t sequence_index);

struct ExperimentResult {
    CountTable counts;
    std::vector<DetectionEvent> events; // ordered by (setting index, sequence index)
};

// Runs sequences_per_setting sequences for every requested setting.
// Requires both swap partners of every basis pair. threads = 0 picks the
// hardware concurrency; the result does not depend on it.
ExperimentResult run_experiment(const SystemParams& params,
                                const NoiseModel& noise,
                                const std::vector<BasisSetting>& settings,
                                std::int64_t sequences_per_setting,
                                std::uint64_t seed,
                                int threads = 0);

// Same, reusing a precomputed trajectory.
ExperimentResult run_experiment(const RamanTrajectory& traj,
                                const NoiseModel& noise,
                                const std::vector<BasisSetting>& settings,
                                std::int64_t sequences_per_setting,
                                std::uint64_t seed,
                                int threads = 0);

// Line-delimited event log.
void write_events(std::ostream& os, const std::vector<DetectionEvent>& events);
std::vector<DetectionEvent> read_events(std::istream& is);

// Tally detected events into a raw 18-row table (no-photon counts are
// not reconstructable from an event log and stay zero).
CountTable counts_from_events(const std::vector<DetectionEvent>& events);

} // namespace ipe
