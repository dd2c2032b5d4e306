#ifndef SPIKECTL_HARNESS_HPP
#define SPIKECTL_HARNESS_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spikectl/controller.hpp"
#include "spikectl/mismatch.hpp"
#include "spikectl/plant.hpp"
#include "spikectl/plasticity.hpp"
#include "spikectl/snn.hpp"

namespace spikectl::harness {

constexpr double kImuPeriodMs = 5.0;      // 200 Hz sampling
constexpr double kWindowMs = 100.0;       // rate readout and learning window

/// Four ascending thresholds splitting IMU readings into bins 1..5.
/// Intervals are half-open and lower-inclusive: a reading equal to
/// threshold k falls in bin k + 1.
struct BinMap {
    std::array<double, 4> thresholds{759.0, 1265.0, 1771.0, 2277.0};

    void validate() const;
    /// Thresholds at the midpoints between adjacent steady states.
    static BinMap centered(const std::array<double, 5>& steady_states);
};

int bin_imu(double measurement, const BinMap& map);

/// The simulated chip: size, neuron defaults, weight classes, mismatch, and
/// how the controller neurons are picked.
struct DeviceConfig {
    std::size_t n_neurons = 256;
    NeuronParams neuron;
    WeightClassTable weight_classes = default_weight_classes();
    double mismatch_cv = 0.0;
    std::uint64_t mismatch_seed = 1;
    double characterization_rate_hz = mismatch::kReferenceStimulusHz;
    double characterization_ms = 5000.0;
    WeightClass characterization_class = WeightClass::E1;
    double selection_tolerance_hz = 10.0;
};

/// Experiment timing. All durations in ms.
struct ExperimentConfig {
    std::string kind = "staircase";  // staircase | stop_and_go | learn_all | characterize
    std::vector<int> goal_schedule{1, 2, 3, 4, 5, 4, 3, 2, 1};
    double step_ms = 12'000.0;
    double settle_hold_ms = 2'000.0;
    double settle_limit_ms = 10'000.0;
    // stop_and_go
    int hold_goal = 2;
    double converge_ms = 16'000.0;
    double hold_ms = 8'000.0;
    double release_ms = 12'000.0;
    // learn_all
    double learn_converge_ms = 12'000.0;
    double probe_ms = 6'000.0;
    double probe_limit_ms = 5'000.0;
    double rest_ms = 3'000.0;

    void validate() const;
};

struct HarnessConfig {
    std::uint64_t seed = 1;  // IMU noise and any Poisson drives
    DeviceConfig device;
    controller::ControllerConfig controller = controller::default_controller_config();
    plasticity::HebbianRule learning;
    plant::PlantParams plant;
    BinMap bins;
    double u_per_hz = 0.0;  // proportionality constant c of u = c * rate(mr)
    ExperimentConfig experiment;

    void validate() const;
};

/// Shipped defaults (the calibrated values in configs/default.json).
HarnessConfig default_config();

HarnessConfig config_from_json(const std::string& text);
std::string config_to_json(const HarnessConfig& config);
HarnessConfig load_config(const std::string& path);

/// A programmed chip: mismatched network with the controller installed.
struct Device {
    Network network;
    controller::Wiring wiring;
    mismatch::RateProfile profile;
    mismatch::Selection selection;
};

Device build_device(const DeviceConfig& device, const controller::ControllerConfig& controller,
                    const plasticity::HebbianRule& learning);

struct ImuRecord {
    double t_ms = 0.0;
    double omega_true = 0.0;
    double omega_measured = 0.0;
    int bin = 0;
    double u = 0.0;
};

struct WindowRecord {
    double t_end_ms = 0.0;
    double mr_rate_hz = 0.0;
    double u = 0.0;
    bool gate_open = false;
    std::size_t potentiated = 0;
    int goal = 0;
    bool held = false;
    bool probe = false;
};

/// Network and plant advanced in lockstep.
///
/// Every 5 ms the plant is advanced, the IMU sampled and binned, and the
/// 800 Hz feedback drive moved to the matching feedback neuron when the bin
/// changes. Every 100 ms the motor command is set to c times the mr
/// population rate of the closing window and, while learning is on, the
/// plastic array is updated once the gate test has passed for
/// gate_hold_windows consecutive windows.
class ClosedLoop {
public:
    ClosedLoop(const HarnessConfig& config, const Device& device);

    void set_goal(int g, bool learning = false);
    void set_held(bool held);
    void set_probe(bool on);
    /// While frozen the feedback drive stays on its current neuron.
    void set_feedback_frozen(bool frozen) { feedback_frozen_ = frozen; }
    void set_learning(bool on) { learning_ = on; }
    /// Moves the feedback drive to `bin` and freezes it there.
    void pin_feedback(int bin);

    /// Advances by `duration_ms` (a multiple of the 0.1 ms timestep).
    void advance(double duration_ms);

    double now_ms() const { return ticks_to_ms(network_.now()); }
    const HarnessConfig& config() const { return config_; }
    int goal() const { return goal_; }
    int feedback_bin() const { return bin_; }
    const plant::PlantState& plant_state() const { return plant_; }

    const Network& network() const { return network_; }
    Network& network() { return network_; }
    const controller::ControllerLayout& layout() const { return layout_; }
    const EventLog& log() const { return log_; }
    const std::vector<ImuRecord>& imu() const { return imu_; }
    const std::vector<WindowRecord>& windows() const { return windows_; }

    /// Mean mr population rate over the windows ending in (from, to].
    double mean_mr_rate(double from_ms, double to_ms) const;

private:
    void on_imu_tick();
    void on_window_end();

    HarnessConfig config_;
    Network network_;
    controller::ControllerLayout layout_;
    plasticity::GateRule gate_rule_;
    plant::PlantState plant_;
    Rng imu_rng_;
    EventLog log_;
    std::vector<ImuRecord> imu_;
    std::vector<WindowRecord> windows_;
    int goal_ = 0;
    int bin_ = 0;
    bool feedback_frozen_ = false;
    bool learning_ = false;
    bool probe_ = false;
    double u_ = 0.0;
    std::uint32_t gate_run_ = 0;  // consecutive windows passing the gate test
    Tick next_imu_ = 0;
    Tick next_window_ = 0;
};

/// Bin of the mean IMU reading over each 100 ms window.
struct WindowBin {
    double t_end_ms = 0.0;
    int bin = 0;
};
std::vector<WindowBin> window_bins(const std::vector<ImuRecord>& imu, const BinMap& bins);

/// Time from `from_ms` until the windowed IMU bin first equals `goal` and
/// then stays there for `hold_ms`, looking only up to `until_ms`.
std::optional<double> settle_time(const std::vector<WindowBin>& bins, int goal, double from_ms, double until_ms,
                                  double hold_ms);

// Experiments. Each returns the summary document (JSON text) and leaves
// the raw traces in the loop object.

struct StepResult {
    int goal = 0;
    double start_ms = 0.0;
    std::optional<double> settle_ms;
    std::string direction;  // initial | rising | falling
    double mean_omega = 0.0;
    double std_omega = 0.0;
};

struct StaircaseResult {
    std::vector<StepResult> steps;
    bool all_settled = false;
    double mean_rising_ms = 0.0;
    double mean_falling_ms = 0.0;
};

StaircaseResult run_staircase(ClosedLoop& loop, const ExperimentConfig& ex);

struct StopAndGoResult {
    double converged_at_ms = -1.0;  // settle instant before the hold, -1 if none
    double hold_start_ms = 0.0;
    double hold_end_ms = 0.0;
    double pre_hold_mr_hz = 0.0;
    double hold_mr_hz = 0.0;
    double post_release_mr_hz = 0.0;
    std::optional<double> reconverge_ms;
};

StopAndGoResult run_stop_and_go(ClosedLoop& loop, const ExperimentConfig& ex);

struct ProbeResult {
    int goal = 0;
    double probe_start_ms = 0.0;
    std::optional<double> reach_ms;  // first window with the goal bin
    int final_bin = 0;
    double mr_rate_hz = 0.0;
    double converged_mr_hz = 0.0;    // feedback-controlled rate before the probe
    std::size_t gate_open_windows = 0;
    std::uint64_t stray_spikes = 0;  // processing populations during the probe
};

struct LearnAllResult {
    std::vector<ProbeResult> probes;
};

LearnAllResult run_learn_all(ClosedLoop& loop, const ExperimentConfig& ex);

struct FluctuationResult {
    double closed_mean = 0.0;
    double closed_std = 0.0;
    double mean_u = 0.0;
    double open_mean = 0.0;
    double open_std = 0.0;
};

/// Measured IMU statistics over `measure_ms` of closed-loop control at
/// `goal` (after `settle_ms`), and of the plant alone under the constant
/// command equal to the closed-loop mean u, started at its steady state.
FluctuationResult run_fluctuation(const HarnessConfig& config, const Device& device, int goal, double settle_ms,
                                  double measure_ms);

std::string staircase_summary(const StaircaseResult& r, const ClosedLoop& loop);
std::string stop_and_go_summary(const StopAndGoResult& r, const ClosedLoop& loop);
std::string learn_all_summary(const LearnAllResult& r, const ClosedLoop& loop);

void write_imu_csv(const std::vector<ImuRecord>& imu, std::ostream& out);

/// Runs config.experiment.kind and writes its files into `out_dir`.
/// Returns the summary JSON.
std::string run_experiment(const HarnessConfig& config, const std::string& out_dir);

/// Runs the characterization sweep and writes rate_profile.csv (+ sorted).
mismatch::RateProfile run_characterize(const HarnessConfig& config, const std::string& out_dir);

// Calibration of the motor map and learning ceiling.

struct MotorCalibration {
    std::array<double, 5> mr_rate_hz{};  // held command k -> mr population rate
    double u_per_hz = 0.0;
    double plant_gain = 0.0;
    BinMap bins;
};

/// Holds each command in turn (goal k, feedback pinned to bin k, ms[k]
/// kicked once) and measures the mr population rate. c maps the command 5
/// rate to u = 1, the plant gain puts command 2 at `omega_at_command_2`, and
/// the bins are centered on the five steady states.
MotorCalibration calibrate_motor(const HarnessConfig& config, const Device& device,
                                 double omega_at_command_2 = 1012.0);

/// w_max for which driving learn_cmd[5] alone through fully potentiated
/// synapses reproduces the held command 5 mr rate.
double calibrate_w_max(const HarnessConfig& config, const Device& device, double target_mr_hz);

}  // namespace spikectl::harness

#endif  // SPIKECTL_HARNESS_HPP
