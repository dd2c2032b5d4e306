#ifndef SPIKECTL_SNN_HPP
#define SPIKECTL_SNN_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spikectl/plasticity.hpp"
#include "spikectl/random.hpp"
#include "spikectl/types.hpp"

namespace spikectl {

/// The eight device-wide synaptic weight classes. Every non-plastic
/// connection carries one of these labels instead of a free weight.
enum class WeightClass : std::uint8_t { E1, E2, E3, E4, I1, I2, I3, I4 };

constexpr std::size_t kNumWeightClasses = 8;
constexpr std::array<WeightClass, kNumWeightClasses> kAllWeightClasses = {
    WeightClass::E1, WeightClass::E2, WeightClass::E3, WeightClass::E4,
    WeightClass::I1, WeightClass::I2, WeightClass::I3, WeightClass::I4};

constexpr bool is_excitatory(WeightClass c) { return static_cast<int>(c) < 4; }
constexpr std::size_t class_index(WeightClass c) { return static_cast<std::size_t>(c); }

std::string_view to_string(WeightClass c);
/// Throws ArgumentError for anything but "E1".."E4", "I1".."I4".
WeightClass parse_weight_class(std::string_view label);

struct SynapseSpec {
    WeightClass weight_class = WeightClass::E1;
    double efficacy = 0.0;      // signed, a.u.
    double synaptic_tau = 10.0; // ms
};

using WeightClassTable = std::array<SynapseSpec, kNumWeightClasses>;

/// E1..E4 = scale * {0.05, 0.1, 0.2, 0.4}, I1..I4 the negatives, all with
/// the same synaptic time constant.
WeightClassTable default_weight_classes(double scale = 1.0, double synaptic_tau = 10.0);

/// Checks 4 positive + 4 negative classes, labels in order, taus > 0.
/// E classes may have zero efficacy (a disabled class), I classes likewise.
void validate_weight_classes(const WeightClassTable& classes);

/// Adaptive leaky integrate-and-fire parameters (times in ms, potentials in a.u.).
///
///   dV/dt = (V_rest - V) / tau_m + gain * (I_syn - I_adapt)
///   dI_adapt/dt = -I_adapt / tau_adapt
///   V >= threshold  ->  spike, V = V_reset, I_adapt += adaptation_increment
struct NeuronParams {
    double membrane_tau = 20.0;
    double threshold = 1.0;
    double reset_potential = 0.0;
    double resting_potential = 0.0;
    double refractory_period = 2.0;
    double adaptation_increment = 0.05;
    double adaptation_tau = 100.0;
    double gain = 1.0;

    void validate() const;
};

struct NeuronState {
    double membrane_potential = 0.0;
    double adaptation_current = 0.0;
    std::optional<Tick> last_spike_time;
};

/// AER event: emitting neuron and timestamp.
struct Event {
    NeuronId neuron_id = 0;
    Tick timestamp = 0;

    friend bool operator==(const Event&, const Event&) = default;
};

enum class Polarity { Excitatory, Inhibitory };
enum class DrivePattern { Regular, Poisson };

std::string_view to_string(Polarity p);
std::string_view to_string(DrivePattern p);

/// External spike train into a neuron's virtual input synapse.
struct Drive {
    double rate_hz = 0.0;
    DrivePattern pattern = DrivePattern::Regular;
    std::uint64_t seed = 0;
    WeightClass weight_class = WeightClass::E4;
    Tick start = 0;
    Rng rng;
};

/// Ordered list of AER events.
class EventLog {
public:
    EventLog() = default;
    explicit EventLog(std::vector<Event> events) : events_(std::move(events)) {}

    void append(const Event& e) { events_.push_back(e); }
    void append(std::span<const Event> events) { events_.insert(events_.end(), events.begin(), events.end()); }

    std::span<const Event> events() const { return events_; }
    std::size_t size() const { return events_.size(); }
    bool empty() const { return events_.empty(); }

    /// Spike count per neuron for timestamps in (from, to].
    std::vector<std::uint32_t> counts(std::size_t n_neurons, Tick from, Tick to) const;

    /// CSV with header `neuron_id,timestamp_us`.
    void write_csv(std::ostream& out) const;
    void write_csv(const std::string& path) const;

    friend bool operator==(const EventLog&, const EventLog&) = default;

private:
    std::vector<Event> events_;
};

/// Population rate (Hz) of `neurons` over the window (at - window, at].
/// The rate is per population, not per neuron: 10 spikes in 100 ms is 100 Hz
/// whatever the set size.
double spike_rate(const EventLog& log, std::span<const NeuronId> neurons, double window_ms, double at_ms);

struct TraceSample {
    Tick time = 0;
    NeuronId neuron = 0;
    double membrane_potential = 0.0;
    double adaptation_current = 0.0;
    double synaptic_current = 0.0;
};

struct RunResult {
    EventLog log;
    std::vector<TraceSample> traces;
};

/// Fixed-timestep emulation of the spiking device.
///
/// Spikes emitted in one step reach their targets in the next step. Within a
/// step the order is: decay traces, deliver pending spikes and drive spikes,
/// integrate membranes, emit events in ascending neuron id.
class Network {
public:
    static constexpr double kDefaultDt = 0.1;

    Network(std::size_t n_neurons, const NeuronParams& defaults, const WeightClassTable& classes);

    std::size_t size() const { return params_.size(); }
    Tick now() const { return now_; }

    const NeuronParams& params(NeuronId i) const { return params_.at(i); }
    void set_params(NeuronId i, const NeuronParams& p);
    void set_gain(NeuronId i, double gain);
    const NeuronState& state(NeuronId i) const { return states_.at(i); }
    void set_membrane_potential(NeuronId i, double v);

    const WeightClassTable& weight_classes() const { return classes_; }
    const SynapseSpec& weight_class(WeightClass c) const { return classes_[class_index(c)]; }

    /// Non-plastic connection; reconnecting overwrites the class.
    void connect(NeuronId pre, NeuronId post, WeightClass c);
    void disconnect(NeuronId pre, NeuronId post);
    void clear_connections();
    std::optional<WeightClass> connection(NeuronId pre, NeuronId post) const;
    const std::map<std::pair<NeuronId, NeuronId>, WeightClass>& connections() const { return connections_; }

    /// Installs (or replaces) the drive on one of the neuron's two virtual
    /// input synapses. Rate 0 removes it. The class defaults to E4/I4.
    void set_drive(NeuronId neuron, double rate_hz, Polarity polarity, DrivePattern pattern = DrivePattern::Regular,
                   std::uint64_t seed = 0, std::optional<WeightClass> weight_class = std::nullopt);
    void clear_drive(NeuronId neuron, Polarity polarity);
    void clear_drives();
    const Drive* drive(NeuronId neuron, Polarity polarity) const;

    plasticity::PlasticArray& plastic() { return plastic_; }
    const plasticity::PlasticArray& plastic() const { return plastic_; }
    double plastic_tau() const { return plastic_tau_; }
    void set_plastic_tau(double tau_ms);

    /// Advances one timestep; the returned span is valid until the next call.
    std::span<const Event> step(double dt_ms = kDefaultDt);

    RunResult run(double duration_ms, std::span<const NeuronId> probes = {}, double dt_ms = kDefaultDt);

    /// Resting state, empty traces, clock at zero. Topology and drives stay.
    void reset_state();

    double synaptic_trace(NeuronId post, WeightClass c) const;
    double drive_trace(NeuronId post, Polarity p) const;
    double plastic_trace(NeuronId post) const;
    /// Sum of all traces onto a neuron.
    double synaptic_current(NeuronId post) const;

private:
    static constexpr std::size_t kSlots = kNumWeightClasses + 3;
    static constexpr std::size_t kDriveExcSlot = kNumWeightClasses;
    static constexpr std::size_t kDriveInhSlot = kNumWeightClasses + 1;
    static constexpr std::size_t kPlasticSlot = kNumWeightClasses + 2;

    void check_id(NeuronId i, const char* what) const;
    void rebuild_adjacency();
    void refresh_decay(double dt_ms);
    std::uint32_t drive_spikes(Drive& d, Tick from, Tick to) const;

    std::vector<NeuronParams> params_;
    std::vector<NeuronState> states_;
    WeightClassTable classes_;
    std::map<std::pair<NeuronId, NeuronId>, WeightClass> connections_;
    std::vector<std::vector<std::pair<NeuronId, std::uint8_t>>> adjacency_;
    bool adjacency_dirty_ = false;

    std::vector<std::optional<Drive>> drives_exc_;
    std::vector<std::optional<Drive>> drives_inh_;

    plasticity::PlasticArray plastic_;
    double plastic_tau_ = 10.0;

    std::vector<double> traces_;        // n * kSlots
    std::vector<double> drive_tau_;     // n * 2, tau of the slot's current class
    std::vector<double> decay_;         // n * kSlots, for cached_dt_
    std::vector<double> adaptation_decay_;
    double cached_dt_ = -1.0;
    bool decay_dirty_ = true;

    std::vector<NeuronId> pending_;
    std::vector<Event> emitted_;
    Tick now_ = 0;
};

/// Validating factory: no connections, no drives, everything at rest.
Network build_network(std::size_t n_neurons, const NeuronParams& defaults, const WeightClassTable& classes);

}  // namespace spikectl

#endif  // SPIKECTL_SNN_HPP
