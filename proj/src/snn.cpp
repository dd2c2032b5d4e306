#include "spikectl/snn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <unordered_set>

namespace spikectl {

namespace {

constexpr std::array<std::string_view, kNumWeightClasses> kClassLabels = {"E1", "E2", "E3", "E4",
                                                                          "I1", "I2", "I3", "I4"};

}  // namespace

std::string_view to_string(WeightClass c) { return kClassLabels[class_index(c)]; }

WeightClass parse_weight_class(std::string_view label) {
    for (std::size_t i = 0; i < kNumWeightClasses; ++i) {
        if (kClassLabels[i] == label) {
            return kAllWeightClasses[i];
        }
    }
    throw ArgumentError("unknown weight class label '" + std::string(label) + "'");
}

std::string_view to_string(Polarity p) { return p == Polarity::Excitatory ? "excitatory" : "inhibitory"; }

std::string_view to_string(DrivePattern p) { return p == DrivePattern::Regular ? "regular" : "poisson"; }

WeightClassTable default_weight_classes(double scale, double synaptic_tau) {
    constexpr std::array<double, 4> ladder = {0.05, 0.1, 0.2, 0.4};
    WeightClassTable table{};
    for (std::size_t i = 0; i < 4; ++i) {
        table[i] = {kAllWeightClasses[i], scale * ladder[i], synaptic_tau};
        table[i + 4] = {kAllWeightClasses[i + 4], -scale * ladder[i], synaptic_tau};
    }
    return table;
}

void validate_weight_classes(const WeightClassTable& classes) {
    for (std::size_t i = 0; i < kNumWeightClasses; ++i) {
        const auto& spec = classes[i];
        if (spec.weight_class != kAllWeightClasses[i]) {
            throw ArgumentError("weight class table out of order at slot " + std::to_string(i));
        }
        if (!(spec.synaptic_tau > 0.0)) {
            throw ArgumentError("synaptic_tau of " + std::string(to_string(spec.weight_class)) + " must be > 0");
        }
        const bool bad_sign = is_excitatory(spec.weight_class) ? spec.efficacy < 0.0 : spec.efficacy > 0.0;
        if (bad_sign || !std::isfinite(spec.efficacy)) {
            throw ArgumentError("efficacy of " + std::string(to_string(spec.weight_class)) +
                                " does not match the class polarity");
        }
    }
}

void NeuronParams::validate() const {
    if (!(membrane_tau > 0.0) || !(adaptation_tau > 0.0)) {
        throw ArgumentError("neuron time constants must be > 0");
    }
    if (!(refractory_period >= 0.0)) {
        throw ArgumentError("refractory_period must be >= 0");
    }
    if (!(threshold > reset_potential)) {
        throw ArgumentError("threshold must exceed reset_potential");
    }
    if (!(gain > 0.0)) {
        throw ArgumentError("gain must be > 0");
    }
    if (!(adaptation_increment >= 0.0)) {
        throw ArgumentError("adaptation_increment must be >= 0");
    }
}

// ---------------------------------------------------------------------------
// EventLog

std::vector<std::uint32_t> EventLog::counts(std::size_t n_neurons, Tick from, Tick to) const {
    std::vector<std::uint32_t> out(n_neurons, 0);
    const auto first = std::upper_bound(events_.begin(), events_.end(), from,
                                        [](Tick t, const Event& e) { return t < e.timestamp; });
    for (auto it = first; it != events_.end() && it->timestamp <= to; ++it) {
        if (it->neuron_id < n_neurons) {
            ++out[it->neuron_id];
        }
    }
    return out;
}

void EventLog::write_csv(std::ostream& out) const {
    out << "neuron_id,timestamp_us\n";
    for (const auto& e : events_) {
        out << e.neuron_id << ',' << e.timestamp << '\n';
    }
}

void EventLog::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    write_csv(out);
}

double spike_rate(const EventLog& log, std::span<const NeuronId> neurons, double window_ms, double at_ms) {
    if (neurons.empty()) {
        throw ArgumentError("spike_rate needs a non-empty neuron set");
    }
    if (!(window_ms > 0.0) || at_ms < window_ms) {
        throw ArgumentError("spike_rate needs window > 0 and at >= window");
    }
    const std::unordered_set<NeuronId> members(neurons.begin(), neurons.end());
    const Tick to = ms_to_ticks(at_ms);
    const Tick from = to - ms_to_ticks(window_ms);
    std::size_t count = 0;
    for (const auto& e : log.events()) {
        if (e.timestamp > from && e.timestamp <= to && members.contains(e.neuron_id)) {
            ++count;
        }
    }
    return static_cast<double>(count) / (window_ms / 1000.0);
}

// ---------------------------------------------------------------------------
// Network

Network::Network(std::size_t n_neurons, const NeuronParams& defaults, const WeightClassTable& classes)
    : params_(n_neurons, defaults),
      states_(n_neurons),
      classes_(classes),
      adjacency_(n_neurons),
      drives_exc_(n_neurons),
      drives_inh_(n_neurons),
      plastic_(n_neurons),
      traces_(n_neurons * kSlots, 0.0),
      drive_tau_(n_neurons * 2, 10.0),
      decay_(n_neurons * kSlots, 1.0),
      adaptation_decay_(n_neurons, 1.0) {
    for (std::size_t i = 0; i < n_neurons; ++i) {
        drive_tau_[2 * i] = weight_class(WeightClass::E4).synaptic_tau;
        drive_tau_[2 * i + 1] = weight_class(WeightClass::I4).synaptic_tau;
    }
    reset_state();
}

Network build_network(std::size_t n_neurons, const NeuronParams& defaults, const WeightClassTable& classes) {
    if (n_neurons < 1) {
        throw ArgumentError("a network needs at least one neuron");
    }
    defaults.validate();
    validate_weight_classes(classes);
    return Network(n_neurons, defaults, classes);
}

void Network::check_id(NeuronId i, const char* what) const {
    if (i >= size()) {
        throw ArgumentError(std::string(what) + " index " + std::to_string(i) + " out of range (n=" +
                            std::to_string(size()) + ")");
    }
}

void Network::set_params(NeuronId i, const NeuronParams& p) {
    check_id(i, "neuron");
    p.validate();
    params_[i] = p;
    decay_dirty_ = true;
}

void Network::set_gain(NeuronId i, double gain) {
    check_id(i, "neuron");
    if (!(gain > 0.0)) {
        throw ArgumentError("gain must be > 0");
    }
    params_[i].gain = gain;
}

void Network::set_membrane_potential(NeuronId i, double v) {
    check_id(i, "neuron");
    states_[i].membrane_potential = v;
}

void Network::connect(NeuronId pre, NeuronId post, WeightClass c) {
    check_id(pre, "pre");
    check_id(post, "post");
    if (class_index(c) >= kNumWeightClasses) {
        throw ArgumentError("unknown weight class");
    }
    connections_[{pre, post}] = c;
    adjacency_dirty_ = true;
}

void Network::disconnect(NeuronId pre, NeuronId post) {
    if (connections_.erase({pre, post}) > 0) {
        adjacency_dirty_ = true;
    }
}

void Network::clear_connections() {
    connections_.clear();
    adjacency_dirty_ = true;
}

std::optional<WeightClass> Network::connection(NeuronId pre, NeuronId post) const {
    const auto it = connections_.find({pre, post});
    if (it == connections_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void Network::set_drive(NeuronId neuron, double rate_hz, Polarity polarity, DrivePattern pattern, std::uint64_t seed,
                        std::optional<WeightClass> weight_class) {
    check_id(neuron, "drive target");
    if (!(rate_hz >= 0.0) || !std::isfinite(rate_hz)) {
        throw ArgumentError("drive rate must be >= 0");
    }
    const bool excitatory = polarity == Polarity::Excitatory;
    const WeightClass cls = weight_class.value_or(excitatory ? WeightClass::E4 : WeightClass::I4);
    if (is_excitatory(cls) != excitatory) {
        throw ArgumentError("drive class " + std::string(to_string(cls)) + " does not match its polarity");
    }
    auto& slot = excitatory ? drives_exc_[neuron] : drives_inh_[neuron];
    if (rate_hz == 0.0) {
        slot.reset();
        return;
    }
    slot = Drive{rate_hz, pattern, seed, cls, now_, Rng(seed)};
    drive_tau_[2 * neuron + (excitatory ? 0 : 1)] = classes_[class_index(cls)].synaptic_tau;
    decay_dirty_ = true;
}

void Network::clear_drive(NeuronId neuron, Polarity polarity) {
    check_id(neuron, "drive target");
    (polarity == Polarity::Excitatory ? drives_exc_ : drives_inh_)[neuron].reset();
}

void Network::clear_drives() {
    for (auto& d : drives_exc_) {
        d.reset();
    }
    for (auto& d : drives_inh_) {
        d.reset();
    }
}

const Drive* Network::drive(NeuronId neuron, Polarity polarity) const {
    check_id(neuron, "drive target");
    const auto& slot = (polarity == Polarity::Excitatory ? drives_exc_ : drives_inh_)[neuron];
    return slot ? &*slot : nullptr;
}

void Network::set_plastic_tau(double tau_ms) {
    if (!(tau_ms > 0.0)) {
        throw ArgumentError("plastic synaptic tau must be > 0");
    }
    plastic_tau_ = tau_ms;
    decay_dirty_ = true;
}

void Network::reset_state() {
    for (std::size_t i = 0; i < size(); ++i) {
        states_[i] = NeuronState{params_[i].resting_potential, 0.0, std::nullopt};
    }
    std::fill(traces_.begin(), traces_.end(), 0.0);
    pending_.clear();
    emitted_.clear();
    now_ = 0;
    for (auto* drives : {&drives_exc_, &drives_inh_}) {
        for (auto& d : *drives) {
            if (d) {
                d->start = 0;
                d->rng = Rng(d->seed);
            }
        }
    }
}

double Network::synaptic_trace(NeuronId post, WeightClass c) const {
    check_id(post, "post");
    return traces_[post * kSlots + class_index(c)];
}

double Network::drive_trace(NeuronId post, Polarity p) const {
    check_id(post, "post");
    return traces_[post * kSlots + (p == Polarity::Excitatory ? kDriveExcSlot : kDriveInhSlot)];
}

double Network::plastic_trace(NeuronId post) const {
    check_id(post, "post");
    return traces_[post * kSlots + kPlasticSlot];
}

double Network::synaptic_current(NeuronId post) const {
    check_id(post, "post");
    double sum = 0.0;
    for (std::size_t s = 0; s < kSlots; ++s) {
        sum += traces_[post * kSlots + s];
    }
    return sum;
}

void Network::rebuild_adjacency() {
    for (auto& out : adjacency_) {
        out.clear();
    }
    for (const auto& [key, cls] : connections_) {
        adjacency_[key.first].emplace_back(key.second, static_cast<std::uint8_t>(class_index(cls)));
    }
    adjacency_dirty_ = false;
}

void Network::refresh_decay(double dt_ms) {
    std::array<double, kNumWeightClasses> class_decay{};
    for (std::size_t c = 0; c < kNumWeightClasses; ++c) {
        class_decay[c] = std::exp(-dt_ms / classes_[c].synaptic_tau);
    }
    const double plastic_decay = std::exp(-dt_ms / plastic_tau_);
    for (std::size_t i = 0; i < size(); ++i) {
        double* d = &decay_[i * kSlots];
        std::copy(class_decay.begin(), class_decay.end(), d);
        d[kDriveExcSlot] = std::exp(-dt_ms / drive_tau_[2 * i]);
        d[kDriveInhSlot] = std::exp(-dt_ms / drive_tau_[2 * i + 1]);
        d[kPlasticSlot] = plastic_decay;
        adaptation_decay_[i] = std::exp(-dt_ms / params_[i].adaptation_tau);
    }
    cached_dt_ = dt_ms;
    decay_dirty_ = false;
}

std::uint32_t Network::drive_spikes(Drive& d, Tick from, Tick to) const {
    if (d.pattern == DrivePattern::Poisson) {
        return d.rng.poisson(d.rate_hz * static_cast<double>(to - from) / kTicksPerSecond);
    }
    // Regular train: spike k of the drive falls at start + k / rate.
    const auto spikes_until = [&](Tick t) {
        const double phase = static_cast<double>(t - d.start) * d.rate_hz / kTicksPerSecond;
        return static_cast<std::int64_t>(std::floor(phase + 1e-9));
    };
    return static_cast<std::uint32_t>(spikes_until(to) - spikes_until(from));
}

std::span<const Event> Network::step(double dt_ms) {
    if (!(dt_ms > 0.0)) {
        throw ArgumentError("timestep must be > 0");
    }
    const Tick dt_ticks = ms_to_ticks(dt_ms);
    if (dt_ticks < 1 || std::abs(ticks_to_ms(dt_ticks) - dt_ms) > 1e-12) {
        throw ArgumentError("timestep must be a whole number of microseconds");
    }
    if (decay_dirty_ || dt_ms != cached_dt_) {
        for (const auto& p : params_) {
            if (dt_ms > p.membrane_tau / 10.0) {
                throw ArgumentError("timestep exceeds membrane_tau / 10");
            }
        }
        refresh_decay(dt_ms);
    }
    if (adjacency_dirty_) {
        rebuild_adjacency();
    }

    const Tick from = now_;
    now_ += dt_ticks;
    const std::size_t n = size();

    for (std::size_t k = 0; k < traces_.size(); ++k) {
        traces_[k] *= decay_[k];
    }

    for (const NeuronId pre : pending_) {
        for (const auto& [post, cls] : adjacency_[pre]) {
            traces_[post * kSlots + cls] += classes_[cls].efficacy;
        }
        if (pre < plastic_.n_neurons()) {
            const auto synapses = plastic_.synapses();
            for (const std::uint32_t idx : plastic_.outgoing(pre)) {
                const auto& s = synapses[idx];
                if (s.enabled) {
                    traces_[s.post * kSlots + kPlasticSlot] += s.weight;
                }
            }
        }
    }
    pending_.clear();

    for (std::size_t i = 0; i < n; ++i) {
        if (auto& d = drives_exc_[i]) {
            if (const auto k = drive_spikes(*d, from, now_)) {
                traces_[i * kSlots + kDriveExcSlot] += k * classes_[class_index(d->weight_class)].efficacy;
            }
        }
        if (auto& d = drives_inh_[i]) {
            if (const auto k = drive_spikes(*d, from, now_)) {
                traces_[i * kSlots + kDriveInhSlot] += k * classes_[class_index(d->weight_class)].efficacy;
            }
        }
    }

    emitted_.clear();
    for (std::size_t i = 0; i < n; ++i) {
        const NeuronParams& p = params_[i];
        NeuronState& s = states_[i];
        const double* tr = &traces_[i * kSlots];
        double current = 0.0;
        for (std::size_t k = 0; k < kSlots; ++k) {
            current += tr[k];
        }
        const bool refractory =
            s.last_spike_time && static_cast<double>(now_ - *s.last_spike_time) < p.refractory_period * kTicksPerMs;
        if (refractory) {
            s.membrane_potential = p.reset_potential;
        } else {
            s.membrane_potential += dt_ms * ((p.resting_potential - s.membrane_potential) / p.membrane_tau +
                                             p.gain * (current - s.adaptation_current));
        }
        s.adaptation_current *= adaptation_decay_[i];
        if (!refractory && s.membrane_potential >= p.threshold) {
            s.membrane_potential = p.reset_potential;
            s.adaptation_current += p.adaptation_increment;
            s.last_spike_time = now_;
            emitted_.push_back({static_cast<NeuronId>(i), now_});
            pending_.push_back(static_cast<NeuronId>(i));
        }
    }
    return emitted_;
}

RunResult Network::run(double duration_ms, std::span<const NeuronId> probes, double dt_ms) {
    if (!(duration_ms > 0.0)) {
        throw ArgumentError("run duration must be > 0");
    }
    for (const NeuronId p : probes) {
        check_id(p, "probe");
    }
    RunResult result;
    const Tick end = now_ + ms_to_ticks(duration_ms);
    while (now_ < end) {
        result.log.append(step(dt_ms));
        for (const NeuronId p : probes) {
            result.traces.push_back(
                {now_, p, states_[p].membrane_potential, states_[p].adaptation_current, synaptic_current(p)});
        }
    }
    return result;
}

}  // namespace spikectl
