#ifndef SPIKECTL_PLASTICITY_HPP
#define SPIKECTL_PLASTICITY_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spikectl/types.hpp"

namespace spikectl {

class Network;

namespace plasticity {

/// One entry of the plastic synapse array.
struct PlasticSynapse {
    NeuronId pre = 0;
    NeuronId post = 0;
    double weight = 0.0;
    bool enabled = true;
};

/// Windowed rate-Hebbian potentiation.
///
/// Every update window, an enabled synapse whose presynaptic neuron emitted
/// at least `theta_pre` spikes and whose postsynaptic neuron emitted at least
/// `theta_post` spikes gains `step_fraction * (w_max - w_min)`, clamped at
/// `w_max`. Nothing ever decreases a weight.
struct HebbianRule {
    std::uint32_t theta_pre = 3;
    std::uint32_t theta_post = 3;
    double w_min = 0.0;
    double w_max = 1.0;
    double step_fraction = 0.1;

    double delta_w() const { return step_fraction * (w_max - w_min); }
    void validate() const;
};

/// Learning gate for one update window.
struct LearningGate {
    bool open = false;
};

/// Gate criterion: open when the designated gating neurons emitted at least
/// `min_gating_spikes` spikes in the window and the vetoing neurons emitted
/// at most `max_veto_spikes`.
struct GateRule {
    std::vector<NeuronId> gating;
    std::vector<NeuronId> veto;
    std::uint32_t min_gating_spikes = 3;
    std::uint32_t max_veto_spikes = 0;
};

/// Evaluates the gate from one window's per-neuron spike counts.
LearningGate evaluate_gate(const GateRule& rule, std::span<const std::uint32_t> window_counts);

/// The plastic array of the device. Plastic synapses deliver their weight
/// to the postsynaptic plastic trace on each presynaptic spike.
class PlasticArray {
public:
    explicit PlasticArray(std::size_t n_neurons = 0, HebbianRule rule = {});

    const HebbianRule& rule() const { return rule_; }
    void set_rule(const HebbianRule& rule);

    std::size_t n_neurons() const { return outgoing_.size(); }
    std::size_t size() const { return synapses_.size(); }
    std::size_t enabled_count() const;

    /// Enables (pre, post) at `w_init`; an existing entry is reset.
    void enable(NeuronId pre, NeuronId post, double w_init);
    void disable(NeuronId pre, NeuronId post);
    void clear();

    std::optional<double> weight(NeuronId pre, NeuronId post) const;
    /// Overwrites a weight, clamped to [w_min, w_max]. Used for imports.
    void set_weight(NeuronId pre, NeuronId post, double weight);

    std::span<const PlasticSynapse> synapses() const { return synapses_; }
    std::span<const std::uint32_t> outgoing(NeuronId pre) const { return outgoing_[pre]; }

    /// One learning update. Returns the number of synapses that changed.
    std::size_t update(std::span<const std::uint32_t> window_counts, LearningGate gate);

private:
    HebbianRule rule_;
    std::vector<PlasticSynapse> synapses_;
    std::map<std::pair<NeuronId, NeuronId>, std::uint32_t> index_;
    std::vector<std::vector<std::uint32_t>> outgoing_;
};

/// Enables the full product pre_set x post_set on the network's plastic array.
void enable_plastic(Network& network, std::span<const NeuronId> pre_set,
                    std::span<const NeuronId> post_set, double w_init);

/// Applies one windowed update to the array (no-op while the gate is closed).
std::size_t plasticity_update(PlasticArray& synapses, std::span<const std::uint32_t> window_counts,
                              LearningGate gate);

/// JSON export of `{pre, post, weight}` triplets.
std::string weights_to_json(const PlasticArray& synapses);
/// Imports triplets produced by weights_to_json; entries are enabled.
void weights_from_json(PlasticArray& synapses, const std::string& text);

}  // namespace plasticity
}  // namespace spikectl

#endif  // SPIKECTL_PLASTICITY_HPP
