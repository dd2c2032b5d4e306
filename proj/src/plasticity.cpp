#include "spikectl/plasticity.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "spikectl/snn.hpp"

namespace spikectl::plasticity {

void HebbianRule::validate() const {
    if (!(w_max > w_min)) {
        throw ArgumentError("plasticity needs w_max > w_min");
    }
    if (!(step_fraction > 0.0) || step_fraction > 1.0) {
        throw ArgumentError("plasticity step_fraction must be in (0, 1]");
    }
}

LearningGate evaluate_gate(const GateRule& rule, std::span<const std::uint32_t> window_counts) {
    std::uint64_t gating = 0;
    for (const NeuronId i : rule.gating) {
        gating += window_counts[i];
    }
    std::uint64_t veto = 0;
    for (const NeuronId i : rule.veto) {
        veto += window_counts[i];
    }
    return {!rule.gating.empty() && gating >= rule.min_gating_spikes && veto <= rule.max_veto_spikes};
}

PlasticArray::PlasticArray(std::size_t n_neurons, HebbianRule rule) : rule_(rule), outgoing_(n_neurons) {
    rule_.validate();
}

void PlasticArray::set_rule(const HebbianRule& rule) {
    rule.validate();
    rule_ = rule;
    for (auto& s : synapses_) {
        s.weight = std::clamp(s.weight, rule_.w_min, rule_.w_max);
    }
}

std::size_t PlasticArray::enabled_count() const {
    return static_cast<std::size_t>(
        std::count_if(synapses_.begin(), synapses_.end(), [](const PlasticSynapse& s) { return s.enabled; }));
}

void PlasticArray::enable(NeuronId pre, NeuronId post, double w_init) {
    if (pre >= n_neurons() || post >= n_neurons()) {
        throw ArgumentError("plastic synapse index out of range");
    }
    if (w_init < rule_.w_min || w_init > rule_.w_max) {
        throw ArgumentError("w_init outside [w_min, w_max]");
    }
    const auto [it, inserted] = index_.try_emplace({pre, post}, static_cast<std::uint32_t>(synapses_.size()));
    if (inserted) {
        synapses_.push_back({pre, post, w_init, true});
        outgoing_[pre].push_back(it->second);
    } else {
        synapses_[it->second].weight = w_init;
        synapses_[it->second].enabled = true;
    }
}

void PlasticArray::disable(NeuronId pre, NeuronId post) {
    if (const auto it = index_.find({pre, post}); it != index_.end()) {
        synapses_[it->second].enabled = false;
    }
}

void PlasticArray::clear() {
    synapses_.clear();
    index_.clear();
    for (auto& out : outgoing_) {
        out.clear();
    }
}

std::optional<double> PlasticArray::weight(NeuronId pre, NeuronId post) const {
    const auto it = index_.find({pre, post});
    if (it == index_.end() || !synapses_[it->second].enabled) {
        return std::nullopt;
    }
    return synapses_[it->second].weight;
}

void PlasticArray::set_weight(NeuronId pre, NeuronId post, double weight) {
    const auto it = index_.find({pre, post});
    if (it == index_.end()) {
        throw ArgumentError("no plastic synapse (" + std::to_string(pre) + ", " + std::to_string(post) + ")");
    }
    synapses_[it->second].weight = std::clamp(weight, rule_.w_min, rule_.w_max);
}

std::size_t PlasticArray::update(std::span<const std::uint32_t> window_counts, LearningGate gate) {
    if (!gate.open) {
        return 0;
    }
    const double dw = rule_.delta_w();
    std::size_t changed = 0;
    for (auto& s : synapses_) {
        if (!s.enabled || window_counts[s.pre] < rule_.theta_pre || window_counts[s.post] < rule_.theta_post) {
            continue;
        }
        const double next = std::min(s.weight + dw, rule_.w_max);
        if (next != s.weight) {
            s.weight = next;
            ++changed;
        }
    }
    return changed;
}

void enable_plastic(Network& network, std::span<const NeuronId> pre_set, std::span<const NeuronId> post_set,
                    double w_init) {
    for (const NeuronId pre : pre_set) {
        for (const NeuronId post : post_set) {
            network.plastic().enable(pre, post, w_init);
        }
    }
}

std::size_t plasticity_update(PlasticArray& synapses, std::span<const std::uint32_t> window_counts,
                              LearningGate gate) {
    return synapses.update(window_counts, gate);
}

std::string weights_to_json(const PlasticArray& synapses) {
    auto triplets = nlohmann::json::array();
    for (const auto& s : synapses.synapses()) {
        if (s.enabled) {
            triplets.push_back({{"pre", s.pre}, {"post", s.post}, {"weight", s.weight}});
        }
    }
    return triplets.dump(2);
}

void weights_from_json(PlasticArray& synapses, const std::string& text) {
    const auto doc = nlohmann::json::parse(text);
    if (!doc.is_array()) {
        throw ArgumentError("weights document must be an array of {pre, post, weight}");
    }
    for (const auto& t : doc) {
        const auto pre = t.at("pre").get<NeuronId>();
        const auto post = t.at("post").get<NeuronId>();
        const double w = t.at("weight").get<double>();
        synapses.enable(pre, post, synapses.rule().w_min);
        synapses.set_weight(pre, post, w);
    }
}

}  // namespace spikectl::plasticity
