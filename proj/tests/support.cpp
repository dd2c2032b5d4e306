#include "support.hpp"

#include <algorithm>

namespace spikectl::testsupport {

const harness::Device& default_device() {
    static const harness::Device device = [] {
        const auto c = harness::default_config();
        return harness::build_device(c.device, c.controller, c.learning);
    }();
    return device;
}

namespace {

WindowCounts last_window(const Network& net, const EventLog& log) {
    return log.counts(net.size(), net.now() - ms_to_ticks(harness::kWindowMs), net.now());
}

}  // namespace

WindowCounts delta_trial(const harness::Device& device, const controller::ControllerConfig& config, int g, int f,
                         double settle_ms) {
    Network net = device.network;
    const auto& layout = device.wiring.layout;
    controller::set_goal(net, layout, config, g);
    controller::drive_feedback(net, layout, config, f);
    const auto result = net.run(settle_ms);
    return last_window(net, result.log);
}

WindowCounts transform_trial(const harness::Device& device, const controller::ControllerConfig& config, int m,
                             int d, int sign, double settle_ms) {
    Network net = device.network;
    const auto& layout = device.wiring.layout;
    for (const char* name : {"result_to_motor", "bootstrap", "motor_to_wta"}) {
        for (const auto& [pre, post] : device.wiring.group(name).synapses) {
            net.disconnect(pre, post);
        }
    }
    // Put the difference where both goal and feedback stay in 1..5.
    const int g = sign > 0 ? 1 + d : 1;
    const int f = sign > 0 ? 1 : 1 + d;
    controller::set_goal(net, layout, config, g);
    controller::drive_feedback(net, layout, config, f);
    net.set_drive(layout.ms[m - 1], 200.0, Polarity::Excitatory, DrivePattern::Regular, 0, WeightClass::E3);
    const auto result = net.run(settle_ms);
    return last_window(net, result.log);
}

double share(const WindowCounts& counts, std::span<const NeuronId> group, NeuronId neuron) {
    std::uint64_t total = 0;
    for (const NeuronId n : group) {
        total += counts[n];
    }
    return total == 0 ? 0.0 : static_cast<double>(counts[neuron]) / static_cast<double>(total);
}

std::vector<NeuronId> result_group(const controller::ControllerLayout& layout) {
    std::vector<NeuronId> out(layout.r_plus.begin(), layout.r_plus.end());
    out.insert(out.end(), layout.r_minus.begin(), layout.r_minus.end());
    return out;
}

NeuronId expected_result(const controller::ControllerLayout& layout, int m, int d, int sign) {
    const int target = std::clamp(m + sign * d, 1, controller::kLevels);
    return sign > 0 ? layout.r_plus[target - 1] : layout.r_minus[target - 1];
}

}  // namespace spikectl::testsupport
