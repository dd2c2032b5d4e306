#ifndef SPIKECTL_TESTS_SUPPORT_HPP
#define SPIKECTL_TESTS_SUPPORT_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "spikectl/controller.hpp"
#include "spikectl/harness.hpp"

namespace spikectl::testsupport {

/// The shipped configuration's device, built once per process.
const harness::Device& default_device();

/// Spike counts over the last 100 ms window of a trial.
using WindowCounts = std::vector<std::uint32_t>;

/// Goal g commanded, feedback drive on bin f, nothing else; runs the device
/// network for `settle_ms`.
WindowCounts delta_trial(const harness::Device& device, const controller::ControllerConfig& config, int g, int f,
                         double settle_ms = 500.0);

/// Transform in isolation: the motor feedback paths (results onto ms,
/// cold-start priming, WTA excitation) are cut, ms[m] is driven directly,
/// and the delta grid produces the readout for the signed difference
/// `sign * d` from a real goal/feedback pair.
WindowCounts transform_trial(const harness::Device& device, const controller::ControllerConfig& config, int m,
                             int d, int sign, double settle_ms = 500.0);

/// Share of the spikes of `group` fired by `neuron` (0 when the group is silent).
double share(const WindowCounts& counts, std::span<const NeuronId> group, NeuronId neuron);

/// r_plus followed by r_minus.
std::vector<NeuronId> result_group(const controller::ControllerLayout& layout);

/// The r neuron the transform should leave active for (m, sign * d).
NeuronId expected_result(const controller::ControllerLayout& layout, int m, int d, int sign);

}  // namespace spikectl::testsupport

#endif  // SPIKECTL_TESTS_SUPPORT_HPP
