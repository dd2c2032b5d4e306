#ifndef SPIKECTL_CONTROLLER_HPP
#define SPIKECTL_CONTROLLER_HPP

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spikectl/plasticity.hpp"
#include "spikectl/snn.hpp"

namespace spikectl::controller {

constexpr int kLevels = 5;        // goals, feedback bins, commands
constexpr int kMaxMagnitude = 4;  // largest |goal - feedback|

/// Device neurons assigned to the controller populations.
///
/// Conventions: delta[f-1][g-1] is the cell for feedback bin f and goal g;
/// d_plus[d] has magnitude d (d_plus[0] is the zero-difference neuron);
/// d_minus[d-1] has magnitude d; transform[m-1][d-1] is the cell for
/// command m and magnitude d (d = 1..4; holding is done by the relay path);
/// ms[k-1] is command k.
struct ControllerLayout {
    std::array<NeuronId, 5> goal{};
    std::array<NeuronId, 5> feedback{};
    std::array<std::array<NeuronId, 5>, 5> delta{};
    std::array<NeuronId, 5> d_plus{};
    std::array<NeuronId, 4> d_minus{};
    std::array<std::array<NeuronId, 4>, 5> transform{};
    std::array<NeuronId, 5> r_plus{};
    std::array<NeuronId, 5> r_minus{};
    std::array<NeuronId, 5> ms{};
    std::array<NeuronId, 5> mr{};
    NeuronId wta_aux = 0;
    std::array<NeuronId, 5> learn_cmd{};

    static constexpr std::size_t kSize = 5 + 5 + 25 + 5 + 4 + 20 + 5 + 5 + 5 + 5 + 1 + 5;

    /// Every assigned neuron, population by population.
    std::vector<NeuronId> all() const;
    /// (population name, members) in declaration order.
    std::vector<std::pair<std::string, std::vector<NeuronId>>> populations() const;

    /// Readout neuron for a signed difference goal - feedback in [-4, 4].
    NeuronId readout(int difference) const;
    /// All nine readout neurons.
    std::vector<NeuronId> readouts() const;

    /// Throws ArgumentError on duplicates or indices >= n_neurons.
    void validate(std::size_t n_neurons) const;
};

/// Fills the layout from the first kSize entries of `selected`.
ControllerLayout make_layout(std::span<const NeuronId> selected);

/// Names of all connection groups, in wiring order.
const std::vector<std::string>& connection_group_names();

/// External stimulation used by the controller: rate and input class.
struct DriveSetting {
    double rate_hz = 0.0;
    WeightClass weight_class = WeightClass::E1;
};

struct ControllerConfig {
    /// Weight class per connection group (keys from connection_group_names()).
    std::map<std::string, WeightClass> group_classes;

    DriveSetting goal_background;   // tonic, keeps every goal neuron active
    DriveSetting goal_command;      // inhibitory, silences the commanded goal
    DriveSetting delta_background;  // tonic bias on every delta cell
    DriveSetting feedback;          // onto the feedback neuron of the current bin
    DriveSetting learn_command;     // onto learn_cmd[g] while goal g is commanded
    DriveSetting probe_inhibition;  // onto r_plus, r_minus and ms during probes

    /// Learning gate: d_plus[0] must fire at least this much in a window...
    std::uint32_t gate_min_spikes = 3;
    /// ...while all other readouts together fire at most this much.
    std::uint32_t gate_max_veto_spikes = 0;
    /// ...for this many consecutive windows, counting the current one. A
    /// plant passing through the goal bin under the wrong command satisfies
    /// the per-window test only briefly.
    std::uint32_t gate_hold_windows = 10;

    /// Throws ArgumentError if a group is missing or unknown, or a class has
    /// the wrong polarity for its group.
    void validate() const;
};

/// Tuned defaults for the default device (see configs/default.json).
ControllerConfig default_controller_config();

/// Whether a group is excitatory (true) or inhibitory (false).
bool group_is_excitatory(const std::string& group);

/// One installed connection group.
struct ConnectionGroup {
    std::string name;
    WeightClass weight_class = WeightClass::E1;
    std::vector<std::pair<NeuronId, NeuronId>> synapses;
};

/// The controller "program": populations plus every connection group.
struct Wiring {
    ControllerLayout layout;
    std::vector<ConnectionGroup> groups;
    std::size_t plastic_synapses = 0;

    const ConnectionGroup& group(const std::string& name) const;
    std::size_t connection_count() const;
};

// Individual wiring stages. Each installs its groups on the network and
// returns them.
std::vector<ConnectionGroup> wire_delta_operator(Network& network, const ControllerLayout& layout,
                                                 const ControllerConfig& config);
std::vector<ConnectionGroup> wire_transform_operator(Network& network, const ControllerLayout& layout,
                                                     const ControllerConfig& config);
std::vector<ConnectionGroup> wire_motor_populations(Network& network, const ControllerLayout& layout,
                                                    const ControllerConfig& config);
std::vector<ConnectionGroup> wire_learning_path(Network& network, const ControllerLayout& layout,
                                                const ControllerConfig& config);

/// Builds the full controller on the neurons in `selected` (at least
/// ControllerLayout::kSize of them): installs every connection group, the
/// plastic learn_cmd x mr array at weight w_min, and the tonic drives.
/// Existing connections among the layout neurons are replaced, so building
/// twice gives the same network.
Wiring build_controller(Network& network, std::span<const NeuronId> selected, const ControllerConfig& config);

/// Tonic drives: goal background and delta background. Called by
/// build_controller; exposed for tests that rebuild drives.
void install_tonic_drives(Network& network, const ControllerLayout& layout, const ControllerConfig& config);

/// Synapse count each group must have, computed from its connectivity rule.
std::map<std::string, std::size_t> expected_group_sizes();

struct AuditEntry {
    std::string group;
    std::size_t expected = 0;
    std::size_t installed = 0;  // pairs present in the network with the group's class
    bool ok = false;
};

struct AuditReport {
    std::vector<AuditEntry> entries;
    std::size_t neurons = 0;
    bool ok = false;
};

/// Checks every group against its formula and against the network.
AuditReport audit(const Network& network, const Wiring& wiring);

/// JSON document with populations, groups (with classes and synapse
/// lists), drives and the audit report.
std::string wiring_to_json(const Wiring& wiring, const ControllerConfig& config, const AuditReport& report);

// Goal and probe control.

/// Inhibits goal[g] (and drives learn_cmd[g] when `learning` is set); all
/// other goal commands and learn drives are cleared. g = 0 clears the goal.
void set_goal(Network& network, const ControllerLayout& layout, const ControllerConfig& config, int g,
              bool learning = false);

/// Drives learn_cmd[g] alone (g = 0 stops every learn drive).
void drive_learn_command(Network& network, const ControllerLayout& layout, const ControllerConfig& config, int g);

/// Starts or stops the probe inhibition on r_plus, r_minus and ms. A
/// command held from the last goal would otherwise keep driving mr (and the
/// transform rows through the efferent copy) during the probe.
void set_probe_inhibition(Network& network, const ControllerLayout& layout, const ControllerConfig& config,
                          bool on);

/// Moves the feedback drive onto feedback[bin] (bin 1..5, 0 = no drive).
void drive_feedback(Network& network, const ControllerLayout& layout, const ControllerConfig& config, int bin);

/// Gate rule: d_plus[0] gates, every other readout vetoes.
plasticity::GateRule learning_gate_rule(const ControllerLayout& layout, const ControllerConfig& config);

}  // namespace spikectl::controller

#endif  // SPIKECTL_CONTROLLER_HPP
