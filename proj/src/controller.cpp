#include "spikectl/controller.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace spikectl::controller {

namespace {

int clamp_level(int k) { return std::clamp(k, 1, kLevels); }

template <std::size_t N>
void append(std::vector<NeuronId>& out, const std::array<NeuronId, N>& a) {
    out.insert(out.end(), a.begin(), a.end());
}

template <std::size_t N>
std::vector<NeuronId> to_vector(const std::array<NeuronId, N>& a) {
    return {a.begin(), a.end()};
}

struct GroupInfo {
    const char* name;
    bool excitatory;
    std::size_t expected;
};

// Connectivity rules and their synapse counts. The counts are written out
// by hand from the rules, independently of the wiring code below.
const std::vector<GroupInfo>& group_table() {
    static const std::vector<GroupInfo> table = {
        // delta operator
        {"goal_to_delta", false, 25},      // goal g -> all 5 cells of column g
        {"feedback_to_delta", true, 25},   // feedback f -> all 5 cells of row f
        {"delta_to_readout", true, 25},    // one readout per cell
        {"readout_mutual", false, 40},     // 5 d_plus x 4 d_minus, both directions
        // transform operator
        {"efferent_copy", true, 20},       // ms m -> 4 cells of row m
        {"column_veto", false, 140},       // d_plus[0] -> 20 cells, 8 other readouts -> 15 cells each
        {"transform_to_result", true, 36}, // 20 cells -> r_minus, the 16 cells of rows 1..4 -> r_plus
        {"hold_relay", true, 5},           // ms k -> r_plus k
        {"relay_veto", false, 16},         // cells of rows 1..4 -> r_plus of their own row
        {"sign_gate", false, 45},          // 5 d_plus -> 5 r_minus, 4 d_minus -> 5 r_plus
        {"bootstrap", true, 9},            // every readout -> ms 1
        // motor populations
        {"result_to_motor", true, 10},     // r_plus k, r_minus k -> ms k
        {"motor_to_wta", true, 5},
        {"wta_to_motor", false, 5},
        {"motor_self", true, 5},
        {"motor_lateral", false, 20},      // every ms -> every other ms
        {"space_to_rate", true, 15},       // ms k -> mr[0..k-1], 1+2+3+4+5
        // learning path
        {"learn_inhibition", false, 40},   // 8 nonzero readouts -> 5 learn_cmd
    };
    return table;
}

const GroupInfo& group_info(const std::string& name) {
    for (const auto& g : group_table()) {
        if (name == g.name) {
            return g;
        }
    }
    throw ArgumentError("unknown connection group '" + name + "'");
}

ConnectionGroup make_group(const ControllerConfig& config, const char* name) {
    ConnectionGroup g;
    g.name = name;
    g.weight_class = config.group_classes.at(name);
    return g;
}

void install(Network& network, const std::vector<ConnectionGroup>& groups) {
    for (const auto& g : groups) {
        for (const auto& [pre, post] : g.synapses) {
            network.connect(pre, post, g.weight_class);
        }
    }
}

}  // namespace

std::vector<NeuronId> ControllerLayout::all() const {
    std::vector<NeuronId> out;
    out.reserve(kSize);
    for (const auto& [name, members] : populations()) {
        out.insert(out.end(), members.begin(), members.end());
    }
    return out;
}

std::vector<std::pair<std::string, std::vector<NeuronId>>> ControllerLayout::populations() const {
    std::vector<NeuronId> delta_cells;
    for (const auto& row : delta) {
        append(delta_cells, row);
    }
    std::vector<NeuronId> transform_cells;
    for (const auto& row : transform) {
        append(transform_cells, row);
    }
    return {
        {"goal", to_vector(goal)},
        {"feedback", to_vector(feedback)},
        {"delta", delta_cells},
        {"d_plus", to_vector(d_plus)},
        {"d_minus", to_vector(d_minus)},
        {"transform", transform_cells},
        {"r_plus", to_vector(r_plus)},
        {"r_minus", to_vector(r_minus)},
        {"ms", to_vector(ms)},
        {"mr", to_vector(mr)},
        {"wta_aux", {wta_aux}},
        {"learn_cmd", to_vector(learn_cmd)},
    };
}

NeuronId ControllerLayout::readout(int difference) const {
    if (difference < -kMaxMagnitude || difference > kMaxMagnitude) {
        throw ArgumentError("difference out of range");
    }
    return difference >= 0 ? d_plus[static_cast<std::size_t>(difference)]
                           : d_minus[static_cast<std::size_t>(-difference - 1)];
}

std::vector<NeuronId> ControllerLayout::readouts() const {
    std::vector<NeuronId> out = to_vector(d_plus);
    append(out, d_minus);
    return out;
}

void ControllerLayout::validate(std::size_t n_neurons) const {
    const auto ids = all();
    std::set<NeuronId> seen;
    for (const NeuronId id : ids) {
        if (id >= n_neurons) {
            throw ArgumentError("layout neuron " + std::to_string(id) + " outside the network");
        }
        if (!seen.insert(id).second) {
            throw ArgumentError("layout neuron " + std::to_string(id) + " assigned twice");
        }
    }
}

ControllerLayout make_layout(std::span<const NeuronId> selected) {
    if (selected.size() < ControllerLayout::kSize) {
        throw ArgumentError("controller needs " + std::to_string(ControllerLayout::kSize) +
                            " neurons, got " + std::to_string(selected.size()));
    }
    std::size_t next = 0;
    const auto take = [&] { return selected[next++]; };
    ControllerLayout l;
    for (auto& n : l.goal) n = take();
    for (auto& n : l.feedback) n = take();
    for (auto& row : l.delta)
        for (auto& n : row) n = take();
    for (auto& n : l.d_plus) n = take();
    for (auto& n : l.d_minus) n = take();
    for (auto& row : l.transform)
        for (auto& n : row) n = take();
    for (auto& n : l.r_plus) n = take();
    for (auto& n : l.r_minus) n = take();
    for (auto& n : l.ms) n = take();
    for (auto& n : l.mr) n = take();
    l.wta_aux = take();
    for (auto& n : l.learn_cmd) n = take();
    return l;
}

const std::vector<std::string>& connection_group_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& g : group_table()) {
            out.emplace_back(g.name);
        }
        return out;
    }();
    return names;
}

bool group_is_excitatory(const std::string& group) { return group_info(group).excitatory; }

std::map<std::string, std::size_t> expected_group_sizes() {
    std::map<std::string, std::size_t> out;
    for (const auto& g : group_table()) {
        out[g.name] = g.expected;
    }
    return out;
}

void ControllerConfig::validate() const {
    for (const auto& [name, cls] : group_classes) {
        if (group_is_excitatory(name) != is_excitatory(cls)) {
            throw ArgumentError("group '" + name + "' cannot use class " + std::string(to_string(cls)));
        }
    }
    for (const auto& name : connection_group_names()) {
        if (!group_classes.contains(name)) {
            throw ArgumentError("no weight class for group '" + name + "'");
        }
    }
    const auto check_drive = [](const DriveSetting& d, bool excitatory, const char* what) {
        if (!(d.rate_hz >= 0.0)) {
            throw ArgumentError(std::string(what) + " rate must be >= 0");
        }
        if (is_excitatory(d.weight_class) != excitatory) {
            throw ArgumentError(std::string(what) + " drive has the wrong polarity");
        }
    };
    if (gate_hold_windows == 0) {
        throw ArgumentError("gate_hold_windows must be >= 1");
    }
    check_drive(goal_background, true, "goal_background");
    check_drive(goal_command, false, "goal_command");
    check_drive(delta_background, true, "delta_background");
    check_drive(feedback, true, "feedback");
    check_drive(learn_command, true, "learn_command");
    check_drive(probe_inhibition, false, "probe_inhibition");
}

ControllerConfig default_controller_config() {
    using enum WeightClass;
    ControllerConfig c;
    c.group_classes = {
        {"goal_to_delta", I4},
        {"feedback_to_delta", E1},
        {"delta_to_readout", E3},
        {"readout_mutual", I3},
        {"efferent_copy", E3},
        {"column_veto", I4},
        {"transform_to_result", E3},
        {"hold_relay", E3},
        {"relay_veto", I4},
        {"sign_gate", I4},
        {"bootstrap", E1},
        {"result_to_motor", E2},
        {"motor_to_wta", E1},
        {"wta_to_motor", I3},
        {"motor_self", E1},
        {"motor_lateral", I4},
        {"space_to_rate", E3},
        {"learn_inhibition", I4},
    };
    c.goal_background = {200.0, E1};
    c.goal_command = {800.0, I4};
    c.delta_background = {0.0, E1};
    c.feedback = {800.0, E1};
    c.learn_command = {800.0, E1};
    c.probe_inhibition = {800.0, I4};
    return c;
}

const ConnectionGroup& Wiring::group(const std::string& name) const {
    for (const auto& g : groups) {
        if (g.name == name) {
            return g;
        }
    }
    throw ArgumentError("no connection group '" + name + "'");
}

std::size_t Wiring::connection_count() const {
    std::size_t n = 0;
    for (const auto& g : groups) {
        n += g.synapses.size();
    }
    return n;
}

std::vector<ConnectionGroup> wire_delta_operator(Network& network, const ControllerLayout& layout,
                                                 const ControllerConfig& config) {
    auto goal_to_delta = make_group(config, "goal_to_delta");
    auto feedback_to_delta = make_group(config, "feedback_to_delta");
    auto delta_to_readout = make_group(config, "delta_to_readout");
    for (int f = 1; f <= kLevels; ++f) {
        for (int g = 1; g <= kLevels; ++g) {
            const NeuronId cell = layout.delta[f - 1][g - 1];
            goal_to_delta.synapses.emplace_back(layout.goal[g - 1], cell);
            feedback_to_delta.synapses.emplace_back(layout.feedback[f - 1], cell);
            delta_to_readout.synapses.emplace_back(cell, layout.readout(g - f));
        }
    }
    auto mutual = make_group(config, "readout_mutual");
    for (const NeuronId p : layout.d_plus) {
        for (const NeuronId m : layout.d_minus) {
            mutual.synapses.emplace_back(p, m);
            mutual.synapses.emplace_back(m, p);
        }
    }
    std::vector<ConnectionGroup> out{goal_to_delta, feedback_to_delta, delta_to_readout, mutual};
    install(network, out);
    return out;
}

std::vector<ConnectionGroup> wire_transform_operator(Network& network, const ControllerLayout& layout,
                                                     const ControllerConfig& config) {
    auto efferent = make_group(config, "efferent_copy");
    auto veto = make_group(config, "column_veto");
    auto result = make_group(config, "transform_to_result");
    auto relay = make_group(config, "hold_relay");
    auto relay_veto = make_group(config, "relay_veto");
    auto sign_gate = make_group(config, "sign_gate");
    auto bootstrap = make_group(config, "bootstrap");

    for (int m = 1; m <= kLevels; ++m) {
        for (int d = 1; d <= kMaxMagnitude; ++d) {
            const NeuronId cell = layout.transform[m - 1][d - 1];
            efferent.synapses.emplace_back(layout.ms[m - 1], cell);
            result.synapses.emplace_back(cell, layout.r_minus[clamp_level(m - d) - 1]);
            // Command 5 plus anything stays 5, which the hold relay already
            // covers; row 5 would otherwise add a second input to r_plus[5]
            // that the sign gate cannot cancel.
            if (m < kLevels) {
                result.synapses.emplace_back(cell, layout.r_plus[clamp_level(m + d) - 1]);
                relay_veto.synapses.emplace_back(cell, layout.r_plus[m - 1]);
            }
        }
    }
    // A readout of magnitude k silences every transform column except k, so
    // only the row of the active command and the column of the current
    // difference survive. The zero readout silences all columns.
    for (int diff = -kMaxMagnitude; diff <= kMaxMagnitude; ++diff) {
        const int k = diff < 0 ? -diff : diff;
        for (int m = 1; m <= kLevels; ++m) {
            for (int d = 1; d <= kMaxMagnitude; ++d) {
                if (d != k) {
                    veto.synapses.emplace_back(layout.readout(diff), layout.transform[m - 1][d - 1]);
                }
            }
        }
    }
    for (int k = 1; k <= kLevels; ++k) {
        relay.synapses.emplace_back(layout.ms[k - 1], layout.r_plus[k - 1]);
    }
    for (const NeuronId p : layout.d_plus) {
        for (const NeuronId r : layout.r_minus) {
            sign_gate.synapses.emplace_back(p, r);
        }
    }
    for (const NeuronId m : layout.d_minus) {
        for (const NeuronId r : layout.r_plus) {
            sign_gate.synapses.emplace_back(m, r);
        }
    }
    // Cold start: any readout weakly primes command 1, so with no command
    // active the transform works from row 1. An active command outweighs
    // the priming through the winner-take-all inhibition.
    for (const NeuronId r : layout.readouts()) {
        bootstrap.synapses.emplace_back(r, layout.ms[0]);
    }
    std::vector<ConnectionGroup> out{efferent, veto, result, relay, relay_veto, sign_gate, bootstrap};
    install(network, out);
    return out;
}

std::vector<ConnectionGroup> wire_motor_populations(Network& network, const ControllerLayout& layout,
                                                    const ControllerConfig& config) {
    auto to_motor = make_group(config, "result_to_motor");
    auto to_wta = make_group(config, "motor_to_wta");
    auto from_wta = make_group(config, "wta_to_motor");
    auto self = make_group(config, "motor_self");
    auto lateral = make_group(config, "motor_lateral");
    auto fan_out = make_group(config, "space_to_rate");
    for (int k = 1; k <= kLevels; ++k) {
        const NeuronId ms = layout.ms[k - 1];
        to_motor.synapses.emplace_back(layout.r_plus[k - 1], ms);
        to_motor.synapses.emplace_back(layout.r_minus[k - 1], ms);
        to_wta.synapses.emplace_back(ms, layout.wta_aux);
        from_wta.synapses.emplace_back(layout.wta_aux, ms);
        self.synapses.emplace_back(ms, ms);
        for (int j = 1; j <= kLevels; ++j) {
            if (j != k) {
                lateral.synapses.emplace_back(ms, layout.ms[j - 1]);
            }
        }
        for (int j = 0; j < k; ++j) {
            fan_out.synapses.emplace_back(ms, layout.mr[j]);
        }
    }
    std::vector<ConnectionGroup> out{to_motor, to_wta, from_wta, self, lateral, fan_out};
    install(network, out);
    return out;
}

std::vector<ConnectionGroup> wire_learning_path(Network& network, const ControllerLayout& layout,
                                                const ControllerConfig& config) {
    auto inhibition = make_group(config, "learn_inhibition");
    for (int diff = -kMaxMagnitude; diff <= kMaxMagnitude; ++diff) {
        if (diff == 0) {
            continue;
        }
        for (const NeuronId l : layout.learn_cmd) {
            inhibition.synapses.emplace_back(layout.readout(diff), l);
        }
    }
    std::vector<ConnectionGroup> out{inhibition};
    install(network, out);
    plasticity::enable_plastic(network, layout.learn_cmd, layout.mr, network.plastic().rule().w_min);
    return out;
}

void install_tonic_drives(Network& network, const ControllerLayout& layout, const ControllerConfig& config) {
    for (const NeuronId g : layout.goal) {
        network.set_drive(g, config.goal_background.rate_hz, Polarity::Excitatory, DrivePattern::Regular, 0,
                          config.goal_background.weight_class);
    }
    for (const auto& row : layout.delta) {
        for (const NeuronId cell : row) {
            network.set_drive(cell, config.delta_background.rate_hz, Polarity::Excitatory, DrivePattern::Regular,
                              0, config.delta_background.weight_class);
        }
    }
}

Wiring build_controller(Network& network, std::span<const NeuronId> selected, const ControllerConfig& config) {
    config.validate();
    Wiring w;
    w.layout = make_layout(selected);
    w.layout.validate(network.size());

    // Start from a clean slate on the layout neurons so rebuilding is idempotent.
    const auto ids = w.layout.all();
    const std::set<NeuronId> members(ids.begin(), ids.end());
    std::vector<std::pair<NeuronId, NeuronId>> stale;
    for (const auto& [pair, cls] : network.connections()) {
        if (members.contains(pair.first) || members.contains(pair.second)) {
            stale.push_back(pair);
        }
    }
    for (const auto& [pre, post] : stale) {
        network.disconnect(pre, post);
    }
    for (const NeuronId id : ids) {
        network.clear_drive(id, Polarity::Excitatory);
        network.clear_drive(id, Polarity::Inhibitory);
    }

    for (auto* stage : {&wire_delta_operator, &wire_transform_operator, &wire_motor_populations,
                        &wire_learning_path}) {
        auto groups = stage(network, w.layout, config);
        w.groups.insert(w.groups.end(), groups.begin(), groups.end());
    }
    std::set<std::pair<NeuronId, NeuronId>> seen;
    for (const auto& g : w.groups) {
        for (const auto& pair : g.synapses) {
            if (!seen.insert(pair).second) {
                throw std::logic_error("connection groups overlap at " + std::to_string(pair.first) + " -> " +
                                       std::to_string(pair.second));
            }
        }
    }
    w.plastic_synapses = w.layout.learn_cmd.size() * w.layout.mr.size();
    install_tonic_drives(network, w.layout, config);
    return w;
}

AuditReport audit(const Network& network, const Wiring& wiring) {
    AuditReport report;
    report.neurons = wiring.layout.all().size();
    const auto expected = expected_group_sizes();
    report.ok = report.neurons == ControllerLayout::kSize;
    for (const auto& [name, count] : expected) {
        AuditEntry e;
        e.group = name;
        e.expected = count;
        for (const auto& g : wiring.groups) {
            if (g.name != name) {
                continue;
            }
            for (const auto& [pre, post] : g.synapses) {
                if (network.connection(pre, post) == g.weight_class) {
                    ++e.installed;
                }
            }
            e.ok = e.installed == e.expected && g.synapses.size() == e.expected;
        }
        report.ok = report.ok && e.ok;
        report.entries.push_back(e);
    }
    return report;
}

std::string wiring_to_json(const Wiring& wiring, const ControllerConfig& config, const AuditReport& report) {
    using nlohmann::json;
    json doc;
    json pops = json::object();
    for (const auto& [name, members] : wiring.layout.populations()) {
        pops[name] = members;
    }
    doc["populations"] = pops;
    json groups = json::array();
    for (const auto& g : wiring.groups) {
        json pairs = json::array();
        for (const auto& [pre, post] : g.synapses) {
            pairs.push_back({pre, post});
        }
        groups.push_back({{"name", g.name},
                          {"weight_class", std::string(to_string(g.weight_class))},
                          {"count", g.synapses.size()},
                          {"synapses", pairs}});
    }
    doc["groups"] = groups;
    doc["plastic"] = {{"pre", "learn_cmd"}, {"post", "mr"}, {"count", wiring.plastic_synapses}};
    const auto drive = [](const DriveSetting& d) {
        return json{{"rate_hz", d.rate_hz}, {"weight_class", std::string(to_string(d.weight_class))}};
    };
    doc["drives"] = {{"goal_background", drive(config.goal_background)},
                     {"goal_command", drive(config.goal_command)},
                     {"delta_background", drive(config.delta_background)},
                     {"feedback", drive(config.feedback)},
                     {"learn_command", drive(config.learn_command)},
                     {"probe_inhibition", drive(config.probe_inhibition)}};
    json entries = json::array();
    for (const auto& e : report.entries) {
        entries.push_back({{"group", e.group}, {"expected", e.expected}, {"installed", e.installed}, {"ok", e.ok}});
    }
    doc["audit"] = {{"neurons", report.neurons},
                    {"connections", wiring.connection_count()},
                    {"groups", entries},
                    {"ok", report.ok}};
    return doc.dump(2);
}

void set_goal(Network& network, const ControllerLayout& layout, const ControllerConfig& config, int g,
              bool learning) {
    if (g < 0 || g > kLevels) {
        throw ArgumentError("goal must be in 1..5 (0 clears it)");
    }
    for (int k = 1; k <= kLevels; ++k) {
        const bool commanded = k == g;
        const NeuronId goal = layout.goal[k - 1];
        if (commanded) {
            network.set_drive(goal, config.goal_command.rate_hz, Polarity::Inhibitory, DrivePattern::Regular, 0,
                              config.goal_command.weight_class);
        } else {
            network.clear_drive(goal, Polarity::Inhibitory);
        }
    }
    drive_learn_command(network, layout, config, learning ? g : 0);
}

void drive_learn_command(Network& network, const ControllerLayout& layout, const ControllerConfig& config, int g) {
    if (g < 0 || g > kLevels) {
        throw ArgumentError("learn command must be in 1..5 (0 = none)");
    }
    for (int k = 1; k <= kLevels; ++k) {
        const NeuronId learn = layout.learn_cmd[k - 1];
        if (k == g) {
            if (network.drive(learn, Polarity::Excitatory) == nullptr) {
                network.set_drive(learn, config.learn_command.rate_hz, Polarity::Excitatory, DrivePattern::Regular,
                                  0, config.learn_command.weight_class);
            }
        } else {
            network.clear_drive(learn, Polarity::Excitatory);
        }
    }
}

void set_probe_inhibition(Network& network, const ControllerLayout& layout, const ControllerConfig& config,
                          bool on) {
    for (const auto* pop : {&layout.r_plus, &layout.r_minus, &layout.ms}) {
        for (const NeuronId r : *pop) {
            if (on) {
                network.set_drive(r, config.probe_inhibition.rate_hz, Polarity::Inhibitory, DrivePattern::Regular, 0,
                                  config.probe_inhibition.weight_class);
            } else {
                network.clear_drive(r, Polarity::Inhibitory);
            }
        }
    }
}

void drive_feedback(Network& network, const ControllerLayout& layout, const ControllerConfig& config, int bin) {
    if (bin < 0 || bin > kLevels) {
        throw ArgumentError("feedback bin must be in 1..5 (0 = none)");
    }
    for (int k = 1; k <= kLevels; ++k) {
        const NeuronId f = layout.feedback[k - 1];
        if (k == bin) {
            const Drive* current = network.drive(f, Polarity::Excitatory);
            if (current == nullptr) {
                network.set_drive(f, config.feedback.rate_hz, Polarity::Excitatory, DrivePattern::Regular, 0,
                                  config.feedback.weight_class);
            }
        } else {
            network.clear_drive(f, Polarity::Excitatory);
        }
    }
}

plasticity::GateRule learning_gate_rule(const ControllerLayout& layout, const ControllerConfig& config) {
    plasticity::GateRule rule;
    rule.gating = {layout.d_plus[0]};
    for (const NeuronId r : layout.readouts()) {
        if (r != layout.d_plus[0]) {
            rule.veto.push_back(r);
        }
    }
    rule.min_gating_spikes = config.gate_min_spikes;
    rule.max_veto_spikes = config.gate_max_veto_spikes;
    return rule;
}

}  // namespace spikectl::controller
