#include "spikectl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace spikectl::harness {

using nlohmann::json;

// ---------------------------------------------------------------- bins

void BinMap::validate() const {
    for (std::size_t i = 1; i < thresholds.size(); ++i) {
        if (!(thresholds[i] > thresholds[i - 1])) {
            throw ArgumentError("bin thresholds must be strictly increasing");
        }
    }
}

BinMap BinMap::centered(const std::array<double, 5>& steady_states) {
    BinMap m;
    for (std::size_t k = 0; k < 4; ++k) {
        m.thresholds[k] = 0.5 * (steady_states[k] + steady_states[k + 1]);
    }
    m.validate();
    return m;
}

int bin_imu(double measurement, const BinMap& map) {
    int bin = 1;
    for (const double t : map.thresholds) {
        if (measurement >= t) {
            ++bin;
        }
    }
    return bin;
}

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
    static const std::vector<std::string> kinds = {"staircase", "stop_and_go", "learn_all", "characterize"};
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
        throw ArgumentError("unknown experiment '" + kind + "'");
    }
    for (const int g : goal_schedule) {
        if (g < 1 || g > controller::kLevels) {
            throw ArgumentError("goal values must be in 1..5");
        }
    }
    if (hold_goal < 1 || hold_goal > controller::kLevels) {
        throw ArgumentError("hold_goal must be in 1..5");
    }
    for (const double d : {step_ms, settle_hold_ms, settle_limit_ms, converge_ms, hold_ms, release_ms,
                           learn_converge_ms, probe_ms, probe_limit_ms, rest_ms}) {
        if (!(d > 0.0)) {
            throw ArgumentError("phase durations must be > 0");
        }
    }
}

void HarnessConfig::validate() const {
    device.neuron.validate();
    validate_weight_classes(device.weight_classes);
    if (device.n_neurons < controller::ControllerLayout::kSize) {
        throw ArgumentError("device too small for the controller");
    }
    controller.validate();
    learning.validate();
    plant.validate();
    bins.validate();
    if (!(u_per_hz > 0.0)) {
        throw ArgumentError("u_per_hz must be > 0");
    }
    experiment.validate();
}

namespace {

json neuron_to_json(const NeuronParams& p) {
    return {{"membrane_tau_ms", p.membrane_tau},
            {"threshold", p.threshold},
            {"reset_potential", p.reset_potential},
            {"resting_potential", p.resting_potential},
            {"refractory_period_ms", p.refractory_period},
            {"adaptation_increment", p.adaptation_increment},
            {"adaptation_tau_ms", p.adaptation_tau}};
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
    if (j.contains(key)) {
        out = j.at(key).get<T>();
    }
}

void neuron_from_json(const json& j, NeuronParams& p) {
    read_opt(j, "membrane_tau_ms", p.membrane_tau);
    read_opt(j, "threshold", p.threshold);
    read_opt(j, "reset_potential", p.reset_potential);
    read_opt(j, "resting_potential", p.resting_potential);
    read_opt(j, "refractory_period_ms", p.refractory_period);
    read_opt(j, "adaptation_increment", p.adaptation_increment);
    read_opt(j, "adaptation_tau_ms", p.adaptation_tau);
}

json drive_to_json(const controller::DriveSetting& d) {
    return {{"rate_hz", d.rate_hz}, {"class", std::string(to_string(d.weight_class))}};
}

void drive_from_json(const json& j, controller::DriveSetting& d) {
    read_opt(j, "rate_hz", d.rate_hz);
    if (j.contains("class")) {
        d.weight_class = parse_weight_class(j.at("class").get<std::string>());
    }
}

}  // namespace

std::string config_to_json(const HarnessConfig& c) {
    json classes = json::array();
    for (const auto& s : c.device.weight_classes) {
        classes.push_back({{"class", std::string(to_string(s.weight_class))},
                           {"efficacy", s.efficacy},
                           {"tau_ms", s.synaptic_tau}});
    }
    json groups = json::object();
    for (const auto& [name, cls] : c.controller.group_classes) {
        groups[name] = std::string(to_string(cls));
    }
    const auto& cc = c.controller;
    const auto& ex = c.experiment;
    json doc = {
        {"seed", c.seed},
        {"device",
         {{"n_neurons", c.device.n_neurons},
          {"neuron", neuron_to_json(c.device.neuron)},
          {"weight_classes", classes},
          {"mismatch", {{"cv", c.device.mismatch_cv}, {"seed", c.device.mismatch_seed}}},
          {"characterization",
           {{"rate_hz", c.device.characterization_rate_hz},
            {"duration_ms", c.device.characterization_ms},
            {"class", std::string(to_string(c.device.characterization_class))}}},
          {"selection_tolerance_hz", c.device.selection_tolerance_hz}}},
        {"controller",
         {{"groups", groups},
          {"drives",
           {{"goal_background", drive_to_json(cc.goal_background)},
            {"goal_command", drive_to_json(cc.goal_command)},
            {"delta_background", drive_to_json(cc.delta_background)},
            {"feedback", drive_to_json(cc.feedback)},
            {"learn_command", drive_to_json(cc.learn_command)},
            {"probe_inhibition", drive_to_json(cc.probe_inhibition)}}},
          {"gate", {{"min_spikes", cc.gate_min_spikes}, {"max_veto_spikes", cc.gate_max_veto_spikes},
                    {"hold_windows", cc.gate_hold_windows}}}}},
        {"learning",
         {{"theta_pre", c.learning.theta_pre},
          {"theta_post", c.learning.theta_post},
          {"w_min", c.learning.w_min},
          {"w_max", c.learning.w_max},
          {"step_fraction", c.learning.step_fraction}}},
        {"plant",
         {{"gain", c.plant.gain},
          {"tau_s", c.plant.tau_plant_s},
          {"imu_noise_std", c.plant.imu_noise_std},
          {"imu_rate_hz", c.plant.imu_rate_hz}}},
        {"bins", c.bins.thresholds},
        {"u_per_hz", c.u_per_hz},
        {"experiment",
         {{"kind", ex.kind},
          {"goal_schedule", ex.goal_schedule},
          {"step_ms", ex.step_ms},
          {"settle_hold_ms", ex.settle_hold_ms},
          {"settle_limit_ms", ex.settle_limit_ms},
          {"hold_goal", ex.hold_goal},
          {"converge_ms", ex.converge_ms},
          {"hold_ms", ex.hold_ms},
          {"release_ms", ex.release_ms},
          {"learn_converge_ms", ex.learn_converge_ms},
          {"probe_ms", ex.probe_ms},
          {"probe_limit_ms", ex.probe_limit_ms},
          {"rest_ms", ex.rest_ms}}},
    };
    return doc.dump(2);
}

HarnessConfig config_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ArgumentError(std::string("config is not valid JSON: ") + e.what());
    }
    HarnessConfig c = default_config();
    try {
        read_opt(doc, "seed", c.seed);
        if (doc.contains("device")) {
            const auto& d = doc.at("device");
            read_opt(d, "n_neurons", c.device.n_neurons);
            if (d.contains("neuron")) {
                neuron_from_json(d.at("neuron"), c.device.neuron);
            }
            if (d.contains("weight_classes")) {
                const auto& arr = d.at("weight_classes");
                if (!arr.is_array() || arr.size() != kNumWeightClasses) {
                    throw ArgumentError("weight_classes must list all 8 classes");
                }
                for (const auto& e : arr) {
                    const WeightClass cls = parse_weight_class(e.at("class").get<std::string>());
                    auto& wc = c.device.weight_classes[class_index(cls)];
                    wc.weight_class = cls;
                    read_opt(e, "efficacy", wc.efficacy);
                    read_opt(e, "tau_ms", wc.synaptic_tau);
                }
            }
            if (d.contains("mismatch")) {
                read_opt(d.at("mismatch"), "cv", c.device.mismatch_cv);
                read_opt(d.at("mismatch"), "seed", c.device.mismatch_seed);
            }
            if (d.contains("characterization")) {
                const auto& ch = d.at("characterization");
                read_opt(ch, "rate_hz", c.device.characterization_rate_hz);
                read_opt(ch, "duration_ms", c.device.characterization_ms);
                if (ch.contains("class")) {
                    c.device.characterization_class = parse_weight_class(ch.at("class").get<std::string>());
                }
            }
            read_opt(d, "selection_tolerance_hz", c.device.selection_tolerance_hz);
        }
        if (doc.contains("controller")) {
            const auto& cc = doc.at("controller");
            if (cc.contains("groups")) {
                for (const auto& [name, label] : cc.at("groups").items()) {
                    controller::group_is_excitatory(name);  // rejects unknown names
                    c.controller.group_classes[name] = parse_weight_class(label.get<std::string>());
                }
            }
            if (cc.contains("drives")) {
                const auto& dr = cc.at("drives");
                const std::vector<std::pair<const char*, controller::DriveSetting*>> slots = {
                    {"goal_background", &c.controller.goal_background},
                    {"goal_command", &c.controller.goal_command},
                    {"delta_background", &c.controller.delta_background},
                    {"feedback", &c.controller.feedback},
                    {"learn_command", &c.controller.learn_command},
                    {"probe_inhibition", &c.controller.probe_inhibition}};
                for (const auto& [key, slot] : slots) {
                    if (dr.contains(key)) {
                        drive_from_json(dr.at(key), *slot);
                    }
                }
            }
            if (cc.contains("gate")) {
                read_opt(cc.at("gate"), "min_spikes", c.controller.gate_min_spikes);
                read_opt(cc.at("gate"), "max_veto_spikes", c.controller.gate_max_veto_spikes);
                read_opt(cc.at("gate"), "hold_windows", c.controller.gate_hold_windows);
            }
        }
        if (doc.contains("learning")) {
            const auto& l = doc.at("learning");
            read_opt(l, "theta_pre", c.learning.theta_pre);
            read_opt(l, "theta_post", c.learning.theta_post);
            read_opt(l, "w_min", c.learning.w_min);
            read_opt(l, "w_max", c.learning.w_max);
            read_opt(l, "step_fraction", c.learning.step_fraction);
        }
        if (doc.contains("plant")) {
            const auto& p = doc.at("plant");
            read_opt(p, "gain", c.plant.gain);
            read_opt(p, "tau_s", c.plant.tau_plant_s);
            read_opt(p, "imu_noise_std", c.plant.imu_noise_std);
            read_opt(p, "imu_rate_hz", c.plant.imu_rate_hz);
        }
        read_opt(doc, "bins", c.bins.thresholds);
        read_opt(doc, "u_per_hz", c.u_per_hz);
        if (doc.contains("experiment")) {
            const auto& e = doc.at("experiment");
            auto& ex = c.experiment;
            read_opt(e, "kind", ex.kind);
            read_opt(e, "goal_schedule", ex.goal_schedule);
            read_opt(e, "step_ms", ex.step_ms);
            read_opt(e, "settle_hold_ms", ex.settle_hold_ms);
            read_opt(e, "settle_limit_ms", ex.settle_limit_ms);
            read_opt(e, "hold_goal", ex.hold_goal);
            read_opt(e, "converge_ms", ex.converge_ms);
            read_opt(e, "hold_ms", ex.hold_ms);
            read_opt(e, "release_ms", ex.release_ms);
            read_opt(e, "learn_converge_ms", ex.learn_converge_ms);
            read_opt(e, "probe_ms", ex.probe_ms);
            read_opt(e, "probe_limit_ms", ex.probe_limit_ms);
            read_opt(e, "rest_ms", ex.rest_ms);
        }
    } catch (const json::exception& e) {
        throw ArgumentError(std::string("malformed config: ") + e.what());
    }
    c.validate();
    return c;
}

HarnessConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ArgumentError("cannot read config '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

// ---------------------------------------------------------------- device

Device build_device(const DeviceConfig& device, const controller::ControllerConfig& controller,
                    const plasticity::HebbianRule& learning) {
    Device d{build_network(device.n_neurons, device.neuron, device.weight_classes), {}, {}, {}};
    d.network.plastic().set_rule(learning);
    mismatch::apply_mismatch(d.network, {device.mismatch_cv, device.mismatch_seed});
    d.profile = mismatch::characterize(d.network, device.characterization_rate_hz, device.characterization_ms,
                                       device.characterization_class);
    d.selection = mismatch::select_similar(d.profile, controller::ControllerLayout::kSize,
                                           device.selection_tolerance_hz);
    d.wiring = controller::build_controller(d.network, d.selection.neurons, controller);
    return d;
}

// ---------------------------------------------------------------- closed loop

ClosedLoop::ClosedLoop(const HarnessConfig& config, const Device& device)
    : config_(config),
      network_(device.network),
      layout_(device.wiring.layout),
      gate_rule_(controller::learning_gate_rule(device.wiring.layout, config.controller)),
      imu_rng_(derive_seed(config.seed, 1)),
      next_imu_(device.network.now()),
      next_window_(device.network.now() + ms_to_ticks(kWindowMs)) {
    config_.plant.validate();
    config_.bins.validate();
    network_.plastic().set_rule(config_.learning);
}

void ClosedLoop::set_goal(int g, bool learning) {
    controller::set_goal(network_, layout_, config_.controller, g, learning);
    goal_ = g;
}

void ClosedLoop::set_held(bool held) {
    plant_.held = held;
    if (held) {
        plant_.omega = 0.0;
    }
}

void ClosedLoop::set_probe(bool on) {
    controller::set_probe_inhibition(network_, layout_, config_.controller, on);
    probe_ = on;
}

void ClosedLoop::pin_feedback(int bin) {
    controller::drive_feedback(network_, layout_, config_.controller, bin);
    bin_ = bin;
    feedback_frozen_ = true;
}

void ClosedLoop::advance(double duration_ms) {
    const Tick end = network_.now() + ms_to_ticks(duration_ms);
    const Tick imu_period = ms_to_ticks(kImuPeriodMs);
    const Tick window = ms_to_ticks(kWindowMs);
    while (network_.now() < end) {
        if (network_.now() >= next_imu_) {
            on_imu_tick();
            next_imu_ += imu_period;
        }
        log_.append(network_.step());
        if (network_.now() >= next_window_) {
            on_window_end();
            next_window_ += window;
        }
    }
}

void ClosedLoop::on_imu_tick() {
    const double t = now_ms();
    if (!imu_.empty()) {
        plant_ = plant::plant_step(plant_, config_.plant, u_, kImuPeriodMs);
    }
    const double measured = plant::imu_sample(plant_, config_.plant, imu_rng_);
    const int bin = bin_imu(measured, config_.bins);
    if (!feedback_frozen_ && bin != bin_) {
        controller::drive_feedback(network_, layout_, config_.controller, bin);
        bin_ = bin;
    }
    imu_.push_back({t, plant_.omega, measured, bin, u_});
}

void ClosedLoop::on_window_end() {
    const Tick to = network_.now();
    const Tick from = to - ms_to_ticks(kWindowMs);
    const auto counts = log_.counts(network_.size(), from, to);
    std::uint64_t mr = 0;
    for (const NeuronId n : layout_.mr) {
        mr += counts[n];
    }
    const double rate = static_cast<double>(mr) / (kWindowMs / 1000.0);
    u_ = config_.u_per_hz * rate;
    auto gate = plasticity::evaluate_gate(gate_rule_, counts);
    gate_run_ = gate.open ? gate_run_ + 1 : 0;
    gate.open = gate_run_ >= config_.controller.gate_hold_windows;
    std::size_t changed = 0;
    if (learning_) {
        changed = plasticity::plasticity_update(network_.plastic(), counts, gate);
    }
    windows_.push_back({ticks_to_ms(to), rate, u_, gate.open, changed, goal_, plant_.held, probe_});
}

double ClosedLoop::mean_mr_rate(double from_ms, double to_ms) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& w : windows_) {
        if (w.t_end_ms > from_ms && w.t_end_ms <= to_ms) {
            sum += w.mr_rate_hz;
            ++n;
        }
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

// ---------------------------------------------------------------- analysis

std::vector<WindowBin> window_bins(const std::vector<ImuRecord>& imu, const BinMap& bins) {
    std::vector<WindowBin> out;
    double sum = 0.0;
    std::size_t n = 0;
    double window_end = kWindowMs;
    for (const auto& r : imu) {
        while (r.t_ms >= window_end) {
            if (n > 0) {
                out.push_back({window_end, bin_imu(sum / static_cast<double>(n), bins)});
            }
            sum = 0.0;
            n = 0;
            window_end += kWindowMs;
        }
        sum += r.omega_measured;
        ++n;
    }
    return out;
}

std::optional<double> settle_time(const std::vector<WindowBin>& bins, int goal, double from_ms, double until_ms,
                                  double hold_ms) {
    std::optional<double> run_start;
    for (const auto& b : bins) {
        if (b.t_end_ms <= from_ms) {
            continue;
        }
        if (b.t_end_ms > until_ms) {
            break;
        }
        if (b.bin != goal) {
            run_start.reset();
            continue;
        }
        if (!run_start) {
            // The window (t - 100, t] is the first one in the goal bin.
            run_start = b.t_end_ms - kWindowMs;
        }
        if (b.t_end_ms - *run_start >= hold_ms) {
            return std::max(0.0, *run_start - from_ms);
        }
    }
    return std::nullopt;
}

namespace {

std::pair<double, double> mean_std(const std::vector<ImuRecord>& imu, double from_ms, double to_ms) {
    double sum = 0.0;
    double sq = 0.0;
    std::size_t n = 0;
    for (const auto& r : imu) {
        if (r.t_ms >= from_ms && r.t_ms < to_ms) {
            sum += r.omega_measured;
            sq += r.omega_measured * r.omega_measured;
            ++n;
        }
    }
    if (n == 0) {
        return {0.0, 0.0};
    }
    const double mean = sum / static_cast<double>(n);
    return {mean, std::sqrt(std::max(0.0, sq / static_cast<double>(n) - mean * mean))};
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

// ---------------------------------------------------------------- experiments

StaircaseResult run_staircase(ClosedLoop& loop, const ExperimentConfig& ex) {
    StaircaseResult out;
    int previous = 0;
    for (const int g : ex.goal_schedule) {
        StepResult s;
        s.goal = g;
        s.start_ms = loop.now_ms();
        s.direction = previous == 0 ? "initial" : (g > previous ? "rising" : (g < previous ? "falling" : "same"));
        loop.set_goal(g);
        loop.advance(ex.step_ms);
        out.steps.push_back(s);
        previous = g;
    }
    const auto bins = window_bins(loop.imu(), loop.config().bins);
    std::vector<double> rising;
    std::vector<double> falling;
    out.all_settled = true;
    for (auto& s : out.steps) {
        const double end = s.start_ms + ex.step_ms;
        s.settle_ms = settle_time(bins, s.goal, s.start_ms, end, ex.settle_hold_ms);
        const bool ok = s.settle_ms && *s.settle_ms <= ex.settle_limit_ms;
        out.all_settled = out.all_settled && ok;
        // Steady-state statistics over the part of the step after settling.
        const double from = s.settle_ms ? s.start_ms + *s.settle_ms : end - ex.settle_hold_ms;
        std::tie(s.mean_omega, s.std_omega) = mean_std(loop.imu(), from, end);
        if (s.settle_ms) {
            if (s.direction == "rising") {
                rising.push_back(*s.settle_ms);
            } else if (s.direction == "falling") {
                falling.push_back(*s.settle_ms);
            }
        }
    }
    out.mean_rising_ms = mean_of(rising);
    out.mean_falling_ms = mean_of(falling);
    return out;
}

StopAndGoResult run_stop_and_go(ClosedLoop& loop, const ExperimentConfig& ex) {
    StopAndGoResult out;
    const double start = loop.now_ms();
    loop.set_goal(ex.hold_goal);
    loop.advance(ex.converge_ms);
    out.hold_start_ms = loop.now_ms();
    const auto before = window_bins(loop.imu(), loop.config().bins);
    if (const auto t = settle_time(before, ex.hold_goal, start, out.hold_start_ms, ex.settle_hold_ms)) {
        out.converged_at_ms = start + *t;
    }
    // Reference: the converged rate over the seconds just before the hold.
    const double ref_from = std::max(out.converged_at_ms >= 0.0 ? out.converged_at_ms : start,
                                     out.hold_start_ms - 4000.0);
    out.pre_hold_mr_hz = loop.mean_mr_rate(ref_from, out.hold_start_ms);

    loop.set_held(true);
    loop.advance(ex.hold_ms);
    out.hold_end_ms = loop.now_ms();
    out.hold_mr_hz = loop.mean_mr_rate(out.hold_start_ms, out.hold_end_ms);

    loop.set_held(false);
    loop.advance(ex.release_ms);
    const double end = loop.now_ms();
    const auto after = window_bins(loop.imu(), loop.config().bins);
    out.reconverge_ms = settle_time(after, ex.hold_goal, out.hold_end_ms, end, ex.settle_hold_ms);
    out.post_release_mr_hz = loop.mean_mr_rate(std::max(out.hold_end_ms, end - 4000.0), end);
    return out;
}

FluctuationResult run_fluctuation(const HarnessConfig& config, const Device& device, int goal, double settle_ms,
                                  double measure_ms) {
    FluctuationResult out;
    ClosedLoop loop(config, device);
    loop.set_goal(goal);
    loop.advance(settle_ms + measure_ms);
    std::tie(out.closed_mean, out.closed_std) = mean_std(loop.imu(), settle_ms, settle_ms + measure_ms);
    double u_sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : loop.imu()) {
        if (r.t_ms >= settle_ms) {
            u_sum += r.u;
            ++n;
        }
    }
    out.mean_u = n == 0 ? 0.0 : u_sum / static_cast<double>(n);

    plant::PlantState plant{config.plant.gain * out.mean_u, 0.0, false};
    Rng rng(derive_seed(config.seed, 2));
    std::vector<ImuRecord> open;
    for (double t = 0.0; t < measure_ms; t += kImuPeriodMs) {
        plant = plant::plant_step(plant, config.plant, out.mean_u, kImuPeriodMs);
        open.push_back({t, plant.omega, plant::imu_sample(plant, config.plant, rng), 0, out.mean_u});
    }
    std::tie(out.open_mean, out.open_std) = mean_std(open, 0.0, measure_ms);
    return out;
}

namespace {

// Neurons that must stay silent while the feedforward path is probed.
std::vector<NeuronId> processing_neurons(const controller::ControllerLayout& l) {
    std::vector<NeuronId> out;
    for (const auto& [name, members] : l.populations()) {
        if (name != "goal" && name != "feedback" && name != "mr" && name != "learn_cmd") {
            out.insert(out.end(), members.begin(), members.end());
        }
    }
    return out;
}

}  // namespace

LearnAllResult run_learn_all(ClosedLoop& loop, const ExperimentConfig& ex) {
    LearnAllResult out;
    const auto quiet = processing_neurons(loop.layout());
    loop.set_learning(true);
    for (int g = 1; g <= controller::kLevels; ++g) {
        ProbeResult p;
        p.goal = g;
        // Convergence episode with learning.
        const double learn_start = loop.now_ms();
        loop.set_goal(g, true);
        loop.advance(ex.learn_converge_ms);
        const double learn_end = loop.now_ms();
        p.converged_mr_hz = loop.mean_mr_rate(learn_end - 2000.0, learn_end);
        for (const auto& w : loop.windows()) {
            if (w.t_end_ms > learn_start && w.t_end_ms <= learn_end && w.gate_open) {
                ++p.gate_open_windows;
            }
        }
        // Rest: feedback path inhibited, no goal, wheel spins down.
        loop.set_goal(0);
        loop.set_probe(true);
        loop.advance(ex.rest_ms);
        // Probe: learn_cmd[g] alone.
        p.probe_start_ms = loop.now_ms();
        controller::drive_learn_command(loop.network(), loop.layout(), loop.config().controller, g);
        loop.advance(ex.probe_ms);
        const double probe_end = loop.now_ms();
        const auto bins = window_bins(loop.imu(), loop.config().bins);
        p.reach_ms = settle_time(bins, g, p.probe_start_ms, probe_end, probe_end - p.probe_start_ms >= 1000.0
                                                                             ? 1000.0
                                                                             : probe_end - p.probe_start_ms);
        for (auto it = bins.rbegin(); it != bins.rend(); ++it) {
            if (it->t_end_ms <= probe_end) {
                p.final_bin = it->bin;
                break;
            }
        }
        p.mr_rate_hz = loop.mean_mr_rate(probe_end - 2000.0, probe_end);
        const auto counts = loop.log().counts(loop.network().size(), ms_to_ticks(p.probe_start_ms),
                                              ms_to_ticks(probe_end));
        for (const NeuronId n : quiet) {
            p.stray_spikes += counts[n];
        }
        controller::drive_learn_command(loop.network(), loop.layout(), loop.config().controller, 0);
        loop.set_probe(false);
        out.probes.push_back(p);
    }
    loop.set_learning(false);
    return out;
}

// ---------------------------------------------------------------- summaries and files

namespace {

json optional_ms(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json gate_intervals(const ClosedLoop& loop) {
    json out = json::array();
    double open_from = -1.0;
    for (const auto& w : loop.windows()) {
        if (w.gate_open && open_from < 0.0) {
            open_from = w.t_end_ms - kWindowMs;
        } else if (!w.gate_open && open_from >= 0.0) {
            out.push_back({open_from, w.t_end_ms - kWindowMs});
            open_from = -1.0;
        }
    }
    if (open_from >= 0.0) {
        out.push_back({open_from, loop.windows().back().t_end_ms});
    }
    return out;
}

json common_summary(const ClosedLoop& loop, const char* kind) {
    return {{"experiment", kind},
            {"seed", loop.config().seed},
            {"duration_ms", loop.now_ms()},
            {"spikes", loop.log().size()},
            {"bins", loop.config().bins.thresholds},
            {"u_per_hz", loop.config().u_per_hz},
            {"gate_open_intervals_ms", gate_intervals(loop)}};
}

}  // namespace

std::string staircase_summary(const StaircaseResult& r, const ClosedLoop& loop) {
    json doc = common_summary(loop, "staircase");
    json steps = json::array();
    for (const auto& s : r.steps) {
        steps.push_back({{"goal", s.goal},
                         {"start_ms", s.start_ms},
                         {"direction", s.direction},
                         {"settle_ms", optional_ms(s.settle_ms)},
                         {"steady_mean", s.mean_omega},
                         {"steady_std", s.std_omega}});
    }
    doc["steps"] = steps;
    doc["all_settled"] = r.all_settled;
    doc["mean_rising_settle_ms"] = std::isnan(r.mean_rising_ms) ? json(nullptr) : json(r.mean_rising_ms);
    doc["mean_falling_settle_ms"] = std::isnan(r.mean_falling_ms) ? json(nullptr) : json(r.mean_falling_ms);
    return doc.dump(2);
}

std::string stop_and_go_summary(const StopAndGoResult& r, const ClosedLoop& loop) {
    json doc = common_summary(loop, "stop_and_go");
    doc["converged_at_ms"] = r.converged_at_ms >= 0.0 ? json(r.converged_at_ms) : json(nullptr);
    doc["hold_interval_ms"] = {r.hold_start_ms, r.hold_end_ms};
    doc["pre_hold_mr_hz"] = r.pre_hold_mr_hz;
    doc["hold_mr_hz"] = r.hold_mr_hz;
    doc["post_release_mr_hz"] = r.post_release_mr_hz;
    doc["reconverge_ms"] = optional_ms(r.reconverge_ms);
    return doc.dump(2);
}

std::string learn_all_summary(const LearnAllResult& r, const ClosedLoop& loop) {
    json doc = common_summary(loop, "learn_all");
    json probes = json::array();
    for (const auto& p : r.probes) {
        probes.push_back({{"goal", p.goal},
                          {"probe_start_ms", p.probe_start_ms},
                          {"reach_ms", optional_ms(p.reach_ms)},
                          {"final_bin", p.final_bin},
                          {"probe_mr_hz", p.mr_rate_hz},
                          {"converged_mr_hz", p.converged_mr_hz},
                          {"gate_open_windows", p.gate_open_windows},
                          {"stray_spikes", p.stray_spikes}});
    }
    doc["probes"] = probes;
    return doc.dump(2);
}

void write_imu_csv(const std::vector<ImuRecord>& imu, std::ostream& out) {
    out << "t_ms,omega_true,omega_measured,bin,u\n";
    char buf[160];
    for (const auto& r : imu) {
        std::snprintf(buf, sizeof buf, "%.1f,%.6f,%.6f,%d,%.9g\n", r.t_ms, r.omega_true, r.omega_measured, r.bin,
                      r.u);
        out << buf;
    }
}

namespace {

std::filesystem::path prepare_dir(const std::string& out_dir) {
    std::filesystem::path dir(out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw ArgumentError("cannot create output directory '" + out_dir + "'");
    }
    return dir;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw ArgumentError("cannot write '" + path.string() + "'");
    }
    return out;
}

}  // namespace

std::string run_experiment(const HarnessConfig& config, const std::string& out_dir) {
    config.validate();
    const auto& kind = config.experiment.kind;
    if (kind == "characterize") {
        const auto profile = run_characterize(config, out_dir);
        const auto summary = json{{"experiment", "characterize"},
                                  {"stimulus_rate_hz", profile.stimulus_rate_hz},
                                  {"duration_ms", profile.duration_ms},
                                  {"neurons", profile.rates_hz.size()},
                                  {"mean_rate_hz", profile.mean()},
                                  {"std_rate_hz", profile.stddev()}}
                                 .dump(2);
        const auto dir = prepare_dir(out_dir);
        open_out(dir / "summary.json") << summary << '\n';
        open_out(dir / "config.json") << config_to_json(config) << '\n';
        return summary;
    }
    const auto dir = prepare_dir(out_dir);
    open_out(dir / "config.json") << config_to_json(config) << '\n';
    const Device device = build_device(config.device, config.controller, config.learning);
    ClosedLoop loop(config, device);
    std::string summary;
    if (kind == "staircase") {
        summary = staircase_summary(run_staircase(loop, config.experiment), loop);
    } else if (kind == "stop_and_go") {
        summary = stop_and_go_summary(run_stop_and_go(loop, config.experiment), loop);
    } else {
        summary = learn_all_summary(run_learn_all(loop, config.experiment), loop);
        open_out(dir / "weights.json") << plasticity::weights_to_json(loop.network().plastic()) << '\n';
    }
    {
        auto out = open_out(dir / "raster.csv");
        loop.log().write_csv(out);
    }
    {
        auto out = open_out(dir / "imu.csv");
        write_imu_csv(loop.imu(), out);
    }
    open_out(dir / "summary.json") << summary << '\n';
    return summary;
}

mismatch::RateProfile run_characterize(const HarnessConfig& config, const std::string& out_dir) {
    const auto dir = prepare_dir(out_dir);
    Network net = build_network(config.device.n_neurons, config.device.neuron, config.device.weight_classes);
    mismatch::apply_mismatch(net, {config.device.mismatch_cv, config.device.mismatch_seed});
    auto profile = mismatch::characterize(net, config.device.characterization_rate_hz,
                                          std::max(config.device.characterization_ms, 10'000.0),
                                          config.device.characterization_class);
    {
        auto out = open_out(dir / "rate_profile.csv");
        profile.write_csv(out);
    }
    {
        auto out = open_out(dir / "rate_profile_sorted.csv");
        profile.write_sorted_csv(out);
    }
    return profile;
}

// ---------------------------------------------------------------- calibration

namespace {

double held_command_rate(const HarnessConfig& config, const Device& device, int k) {
    HarnessConfig quiet = config;
    quiet.plant.imu_noise_std = 0.0;
    if (!(quiet.u_per_hz > 0.0)) {
        quiet.u_per_hz = 1e-3;
    }
    ClosedLoop loop(quiet, device);
    loop.set_goal(k);
    loop.pin_feedback(k);
    // Kick command k on and the others off for 200 ms, then let it hold.
    const auto& motor = loop.layout().ms;
    for (int j = 1; j <= controller::kLevels; ++j) {
        const NeuronId n = motor[static_cast<std::size_t>(j - 1)];
        if (j == k) {
            loop.network().set_drive(n, 1000.0, Polarity::Excitatory, DrivePattern::Regular, 0, WeightClass::E3);
        } else {
            loop.network().set_drive(n, 1000.0, Polarity::Inhibitory, DrivePattern::Regular, 0, WeightClass::I4);
        }
    }
    loop.advance(200.0);
    for (const NeuronId n : motor) {
        loop.network().clear_drive(n, Polarity::Excitatory);
        loop.network().clear_drive(n, Polarity::Inhibitory);
    }
    loop.advance(1800.0);
    return loop.mean_mr_rate(1000.0, 2000.0);
}

double feedforward_rate(const HarnessConfig& config, const Device& device, int g, double w) {
    HarnessConfig quiet = config;
    quiet.plant.imu_noise_std = 0.0;
    quiet.learning.w_max = std::max(quiet.learning.w_max, w);
    if (!(quiet.u_per_hz > 0.0)) {
        quiet.u_per_hz = 1e-3;
    }
    ClosedLoop loop(quiet, device);
    const auto& l = loop.layout();
    for (int j = 0; j < g; ++j) {
        loop.network().plastic().set_weight(l.learn_cmd[static_cast<std::size_t>(g - 1)],
                                            l.mr[static_cast<std::size_t>(j)], w);
    }
    loop.set_probe(true);
    controller::drive_learn_command(loop.network(), l, quiet.controller, g);
    loop.advance(2000.0);
    return loop.mean_mr_rate(1000.0, 2000.0);
}

}  // namespace

MotorCalibration calibrate_motor(const HarnessConfig& config, const Device& device, double omega_at_command_2) {
    MotorCalibration m;
    for (int k = 1; k <= controller::kLevels; ++k) {
        m.mr_rate_hz[static_cast<std::size_t>(k - 1)] = held_command_rate(config, device, k);
    }
    if (!(m.mr_rate_hz[4] > 0.0) || !(m.mr_rate_hz[1] > 0.0)) {
        throw ArgumentError("held commands produce no mr activity; cannot calibrate");
    }
    m.u_per_hz = 1.0 / m.mr_rate_hz[4];
    m.plant_gain = omega_at_command_2 / (m.u_per_hz * m.mr_rate_hz[1]);
    std::array<double, 5> steady{};
    for (std::size_t k = 0; k < steady.size(); ++k) {
        steady[k] = m.plant_gain * m.u_per_hz * m.mr_rate_hz[k];
    }
    m.bins = BinMap::centered(steady);
    return m;
}

double calibrate_w_max(const HarnessConfig& config, const Device& device, double target_mr_hz) {
    double lo = 0.0;
    double hi = 1.0;
    while (feedforward_rate(config, device, controller::kLevels, hi) < target_mr_hz) {
        hi *= 2.0;
        if (hi > 1e3) {
            throw ArgumentError("feedforward rate target unreachable");
        }
    }
    for (int it = 0; it < 30; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (feedforward_rate(config, device, controller::kLevels, mid) < target_mr_hz) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

HarnessConfig default_config() {
    HarnessConfig c;
    c.device.weight_classes = default_weight_classes(5.952831135);
    // E2 is the slow class carrying command results onto the motor neurons.
    c.device.weight_classes[class_index(WeightClass::E2)] = {WeightClass::E2, 0.06, 500.0};
    c.device.mismatch_cv = 0.532176495;
    c.u_per_hz = 0.000419992;
    c.plant.gain = 2531.06;
    c.bins.thresholds = {759.0, 1264.5, 1770.5, 2277.5};
    c.learning.w_max = 1.8011;
    return c;
}

}  // namespace spikectl::harness
