#include "spikectl/mismatch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "spikectl/random.hpp"

namespace spikectl::mismatch {

std::vector<double> sample_gains(const MismatchModel& model, std::size_t n) {
    if (!(model.coefficient_of_variation >= 0.0) || !std::isfinite(model.coefficient_of_variation)) {
        throw ArgumentError("mismatch coefficient of variation must be >= 0");
    }
    // Lognormal with median 1: log-gain ~ N(0, sigma^2), cv^2 = exp(sigma^2) - 1.
    const double sigma = std::sqrt(std::log1p(model.coefficient_of_variation * model.coefficient_of_variation));
    Rng rng(model.seed);
    std::vector<double> gains(n);
    for (auto& g : gains) {
        g = std::exp(sigma * rng.normal());
    }
    return gains;
}

void apply_mismatch(Network& network, const MismatchModel& model) {
    const auto gains = sample_gains(model, network.size());
    for (std::size_t i = 0; i < gains.size(); ++i) {
        network.set_gain(static_cast<NeuronId>(i), gains[i]);
    }
}

double RateProfile::mean() const {
    if (rates_hz.empty()) {
        return 0.0;
    }
    return std::accumulate(rates_hz.begin(), rates_hz.end(), 0.0) / static_cast<double>(rates_hz.size());
}

double RateProfile::stddev() const {
    if (rates_hz.empty()) {
        return 0.0;
    }
    const double m = mean();
    double ss = 0.0;
    for (const double r : rates_hz) {
        ss += (r - m) * (r - m);
    }
    return std::sqrt(ss / static_cast<double>(rates_hz.size()));
}

void RateProfile::write_csv(std::ostream& out) const {
    out << "neuron_id,rate_hz\n";
    for (std::size_t i = 0; i < rates_hz.size(); ++i) {
        out << i << ',' << rates_hz[i] << '\n';
    }
}

void RateProfile::write_sorted_csv(std::ostream& out) const {
    std::vector<std::size_t> order(rates_hz.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rates_hz[a] < rates_hz[b]; });
    out << "rank,neuron_id,rate_hz\n";
    for (std::size_t r = 0; r < order.size(); ++r) {
        out << r << ',' << order[r] << ',' << rates_hz[order[r]] << '\n';
    }
}

RateProfile characterize(const Network& network, double stimulus_rate_hz, double duration_ms,
                         WeightClass stimulus_class) {
    if (duration_ms < 5000.0) {
        throw ArgumentError("characterization needs at least 5 s of stimulation");
    }
    if (!(stimulus_rate_hz >= 0.0)) {
        throw ArgumentError("stimulus rate must be >= 0");
    }
    Network probe = network;
    probe.clear_connections();
    probe.plastic().clear();
    probe.clear_drives();
    probe.reset_state();
    for (std::size_t i = 0; i < probe.size(); ++i) {
        probe.set_drive(static_cast<NeuronId>(i), stimulus_rate_hz, Polarity::Excitatory, DrivePattern::Regular, 0,
                        stimulus_class);
    }
    std::vector<std::uint64_t> counts(probe.size(), 0);
    const Tick end = ms_to_ticks(duration_ms);
    while (probe.now() < end) {
        for (const auto& e : probe.step()) {
            ++counts[e.neuron_id];
        }
    }
    RateProfile profile;
    profile.stimulus_rate_hz = stimulus_rate_hz;
    profile.duration_ms = duration_ms;
    profile.rates_hz.resize(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        profile.rates_hz[i] = static_cast<double>(counts[i]) / (duration_ms / 1000.0);
    }
    return profile;
}

namespace {

std::string infeasible_message(double band, double tolerance) {
    std::ostringstream os;
    os << "no subset fits within " << tolerance << " Hz; the tightest band is " << band << " Hz";
    return os.str();
}

}  // namespace

InfeasibleSelection::InfeasibleSelection(double min_band_hz, double tolerance_hz)
    : ArgumentError(infeasible_message(min_band_hz, tolerance_hz)), min_band_(min_band_hz) {}

Selection select_similar(const RateProfile& profile, std::size_t k, double tolerance_hz) {
    const auto& rates = profile.rates_hz;
    if (k == 0 || k > rates.size()) {
        throw ArgumentError("select_similar needs 1 <= k <= number of neurons");
    }
    std::vector<NeuronId> order(rates.size());
    std::iota(order.begin(), order.end(), NeuronId{0});
    std::stable_sort(order.begin(), order.end(), [&](NeuronId a, NeuronId b) { return rates[a] < rates[b]; });

    std::size_t best_start = 0;
    double best_band = rates[order[k - 1]] - rates[order[0]];
    for (std::size_t start = 1; start + k <= order.size(); ++start) {
        const double band = rates[order[start + k - 1]] - rates[order[start]];
        if (band < best_band) {
            best_band = band;
            best_start = start;
        }
    }
    if (best_band > tolerance_hz) {
        throw InfeasibleSelection(best_band, tolerance_hz);
    }
    Selection out;
    out.band_hz = best_band;
    out.neurons.assign(order.begin() + static_cast<std::ptrdiff_t>(best_start),
                       order.begin() + static_cast<std::ptrdiff_t>(best_start + k));
    return out;
}

namespace {

double single_neuron_rate(const NeuronParams& params, double scale, double synaptic_tau, double stimulus_rate_hz,
                          WeightClass stimulus_class, double duration_ms) {
    Network net(1, params, default_weight_classes(scale, synaptic_tau));
    net.set_drive(0, stimulus_rate_hz, Polarity::Excitatory, DrivePattern::Regular, 0, stimulus_class);
    const auto result = net.run(duration_ms);
    return static_cast<double>(result.log.size()) / (duration_ms / 1000.0);
}

}  // namespace

double calibrate_ladder_scale(const NeuronParams& params, double target_rate_hz, double stimulus_rate_hz,
                              double synaptic_tau, WeightClass stimulus_class, double duration_ms) {
    double lo = 1e-3;
    double hi = 1.0;
    while (single_neuron_rate(params, hi, synaptic_tau, stimulus_rate_hz, stimulus_class, duration_ms) <
           target_rate_hz) {
        hi *= 2.0;
        if (hi > 1e4) {
            throw ArgumentError("target rate unreachable by scaling the weight ladder");
        }
    }
    for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (single_neuron_rate(params, mid, synaptic_tau, stimulus_rate_hz, stimulus_class, duration_ms) <
            target_rate_hz) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double calibrate_cv(const Network& network, double target_ratio, std::uint64_t seed, double stimulus_rate_hz,
                    double duration_ms, WeightClass stimulus_class) {
    const auto ratio_at = [&](double cv) {
        Network copy = network;
        apply_mismatch(copy, {cv, seed});
        const auto p = characterize(copy, stimulus_rate_hz, duration_ms, stimulus_class);
        return p.stddev() / p.mean();
    };
    double lo = 0.0;
    double hi = 0.5;
    while (ratio_at(hi) < target_ratio) {
        hi *= 2.0;
        if (hi > 8.0) {
            throw ArgumentError("target rate spread unreachable");
        }
    }
    for (int it = 0; it < 20; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (ratio_at(mid) < target_ratio) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace spikectl::mismatch
