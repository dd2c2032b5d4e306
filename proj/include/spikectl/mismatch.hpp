#ifndef SPIKECTL_MISMATCH_HPP
#define SPIKECTL_MISMATCH_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "spikectl/snn.hpp"

namespace spikectl::mismatch {

/// Published characterization of the device: firing rate statistics of all
/// neurons under a 200 Hz regular stimulus.
constexpr double kReferenceStimulusHz = 200.0;
constexpr double kReferenceMeanRateHz = 94.7;
constexpr double kReferenceStdRateHz = 11.9;

/// Per-neuron multiplicative gain drawn from a lognormal with median 1.
struct MismatchModel {
    double coefficient_of_variation = 0.0;
    std::uint64_t seed = 0;
};

/// Gains for n neurons; cv = 0 yields exactly 1.0 everywhere.
std::vector<double> sample_gains(const MismatchModel& model, std::size_t n);

/// Replaces every neuron's gain with an independent lognormal sample.
void apply_mismatch(Network& network, const MismatchModel& model);

struct RateProfile {
    std::vector<double> rates_hz;
    double stimulus_rate_hz = 0.0;
    double duration_ms = 0.0;

    double mean() const;
    /// Population standard deviation.
    double stddev() const;

    /// CSV `neuron_id,rate_hz`.
    void write_csv(std::ostream& out) const;
    /// CSV `rank,neuron_id,rate_hz` in ascending rate order.
    void write_sorted_csv(std::ostream& out) const;
};

/// Stimulates every neuron in isolation (connections, plastic synapses and
/// drives ignored) with a regular excitatory train and reports the mean
/// rates. Works on a copy, so the network is untouched.
RateProfile characterize(const Network& network, double stimulus_rate_hz, double duration_ms,
                         WeightClass stimulus_class = WeightClass::E4);

/// Thrown by select_similar when even the tightest k-subset is wider than
/// the tolerance.
class InfeasibleSelection : public ArgumentError {
public:
    InfeasibleSelection(double min_band_hz, double tolerance_hz);
    double min_band_hz() const { return min_band_; }

private:
    double min_band_;
};

struct Selection {
    std::vector<NeuronId> neurons;  // ascending rate order
    double band_hz = 0.0;
};

/// The k neurons whose rates span the narrowest band (sorted sliding window;
/// ties go to the lowest-rate window).
Selection select_similar(const RateProfile& profile, std::size_t k, double tolerance_hz);

/// Finds the excitatory ladder scale at which a mismatch-free default neuron
/// fires at `target_rate_hz` under `stimulus_rate_hz` (bisection).
double calibrate_ladder_scale(const NeuronParams& params, double target_rate_hz, double stimulus_rate_hz,
                              double synaptic_tau = 10.0, WeightClass stimulus_class = WeightClass::E4,
                              double duration_ms = 10'000.0);

/// Finds the gain cv for which the characterization sweep of `network`
/// reproduces the target std/mean ratio (bisection on a fixed seed).
double calibrate_cv(const Network& network, double target_ratio, std::uint64_t seed, double stimulus_rate_hz,
                    double duration_ms, WeightClass stimulus_class = WeightClass::E4);

}  // namespace spikectl::mismatch

#endif  // SPIKECTL_MISMATCH_HPP
