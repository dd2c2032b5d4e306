#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "spikectl/harness.hpp"
#include "spikectl/snn.hpp"

using namespace spikectl;

namespace {

Network single(double scale = 1.0) { return build_network(1, NeuronParams{}, default_weight_classes(scale)); }

std::size_t spikes_of(const EventLog& log, NeuronId n) {
    return static_cast<std::size_t>(
        std::count_if(log.events().begin(), log.events().end(), [n](const Event& e) { return e.neuron_id == n; }));
}

std::vector<double> membrane_trajectory(Network net, NeuronId n, int steps) {
    std::vector<double> v;
    for (int i = 0; i < steps; ++i) {
        net.step();
        v.push_back(net.state(n).membrane_potential);
    }
    return v;
}

}  // namespace

TEST(WeightClasses, DefaultLadderIsGeometricWithMirroredInhibition) {
    const auto c = default_weight_classes(2.0, 7.0);
    const double e[] = {0.1, 0.2, 0.4, 0.8};
    for (int k = 0; k < 4; ++k) {
        EXPECT_DOUBLE_EQ(c[k].efficacy, e[k]);
        EXPECT_DOUBLE_EQ(c[k + 4].efficacy, -e[k]);
        EXPECT_DOUBLE_EQ(c[k].synaptic_tau, 7.0);
    }
    EXPECT_NO_THROW(validate_weight_classes(c));
}

TEST(WeightClasses, PolarityMismatchRejected) {
    auto c = default_weight_classes();
    c[class_index(WeightClass::E2)].efficacy = -0.1;
    EXPECT_THROW(validate_weight_classes(c), ArgumentError);
    EXPECT_THROW(build_network(4, NeuronParams{}, c), ArgumentError);
    auto d = default_weight_classes();
    d[class_index(WeightClass::I1)].efficacy = 0.1;
    EXPECT_THROW(build_network(4, NeuronParams{}, d), ArgumentError);
}

TEST(WeightClasses, LabelsRoundTrip) {
    for (const auto c : kAllWeightClasses) {
        EXPECT_EQ(parse_weight_class(to_string(c)), c);
    }
    EXPECT_THROW(parse_weight_class("E5"), ArgumentError);
}

TEST(BuildNetwork, EmptyAtRest) {
    const auto net = build_network(256, NeuronParams{}, default_weight_classes());
    EXPECT_EQ(net.size(), 256u);
    EXPECT_TRUE(net.connections().empty());
    for (NeuronId i = 0; i < 256; ++i) {
        EXPECT_EQ(net.drive(i, Polarity::Excitatory), nullptr);
        EXPECT_EQ(net.state(i).membrane_potential, 0.0);
    }
}

TEST(BuildNetwork, RejectsBadParameters) {
    NeuronParams p;
    p.membrane_tau = 0.0;
    EXPECT_THROW(build_network(1, p, default_weight_classes()), ArgumentError);
    p = NeuronParams{};
    p.adaptation_tau = -1.0;
    EXPECT_THROW(build_network(1, p, default_weight_classes()), ArgumentError);
    p = NeuronParams{};
    p.threshold = p.reset_potential;
    EXPECT_THROW(build_network(1, p, default_weight_classes()), ArgumentError);
    p = NeuronParams{};
    p.gain = 0.0;
    EXPECT_THROW(build_network(1, p, default_weight_classes()), ArgumentError);
    EXPECT_THROW(build_network(0, NeuronParams{}, default_weight_classes()), ArgumentError);
}

TEST(Run, SilentWithoutInput) {
    auto net = single();
    EXPECT_TRUE(net.run(10'000.0).log.empty());
}

TEST(Connect, ZeroEfficacyClassIsIdentity) {
    auto classes = default_weight_classes();
    classes[class_index(WeightClass::E1)].efficacy = 0.0;
    auto plain = build_network(2, NeuronParams{}, classes);
    plain.set_drive(0, 300.0, Polarity::Excitatory);
    plain.set_drive(1, 150.0, Polarity::Excitatory);
    auto linked = plain;
    linked.connect(0, 1, WeightClass::E1);
    EXPECT_EQ(membrane_trajectory(plain, 1, 20'000), membrane_trajectory(linked, 1, 20'000));
}

TEST(Connect, StrongExcitationMakesTargetFire) {
    auto net = build_network(2, NeuronParams{}, default_weight_classes(6.0));
    net.connect(0, 1, WeightClass::E4);
    net.set_drive(0, 200.0, Polarity::Excitatory);
    const auto log = net.run(1000.0).log;
    EXPECT_GT(spikes_of(log, 0), 0u);
    EXPECT_GT(spikes_of(log, 1), 0u);
}

TEST(Connect, InhibitionLowersTonicRate) {
    auto base = build_network(2, NeuronParams{}, default_weight_classes(6.0));
    base.set_drive(0, 200.0, Polarity::Excitatory);
    base.set_drive(1, 400.0, Polarity::Excitatory);
    auto inhibited = base;
    inhibited.connect(0, 1, WeightClass::I4);
    EXPECT_LT(spikes_of(inhibited.run(2000.0).log, 1), spikes_of(base.run(2000.0).log, 1));
}

TEST(Connect, SelfLoopAcceptedAndReconnectOverwrites) {
    auto net = single(6.0);
    net.connect(0, 0, WeightClass::E1);
    net.set_drive(0, 200.0, Polarity::Excitatory);
    EXPECT_NO_THROW(net.run(500.0));
    net.connect(0, 0, WeightClass::I2);
    EXPECT_EQ(net.connection(0, 0), WeightClass::I2);
    EXPECT_EQ(net.connections().size(), 1u);
    EXPECT_THROW(net.connect(0, 1, WeightClass::E1), ArgumentError);
}

TEST(Drive, RegularDeliversExactRate) {
    auto net = single();
    net.set_drive(0, 800.0, Polarity::Excitatory);
    int arrivals = 0;
    double prev = 0.0;
    for (int i = 0; i < 10'000; ++i) {  // 1 s
        net.step();
        const double t = net.drive_trace(0, Polarity::Excitatory);
        if (t > prev) {
            ++arrivals;
        }
        prev = t;
    }
    EXPECT_EQ(arrivals, 800);
}

TEST(Drive, ZeroRateEqualsNoDrive) {
    auto undriven = single();
    undriven.set_membrane_potential(0, 0.5);
    auto zero = undriven;
    zero.set_drive(0, 0.0, Polarity::Excitatory);
    EXPECT_EQ(zero.drive(0, Polarity::Excitatory), nullptr);
    EXPECT_EQ(membrane_trajectory(undriven, 0, 5000), membrane_trajectory(zero, 0, 5000));
    EXPECT_THROW(zero.set_drive(0, -1.0, Polarity::Excitatory), ArgumentError);
    EXPECT_THROW(zero.set_drive(3, 10.0, Polarity::Excitatory), ArgumentError);
}

TEST(Drive, PoissonReproducibleForSeed) {
    auto a = build_network(3, NeuronParams{}, default_weight_classes(6.0));
    for (NeuronId i = 0; i < 3; ++i) {
        a.set_drive(i, 300.0, Polarity::Excitatory, DrivePattern::Poisson, 42 + i);
    }
    auto b = a;
    EXPECT_EQ(a.run(2000.0).log, b.run(2000.0).log);
    auto c = build_network(3, NeuronParams{}, default_weight_classes(6.0));
    for (NeuronId i = 0; i < 3; ++i) {
        c.set_drive(i, 300.0, Polarity::Excitatory, DrivePattern::Poisson, 7 + i);
    }
    EXPECT_NE(a.run(2000.0).log, c.run(2000.0).log);
}

TEST(Drive, CalibratedReferenceNeuronNearPublishedMean) {
    // The shipped ladder puts a mismatch-free neuron under the 200 Hz
    // reference stimulus at the characterized mean rate.
    const auto config = harness::default_config();
    auto net = build_network(1, config.device.neuron, config.device.weight_classes);
    net.set_drive(0, 200.0, Polarity::Excitatory, DrivePattern::Regular, 0, config.device.characterization_class);
    const double rate = static_cast<double>(net.run(10'000.0).log.size()) / 10.0;
    EXPECT_NEAR(rate, 94.7, 1.0);
}

TEST(Step, AdaptationStretchesIntervals) {
    // One drive spike per step gives a constant current once the trace has
    // settled; the neuron is kept from firing until then.
    auto net = single(0.2);
    net.set_drive(0, 10'000.0, Polarity::Excitatory, DrivePattern::Regular, 0, WeightClass::E1);
    NeuronParams mute;
    mute.threshold = 1e9;
    net.set_params(0, mute);
    net.run(200.0);
    net.set_params(0, NeuronParams{});
    net.set_membrane_potential(0, 0.0);
    const auto log = net.run(1000.0).log;
    ASSERT_GE(log.size(), 11u);
    const auto ev = log.events();
    for (std::size_t i = 2; i <= 10; ++i) {
        EXPECT_GE(ev[i].timestamp - ev[i - 1].timestamp, ev[i - 1].timestamp - ev[i - 2].timestamp);
    }
    EXPECT_GT(ev[10].timestamp - ev[9].timestamp, ev[1].timestamp - ev[0].timestamp);
}

TEST(Step, HigherGainFiresAtLeastAsFast) {
    auto net = build_network(2, NeuronParams{}, default_weight_classes(6.0));
    net.set_gain(1, 1.2);
    net.set_drive(0, 200.0, Polarity::Excitatory);
    net.set_drive(1, 200.0, Polarity::Excitatory);
    const auto log = net.run(3000.0).log;
    EXPECT_GE(spikes_of(log, 1), spikes_of(log, 0));
}

TEST(Step, RejectsTimestepAboveMembraneLimit) {
    auto net = single();
    EXPECT_THROW(net.step(2.5), ArgumentError);
    EXPECT_THROW(net.step(0.0), ArgumentError);
    EXPECT_NO_THROW(net.step(2.0));
}

TEST(Step, SimultaneousEventsInAscendingId) {
    auto net = build_network(5, NeuronParams{}, default_weight_classes(6.0));
    for (NeuronId i = 0; i < 5; ++i) {
        net.set_drive(4 - i, 300.0, Polarity::Excitatory);
    }
    const auto log = net.run(500.0).log;
    const auto ev = log.events();
    for (std::size_t i = 1; i < ev.size(); ++i) {
        ASSERT_LE(ev[i - 1].timestamp, ev[i].timestamp);
        if (ev[i - 1].timestamp == ev[i].timestamp) {
            EXPECT_LT(ev[i - 1].neuron_id, ev[i].neuron_id);
        }
    }
}

TEST(Run, DeterministicAndComposable) {
    auto net = build_network(4, NeuronParams{}, default_weight_classes(6.0));
    net.connect(0, 1, WeightClass::E3);
    net.connect(1, 2, WeightClass::I2);
    net.connect(2, 3, WeightClass::E4);
    net.set_drive(0, 250.0, Polarity::Excitatory, DrivePattern::Poisson, 42);
    net.set_drive(2, 300.0, Polarity::Excitatory, DrivePattern::Poisson, 43);
    auto once = net;
    auto twice = net;
    const auto full = once.run(2000.0).log;
    EXPECT_EQ(full, net.run(2000.0).log);
    auto first = twice.run(1000.0).log;
    const auto second = twice.run(1000.0).log;
    first.append(second.events());
    EXPECT_EQ(full, first);
}

TEST(Invariants, Refractoriness) {
    auto net = build_network(3, NeuronParams{}, default_weight_classes(20.0));
    for (NeuronId i = 0; i < 3; ++i) {
        net.set_drive(i, 5000.0, Polarity::Excitatory, DrivePattern::Poisson, i);
    }
    const auto log = net.run(1000.0).log;
    std::vector<Tick> last(3, -1'000'000);
    for (const auto& e : log.events()) {
        EXPECT_GE(e.timestamp - last[e.neuron_id], ms_to_ticks(NeuronParams{}.refractory_period));
        last[e.neuron_id] = e.timestamp;
    }
    EXPECT_GT(log.size(), 1000u);
}

TEST(Invariants, LeakConvergesMonotonically) {
    auto net = build_network(3, NeuronParams{}, default_weight_classes());
    net.set_membrane_potential(0, 0.9);
    net.set_membrane_potential(1, -0.7);
    net.set_membrane_potential(2, 0.3);
    std::vector<double> prev{0.9, 0.7, 0.3};
    for (int s = 0; s < 5000; ++s) {
        EXPECT_TRUE(net.step().empty());
        for (NeuronId i = 0; i < 3; ++i) {
            const double dev = std::abs(net.state(i).membrane_potential);
            EXPECT_LE(dev, prev[i]);
            prev[i] = dev;
        }
    }
    EXPECT_LT(prev[0], 1e-6);
}

TEST(Invariants, TraceMatchesClosedFormKernelSum) {
    auto net = build_network(2, NeuronParams{}, default_weight_classes(6.0, 7.0));
    net.connect(0, 1, WeightClass::E2);
    net.set_drive(0, 180.0, Polarity::Excitatory, DrivePattern::Poisson, 5);
    const double e = net.weight_class(WeightClass::E2).efficacy;
    std::vector<Tick> arrivals;  // a spike reaches the target one step later
    const Tick dt = ms_to_ticks(Network::kDefaultDt);
    for (int s = 0; s < 20'000; ++s) {
        for (const auto& ev : net.step()) {
            if (ev.neuron_id == 0) {
                arrivals.push_back(ev.timestamp + dt);
            }
        }
        double expected = 0.0;
        for (const Tick a : arrivals) {
            if (a <= net.now()) {
                expected += e * std::exp(-ticks_to_ms(net.now() - a) / 7.0);
            }
        }
        const double got = net.synaptic_trace(1, WeightClass::E2);
        ASSERT_NEAR(got, expected, 1e-9 * std::max(1.0, std::abs(expected))) << "step " << s;
    }
    EXPECT_GT(arrivals.size(), 20u);
}

TEST(Invariants, InhibitionNeverAddsSpikes) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        auto base = build_network(3, NeuronParams{}, default_weight_classes(6.0));
        base.connect(0, 2, WeightClass::E3);
        base.set_drive(0, 100.0 + 400.0 * rng.uniform(), Polarity::Excitatory, DrivePattern::Poisson, trial);
        base.set_drive(1, 100.0 + 400.0 * rng.uniform(), Polarity::Excitatory, DrivePattern::Poisson, trial + 100);
        base.set_drive(2, 100.0 + 400.0 * rng.uniform(), Polarity::Excitatory, DrivePattern::Poisson, trial + 200);
        const auto cls = kAllWeightClasses[4 + static_cast<std::size_t>(rng.uniform() * 4)];
        auto inhibited = base;
        inhibited.connect(1, 2, cls);
        EXPECT_LE(spikes_of(inhibited.run(1000.0).log, 2), spikes_of(base.run(1000.0).log, 2)) << "trial " << trial;
    }
}

TEST(SpikeRate, WindowArithmetic) {
    std::vector<Event> ev;
    for (int i = 0; i < 10; ++i) {
        ev.push_back({3, ms_to_ticks(105.0 + 9.0 * i)});
    }
    ev.push_back({4, ms_to_ticks(150.0)});
    const EventLog log(ev);
    const NeuronId three[] = {3};
    const NeuronId both[] = {3, 4};
    EXPECT_DOUBLE_EQ(spike_rate(log, three, 100.0, 200.0), 100.0);
    EXPECT_DOUBLE_EQ(spike_rate(log, both, 100.0, 200.0), 110.0);
    EXPECT_DOUBLE_EQ(spike_rate(EventLog{}, three, 100.0, 200.0), 0.0);
    EXPECT_THROW(spike_rate(log, std::span<const NeuronId>{}, 100.0, 200.0), ArgumentError);
    EXPECT_THROW(spike_rate(log, three, 0.0, 200.0), ArgumentError);
}

TEST(EventLog, CsvHeaderAndRows) {
    const EventLog log({{2, 100}, {0, 200}});
    std::ostringstream os;
    log.write_csv(os);
    EXPECT_EQ(os.str(), "neuron_id,timestamp_us\n2,100\n0,200\n");
}
