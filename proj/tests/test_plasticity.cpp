#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

#include "spikectl/plasticity.hpp"
#include "spikectl/snn.hpp"

using namespace spikectl;
using namespace spikectl::plasticity;

namespace {

HebbianRule rule(double w_max = 1.0) {
    HebbianRule r;
    r.w_max = w_max;
    return r;
}

std::vector<double> weights(const PlasticArray& a) {
    std::vector<double> w;
    for (const auto& s : a.synapses()) {
        w.push_back(s.weight);
    }
    return w;
}

// learn_cmd at 0..4, mr at 5..9.
PlasticArray learn_array(double w_max = 1.0) {
    PlasticArray a(10, rule(w_max));
    for (NeuronId pre = 0; pre < 5; ++pre) {
        for (NeuronId post = 5; post < 10; ++post) {
            a.enable(pre, post, 0.0);
        }
    }
    return a;
}

}  // namespace

TEST(PlasticArray, EnableProductAndReport) {
    auto net = build_network(10, NeuronParams{}, default_weight_classes());
    const NeuronId pre[] = {0, 1, 2, 3, 4};
    const NeuronId post[] = {5, 6, 7, 8, 9};
    enable_plastic(net, pre, post, 0.0);
    EXPECT_EQ(net.plastic().size(), 25u);
    EXPECT_EQ(net.plastic().enabled_count(), 25u);
    EXPECT_EQ(net.plastic().weight(2, 7), 0.0);
    EXPECT_FALSE(net.plastic().weight(7, 2).has_value());
}

TEST(PlasticArray, ReEnableResetsWeight) {
    PlasticArray a(4, rule());
    a.enable(0, 1, 0.2);
    a.set_weight(0, 1, 0.9);
    a.enable(0, 1, 0.2);
    EXPECT_EQ(a.weight(0, 1), 0.2);
    EXPECT_EQ(a.size(), 1u);
}

TEST(PlasticArray, RejectsBadArguments) {
    PlasticArray a(4, rule());
    EXPECT_THROW(a.enable(0, 4, 0.0), ArgumentError);
    EXPECT_THROW(a.enable(0, 1, 1.5), ArgumentError);
    EXPECT_THROW(a.set_weight(2, 3, 0.5), ArgumentError);
    HebbianRule bad;
    bad.w_max = bad.w_min;
    EXPECT_THROW(PlasticArray(4, bad), ArgumentError);
}

TEST(PlasticArray, ZeroWeightChangesNoTrajectory) {
    auto plain = build_network(2, NeuronParams{}, default_weight_classes(6.0));
    plain.set_drive(0, 300.0, Polarity::Excitatory);
    plain.set_drive(1, 200.0, Polarity::Excitatory);
    auto with_plastic = plain;
    with_plastic.plastic().enable(0, 1, 0.0);
    EXPECT_EQ(plain.run(2000.0).log, with_plastic.run(2000.0).log);
}

TEST(PlasticArray, PotentiatedSynapseActsLikeFixedOne) {
    auto classes = default_weight_classes(6.0);
    auto fixed = build_network(2, NeuronParams{}, classes);
    fixed.set_drive(0, 300.0, Polarity::Excitatory);
    auto plastic = fixed;
    fixed.connect(0, 1, WeightClass::E3);
    HebbianRule r;
    r.w_max = 5.0;
    plastic.plastic().set_rule(r);
    plastic.plastic().enable(0, 1, classes[class_index(WeightClass::E3)].efficacy);
    plastic.set_plastic_tau(classes[class_index(WeightClass::E3)].synaptic_tau);
    EXPECT_EQ(fixed.run(2000.0).log, plastic.run(2000.0).log);
}

TEST(Update, ClosedGateChangesNothing) {
    auto a = learn_array();
    const auto before = weights(a);
    const std::vector<std::uint32_t> counts(10, 50);
    EXPECT_EQ(plasticity_update(a, counts, {false}), 0u);
    EXPECT_EQ(weights(a), before);
}

TEST(Update, NeedsBothSidesActive) {
    auto a = learn_array();
    std::vector<std::uint32_t> counts(10, 0);
    counts[2] = 20;  // pre only
    plasticity_update(a, counts, {true});
    EXPECT_EQ(weights(a), std::vector<double>(25, 0.0));
    counts[2] = 0;
    counts[6] = 20;  // post only
    plasticity_update(a, counts, {true});
    EXPECT_EQ(weights(a), std::vector<double>(25, 0.0));
}

TEST(Update, ClosedFormOverConsecutiveWindows) {
    // learn_cmd[2] (neuron 1) with mr[0..1] (neurons 5, 6) co-active for k windows.
    for (int k = 0; k <= 14; ++k) {
        auto a = learn_array(0.8);
        std::vector<std::uint32_t> counts(10, 0);
        counts[1] = 4;
        counts[5] = 3;
        counts[6] = 9;
        counts[7] = 2;  // below theta_post
        for (int w = 0; w < k; ++w) {
            plasticity_update(a, counts, {true});
        }
        const double dw = 0.1 * 0.8;
        double expected = 0.0;
        for (int w = 0; w < k; ++w) {
            expected = std::min(expected + dw, 0.8);  // same accumulation order as the update
        }
        for (const auto& s : a.synapses()) {
            const bool learned = s.pre == 1 && (s.post == 5 || s.post == 6);
            EXPECT_DOUBLE_EQ(s.weight, learned ? expected : 0.0) << "k=" << k;
            if (learned) {
                EXPECT_NEAR(s.weight, std::min(k * dw, 0.8), 1e-12);
            }
        }
    }
}

TEST(Update, MonotoneAndBoundedUnderRandomActivity) {
    Rng rng(3);
    auto a = learn_array(0.7);
    a.enable(9, 0, 0.3);
    auto prev = weights(a);
    for (int w = 0; w < 2000; ++w) {
        std::vector<std::uint32_t> counts(10);
        for (auto& c : counts) {
            c = static_cast<std::uint32_t>(rng.uniform() * 7);
        }
        plasticity_update(a, counts, {rng.uniform() < 0.5});
        const auto now = weights(a);
        for (std::size_t i = 0; i < now.size(); ++i) {
            EXPECT_GE(now[i], prev[i]);
            EXPECT_GE(now[i], 0.0);
            EXPECT_LE(now[i], 0.7);
        }
        prev = now;
    }
}

TEST(Update, LocalToPreAndPostCounts) {
    // Scrambling the activity of neurons outside a synapse never changes it.
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::uint32_t> counts(10);
        for (auto& c : counts) {
            c = static_cast<std::uint32_t>(rng.uniform() * 6);
        }
        const NeuronId pre = static_cast<NeuronId>(rng.uniform() * 5);
        const NeuronId post = 5 + static_cast<NeuronId>(rng.uniform() * 5);
        auto scrambled = counts;
        for (std::size_t i = 0; i < 10; ++i) {
            if (i != pre && i != post) {
                scrambled[i] = static_cast<std::uint32_t>(rng.uniform() * 6);
            }
        }
        auto a = learn_array();
        auto b = learn_array();
        plasticity_update(a, counts, {true});
        plasticity_update(b, scrambled, {true});
        EXPECT_EQ(a.weight(pre, post), b.weight(pre, post));
    }
}

TEST(Update, DisabledSynapsesIgnored) {
    auto a = learn_array();
    a.disable(0, 5);
    std::vector<std::uint32_t> counts(10, 10);
    plasticity_update(a, counts, {true});
    EXPECT_FALSE(a.weight(0, 5).has_value());
    EXPECT_EQ(a.enabled_count(), 24u);
}

TEST(Gate, OpensOnGatingActivityWithoutVeto) {
    GateRule r{{0}, {1, 2}, 3, 0};
    EXPECT_TRUE(evaluate_gate(r, std::vector<std::uint32_t>{3, 0, 0}).open);
    EXPECT_FALSE(evaluate_gate(r, std::vector<std::uint32_t>{2, 0, 0}).open);
    EXPECT_FALSE(evaluate_gate(r, std::vector<std::uint32_t>{9, 0, 1}).open);
    EXPECT_FALSE(evaluate_gate(GateRule{{}, {}, 0, 0}, std::vector<std::uint32_t>{9}).open);
}

TEST(Gate, SilentGatingNeuronsFreezeWeights) {
    Rng rng(8);
    GateRule r{{9}, {}, 1, 0};
    auto a = learn_array();
    a.enable(9, 5, 0.0);
    for (int w = 0; w < 500; ++w) {
        std::vector<std::uint32_t> counts(10);
        for (auto& c : counts) {
            c = static_cast<std::uint32_t>(rng.uniform() * 10);
        }
        counts[9] = 0;
        const auto before = weights(a);
        plasticity_update(a, counts, evaluate_gate(r, counts));
        EXPECT_EQ(weights(a), before);
    }
}

TEST(Weights, JsonRoundTrip) {
    auto a = learn_array();
    a.set_weight(1, 5, 0.4);
    a.set_weight(3, 9, 0.75);
    PlasticArray b(10, rule());
    weights_from_json(b, weights_to_json(a));
    EXPECT_EQ(weights(a), weights(b));
    EXPECT_EQ(b.weight(3, 9), 0.75);
    EXPECT_THROW(weights_from_json(b, "{\"pre\": 1}"), ArgumentError);
}
