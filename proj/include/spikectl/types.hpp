#ifndef SPIKECTL_TYPES_HPP
#define SPIKECTL_TYPES_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace spikectl {

/// Device neuron address (the AER index).
using NeuronId = std::uint32_t;

/// Simulation time in microsecond ticks.
using Tick = std::int64_t;

constexpr Tick kTicksPerMs = 1000;
constexpr Tick kTicksPerSecond = 1'000'000;

constexpr double ticks_to_ms(Tick t) { return static_cast<double>(t) / kTicksPerMs; }

/// Rounds a duration in milliseconds to the nearest tick.
inline Tick ms_to_ticks(double ms) { return static_cast<Tick>(std::llround(ms * kTicksPerMs)); }

/// Raised for violated preconditions on user-supplied arguments.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace spikectl

#endif  // SPIKECTL_TYPES_HPP
