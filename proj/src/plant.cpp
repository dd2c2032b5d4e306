#include "spikectl/plant.hpp"

#include <cmath>

#include "spikectl/types.hpp"

namespace spikectl::plant {

void PlantParams::validate() const {
    if (!(gain > 0.0) || !(tau_plant_s > 0.0)) {
        throw ArgumentError("plant gain and time constant must be > 0");
    }
    if (!(imu_noise_std >= 0.0)) {
        throw ArgumentError("IMU noise std must be >= 0");
    }
    if (!(imu_rate_hz > 0.0)) {
        throw ArgumentError("IMU rate must be > 0");
    }
}

PlantState plant_step(const PlantState& state, const PlantParams& params, double u, double dt_ms) {
    if (!(dt_ms > 0.0)) {
        throw ArgumentError("plant step needs dt > 0");
    }
    if (!(u >= 0.0)) {
        throw ArgumentError("motor command must be >= 0");
    }
    PlantState next = state;
    next.u = u;
    if (state.held) {
        next.omega = 0.0;
        return next;
    }
    const double target = params.gain * u;
    const double decay = std::exp(-dt_ms / (1000.0 * params.tau_plant_s));
    next.omega = target + (state.omega - target) * decay;
    return next;
}

double imu_sample(const PlantState& state, const PlantParams& params, Rng& rng) {
    if (params.imu_noise_std == 0.0) {
        return state.omega;
    }
    return rng.normal(state.omega, params.imu_noise_std);
}

}  // namespace spikectl::plant
