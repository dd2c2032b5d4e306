#ifndef SPIKECTL_PLANT_HPP
#define SPIKECTL_PLANT_HPP

#include "spikectl/random.hpp"

namespace spikectl::plant {

/// First-order wheel: d(omega)/dt = (gain * u - omega) / tau_plant.
struct PlantParams {
    double gain = 2530.0;           // IMU units per unit command
    double tau_plant_s = 0.3;
    double imu_noise_std = 84.0;    // IMU units
    double imu_rate_hz = 200.0;

    void validate() const;
};

struct PlantState {
    double omega = 0.0;  // IMU units
    double u = 0.0;      // last applied command
    bool held = false;   // wheel blocked: omega stays 0
};

/// Advances the plant by dt_ms under command u (held constant over the
/// step). Uses the exact solution of the linear ODE, so the result does not
/// depend on how a time span is split into steps.
PlantState plant_step(const PlantState& state, const PlantParams& params, double u, double dt_ms);

/// One gyro reading: omega plus Gaussian noise.
double imu_sample(const PlantState& state, const PlantParams& params, Rng& rng);

}  // namespace spikectl::plant

#endif  // SPIKECTL_PLANT_HPP
