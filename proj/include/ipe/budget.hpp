// budget.hpp — closed-form photon collection and detection budgets.

#pragma once

#include "ipe/measure.hpp"

namespace ipe {

struct MirrorBudget {
    double t1_ppm = 13.0;  // output mirror transmission
    double t2_ppm = 1.3;   // back mirror transmission
    double loss_ppm = 68.0; // combined absorption/scatter losses
};

// Probability that an intracavity photon leaves through the output
// mirror: T1 / (T1 + T2 + L).
double output_coupling(const MirrorBudget& m);

// Solid-angle collection fraction of a lens of the given numerical
// aperture: (1 - sqrt(1 - NA^2)) / 2.
double free_space_collection(double numerical_aperture);

struct DetectionBudget {
    double probability = 0.0; // photon detected per sequence
    double rate_hz = 0.0;     // detected events per second
};

// generation * exit * mean APD efficiency, capped at 1; the rate assumes
// one sequence every sequence_duration seconds.
DetectionBudget detection_budget(double generation_probability, const NoiseModel& noise,
                                 double sequence_duration);

} // namespace ipe
