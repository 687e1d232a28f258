#include "ipe/budget.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ipe {

double output_coupling(const MirrorBudget& m) {
    if (m.t1_ppm < 0.0 || m.t2_ppm < 0.0 || m.loss_ppm < 0.0)
        throw std::invalid_argument("output_coupling: negative mirror budget entry");
    const double denom = m.t1_ppm + m.t2_ppm + m.loss_ppm;
    if (denom <= 0.0) throw std::invalid_argument("output_coupling: all-zero mirror budget");
    return m.t1_ppm / denom;
}

double free_space_collection(double numerical_aperture) {
    if (numerical_aperture < 0.0 || numerical_aperture > 1.0)
        throw std::invalid_argument("free_space_collection: NA must lie in [0,1]");
    return 0.5 * (1.0 - std::sqrt(1.0 - numerical_aperture * numerical_aperture));
}

DetectionBudget detection_budget(double generation_probability, const NoiseModel& noise,
                                 double sequence_duration) {
    if (generation_probability < 0.0 || generation_probability > 1.0)
        throw std::invalid_argument("detection_budget: generation probability out of range");
    if (sequence_duration <= 0.0)
        throw std::invalid_argument("detection_budget: sequence duration must be positive");
    noise.validate();
    const double apd = 0.5 * (noise.apd_efficiency0 + noise.apd_efficiency1);
    DetectionBudget b;
    b.probability = std::min(1.0, generation_probability * noise.exit_efficiency * apd);
    b.rate_hz = b.probability / sequence_duration;
    return b;
}

} // namespace ipe
