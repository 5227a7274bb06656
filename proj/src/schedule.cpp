#include <cmath>
#include <numbers>

#include "parte/sds.hpp"

namespace parte {

double NoiseSchedule::alpha(double t) const { return std::cos(0.5 * std::numbers::pi * t); }
double NoiseSchedule::sigma(double t) const { return std::sin(0.5 * std::numbers::pi * t); }
double NoiseSchedule::weight(double t) const {
    const double s = sigma(t);
    return s * s;
}

}  // namespace parte
