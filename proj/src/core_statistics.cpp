#include "mast/core_statistics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mast {

Barriers::Barriers(double lower, double upper) : lower_(lower), upper_(upper)
{
    if (!std::isfinite(lower) || !std::isfinite(upper) || !(lower > 0.0) || !(lower <= upper)) {
        throw std::invalid_argument("barriers must satisfy 0 < lower <= upper < inf (got lower=" +
                                    std::to_string(lower) + ", upper=" + std::to_string(upper) + ")");
    }
}

NoiseModel::NoiseModel(double sigma) : sigma_(sigma), variance_(sigma * sigma)
{
    if (!std::isfinite(sigma) || !(sigma > 0.0)) {
        throw std::invalid_argument("noise sigma must be finite and > 0 (got " + std::to_string(sigma) + ")");
    }
}

double g_nonlinearity(double x, const Barriers& barriers, const NoiseModel& noise) noexcept
{
    const double lower = barriers.lower();
    const double upper = barriers.upper();
    const double var = noise.variance();

    if (x <= lower) {
        const double d = x - upper;
        return -(d * d) / (2.0 * var);
    }
    if (x <= upper) {
        const double mid = (lower + upper) / 2.0;
        return (upper - lower) * (x - mid) / var;
    }
    const double d = x - lower;
    return (d * d) / (2.0 * var);
}

MeanEstimates clamped_mean_estimates(double x, const Barriers& barriers) noexcept
{
    return {x < barriers.lower() ? x : barriers.lower(), x > barriers.upper() ? x : barriers.upper()};
}

double page_increment(double x, double alpha, const NoiseModel& noise) noexcept
{
    return 2.0 * alpha * (x - 1.0) / noise.variance();
}

}  // namespace mast
