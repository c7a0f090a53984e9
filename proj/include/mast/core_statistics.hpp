#pragma once

// Numerical kernel shared by every detector: the per-sample MAST increment,
// the Page CUSUM increment and the clamped maximum-likelihood means.
//
// Samples are ratios x_k = p_k / p_{k-1} of consecutive daily counts and are
// passed around as plain doubles.

namespace mast {

// Mean-constraint boundaries: pre-change means are <= lower, post-change
// means are > upper. Requires 0 < lower <= upper < inf.
class Barriers {
public:
    Barriers(double lower, double upper);

    // Degenerate barriers lower == upper == delta.
    static Barriers single(double delta) { return Barriers(delta, delta); }

    double lower() const noexcept { return lower_; }
    double upper() const noexcept { return upper_; }
    bool degenerate() const noexcept { return lower_ == upper_; }

private:
    double lower_;
    double upper_;
};

// Known common standard deviation of the ratio samples.
class NoiseModel {
public:
    explicit NoiseModel(double sigma);

    double sigma() const noexcept { return sigma_; }
    double variance() const noexcept { return variance_; }

private:
    double sigma_;
    double variance_;
};

struct MeanEstimates {
    double mu0_hat;
    double mu1_hat;
};

/// Log-likelihood-ratio contribution of one sample under unknown, barrier
/// constrained means:
///
///   x <= lower          : -(x - upper)^2 / (2 sigma^2)
///   lower < x <= upper  : (upper - lower) / sigma^2 * (x - (lower + upper) / 2)
///   x > upper           :  (x - lower)^2 / (2 sigma^2)
///
/// Continuous and nondecreasing in x. With lower == upper == delta this is
/// sign(x - delta) * (x - delta)^2 / (2 sigma^2).
double g_nonlinearity(double x, const Barriers& barriers, const NoiseModel& noise) noexcept;

/// ML estimates of the pre/post-change means of a single sample:
/// (min(x, lower), max(x, upper)).
MeanEstimates clamped_mean_estimates(double x, const Barriers& barriers) noexcept;

/// Page CUSUM increment 2 alpha (x - 1) / sigma^2 for known means 1 -/+ alpha.
/// No range check on alpha; callers that configure a detector validate it.
double page_increment(double x, double alpha, const NoiseModel& noise) noexcept;

}  // namespace mast
