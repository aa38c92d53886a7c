#pragma once

#include <algorithm>
#include <cmath>

namespace dfsw {

// Log-likelihood ratio, natural log of P(bit = 1) / P(bit = 0).
//
// This is THE sign convention of the whole library: positive favors 1,
// negative favors 0. HMM soft estimates, LDPC decoder priors, messages and
// posteriors all use it.
struct LlrValue {
    double value = 0.0;
};

// Probabilities entering a log are clamped to [kProbFloor, 1 - kProbFloor]
// and LLR magnitudes to kLlrClamp, so degenerate emissions (certain bits)
// never produce non-finite arithmetic.
inline constexpr double kProbFloor = 1e-12;
inline constexpr double kLlrClamp = 30.0;

inline double clamp_prob(double p) {
    return std::clamp(p, kProbFloor, 1.0 - kProbFloor);
}

inline double clamp_llr(double v) {
    return std::clamp(v, -kLlrClamp, kLlrClamp);
}

inline LlrValue llr_from_prob1(double p1) {
    p1 = clamp_prob(p1);
    return {clamp_llr(std::log(p1 / (1.0 - p1)))};
}

inline double prob1_from_llr(LlrValue l) {
    return 1.0 / (1.0 + std::exp(-l.value));
}

} // namespace dfsw
