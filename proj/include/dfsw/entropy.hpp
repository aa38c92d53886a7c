#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "dfsw/errors.hpp"
#include "dfsw/hmm.hpp"
#include "dfsw/rng.hpp"

namespace dfsw {

// Exact enumeration walks all 2^depth prefixes; past this bound the Monte
// Carlo estimator is the only option.
inline constexpr std::size_t kMaxExactConditioningDepth = 24;

// Binary entropy in bits, with 0 log 0 = 0.
inline double binary_entropy_bits(double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -(p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p));
}

// H(e_{M+1} | e_M, ..., e_1) in bits, exact: sums P(prefix) * Hb(P(e = 1 | prefix))
// over every length-`depth` prefix, carrying the forward-recursion belief down
// each branch of the prefix tree. Zero-probability branches contribute nothing
// and are skipped. O(2^depth * num_states^2).
inline double conditional_entropy_exact(const HmmModel& m, std::size_t depth) {
    if (depth > kMaxExactConditioningDepth)
        throw InfeasibleDepthError(
            "conditional_entropy_exact: depth " + std::to_string(depth) + " exceeds " +
            std::to_string(kMaxExactConditioningDepth) + "; use conditional_entropy_mc");

    const std::size_t n = m.num_states();
    std::vector<double> beliefs((depth + 1) * n);
    {
        const StateBelief pi = stationary_distribution(m);
        for (std::size_t s = 0; s < n; ++s) beliefs[s] = pi.probs[s];
    }

    long double acc = 0.0L;
    auto walk = [&](auto&& self, std::size_t level, double prefix_prob) -> void {
        const double* belief = &beliefs[level * n];
        if (level == depth) {
            double p1 = 0.0;
            for (std::size_t s = 0; s < n; ++s)
                p1 += belief[s] * (1.0 - m.emission_zero(s));
            acc += static_cast<long double>(prefix_prob) * binary_entropy_bits(p1);
            return;
        }
        double* child = &beliefs[(level + 1) * n];
        for (int bit = 0; bit <= 1; ++bit) {
            const double p = detail::forward_step_raw(m, belief, bit, child);
            if (p > 0.0) self(self, level + 1, prefix_prob * p);
        }
    };
    walk(walk, 0, 1.0);
    return static_cast<double>(acc);
}

struct McEstimate {
    double estimate = 0.0;
    double std_err = 0.0;
};

// Monte Carlo version of the conditional entropy: samples `samples` prefixes
// of length `depth` from the stationary process and averages the binary
// entropy of the predictive probability. Deterministic given the seed.
inline McEstimate conditional_entropy_mc(const HmmModel& m, std::size_t depth,
                                         std::size_t samples, std::uint64_t seed) {
    if (depth == 0)
        return {binary_entropy_bits(1.0 - marginal_zero_prob(m)), 0.0};
    if (samples < 100)
        throw InvalidParameterError("conditional_entropy_mc: need at least 100 samples");

    const std::size_t n = m.num_states();
    const StateBelief pi = stationary_distribution(m);
    Rng rng(seed);

    auto draw_from = [&](const double* probs) {
        const double u = rng.next_double();
        double cum = 0.0;
        for (std::size_t s = 0; s + 1 < n; ++s) {
            cum += probs[s];
            if (u < cum) return s;
        }
        return n - 1;
    };

    StateBelief belief;
    long double sum = 0.0L, sum_sq = 0.0L;
    for (std::size_t k = 0; k < samples; ++k) {
        std::size_t state = draw_from(pi.probs.data());
        belief = pi;
        for (std::size_t t = 0; t < depth; ++t) {
            const int bit = rng.next_double() < m.emission_zero(state) ? 0 : 1;
            forward_update_inplace(m, belief, bit);
            state = draw_from(&m.transition_matrix()[state * n]);
        }
        const double v = binary_entropy_bits(predict_prob_one(m, belief));
        sum += v;
        sum_sq += static_cast<long double>(v) * v;
    }
    const double mean = static_cast<double>(sum / samples);
    const double var = std::max(
        0.0, static_cast<double>((sum_sq - sum * sum / samples) / (samples - 1)));
    return {mean, std::sqrt(var / static_cast<double>(samples))};
}

struct EntropyRateResult {
    double bits = 0.0;
    bool converged = false;
    std::size_t depth_used = 0;
};

// Upper bound on the entropy rate H(e): deepen the conditioning until
// successive values differ by less than tol. Exact values up to the
// enumeration bound, Monte Carlo beyond. The sequence is nonincreasing, so
// the returned value approaches H(e) from above.
inline EntropyRateResult entropy_rate(const HmmModel& m, double tol = 1e-4,
                                      std::size_t max_depth = 64,
                                      std::size_t mc_samples = 1'000'000,
                                      std::uint64_t seed = 0x5eed) {
    if (!(tol > 0.0)) throw InvalidParameterError("entropy_rate: tol must be > 0");
    double prev = 0.0;
    double value = 0.0;
    for (std::size_t depth = 0; depth <= max_depth; ++depth) {
        value = depth <= kMaxExactConditioningDepth
                    ? conditional_entropy_exact(m, depth)
                    : conditional_entropy_mc(m, depth, mc_samples,
                                             derive_seed(seed, depth)).estimate;
        if (depth > 0 && std::abs(prev - value) < tol)
            return {value, true, depth};
        prev = value;
    }
    return {value, false, max_depth};
}

// Equivalent-channel capacity at conditioning depth M:
// 1 - H(e_{M+1} | e_M, ..., e_1).
inline double capacity(const HmmModel& m, std::size_t depth) {
    return 1.0 - conditional_entropy_exact(m, depth);
}

// (N, K) code over L columns with M pilot columns.
struct RateParams {
    std::uint64_t codeword_len = 0;   // N
    std::uint64_t code_dim = 0;       // K
    std::uint64_t num_columns = 0;    // L
    std::uint64_t num_pilots = 0;     // M

    void validate() const {
        if (!(code_dim > 0 && code_dim < codeword_len))
            throw InvalidParameterError("RateParams: need 0 < K < N");
        if (num_columns < 1)
            throw InvalidParameterError("RateParams: need L >= 1");
        if (num_pilots > num_columns)
            throw InvalidParameterError("RateParams: need M <= L");
    }
};

// Bits on the wire per frame: N*M pilot bits plus (N-K)*(L-M) syndrome bits.
inline std::uint64_t payload_bits(const RateParams& p) {
    p.validate();
    return p.codeword_len * p.num_pilots +
           (p.codeword_len - p.code_dim) * (p.num_columns - p.num_pilots);
}

// Total compression rate R = 1 - (K/N)(1 - M/L), evaluated through the exact
// integer payload so it matches the realized stream size bit for bit.
inline double compression_rate(const RateParams& p) {
    return static_cast<double>(payload_bits(p)) /
           static_cast<double>(p.codeword_len * p.num_columns);
}

enum class CurveMethod { Exact, MonteCarlo };

struct CurvePoint {
    std::size_t depth = 0;        // M
    double entropy_bits = 0.0;
    CurveMethod method = CurveMethod::Exact;
    double std_err = 0.0;         // zero for exact points
};

struct EntropyCurve {
    std::string model_name;
    std::vector<CurvePoint> points;   // sorted by depth
};

// Conditional entropy as a function of the conditioning depth M = 0..max_depth:
// exact points while enumeration is feasible, Monte Carlo beyond.
inline EntropyCurve entropy_curve(const HmmModel& m, std::size_t max_depth,
                              std::size_t mc_samples, std::uint64_t seed,
                              std::string model_name = "") {
    if (max_depth < 1)
        throw InvalidParameterError("entropy_curve: max_depth must be >= 1");
    EntropyCurve curve;
    curve.model_name = std::move(model_name);
    for (std::size_t depth = 0; depth <= max_depth; ++depth) {
        if (depth <= kMaxExactConditioningDepth) {
            curve.points.push_back(
                {depth, conditional_entropy_exact(m, depth), CurveMethod::Exact, 0.0});
        } else {
            const McEstimate e =
                conditional_entropy_mc(m, depth, mc_samples, derive_seed(seed, depth));
            curve.points.push_back({depth, e.estimate, CurveMethod::MonteCarlo, e.std_err});
        }
    }
    return curve;
}

inline std::string curve_to_csv(const EntropyCurve& curve) {
    std::string out = "M,entropy_bits,method,std_err\n";
    char line[128];
    for (const CurvePoint& p : curve.points) {
        std::snprintf(line, sizeof line, "%zu,%.9f,%s,%.9f\n", p.depth, p.entropy_bits,
                      p.method == CurveMethod::Exact ? "exact" : "monte-carlo",
                      p.std_err);
        out += line;
    }
    return out;
}

} // namespace dfsw
