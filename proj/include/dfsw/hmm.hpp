#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dfsw/errors.hpp"
#include "dfsw/llr.hpp"
#include "dfsw/rng.hpp"

namespace dfsw {

// Hidden Markov error process: a state chain with per-state probabilities of
// emitting a zero bit. Immutable after construction, safe to share across
// workers.
class HmmModel {
public:
    // transition is row-major, entry (i, j) = P(state i -> state j).
    // emission_zero[i] = P(e = 0 | state i).
    HmmModel(std::size_t num_states, std::vector<double> transition,
             std::vector<double> emission_zero)
        : num_states_(num_states),
          transition_(std::move(transition)),
          emission_zero_(std::move(emission_zero)) {
        if (num_states_ < 1)
            throw InvalidParameterError("HmmModel: num_states must be >= 1");
        if (transition_.size() != num_states_ * num_states_)
            throw DimensionError("HmmModel: transition matrix size mismatch");
        if (emission_zero_.size() != num_states_)
            throw DimensionError("HmmModel: emission vector size mismatch");
        for (double q : emission_zero_)
            if (!(q >= 0.0 && q <= 1.0))
                throw InvalidParameterError("HmmModel: emission prob outside [0,1]");
        for (std::size_t i = 0; i < num_states_; ++i) {
            double row_sum = 0.0;
            for (std::size_t j = 0; j < num_states_; ++j) {
                const double p = transition_[i * num_states_ + j];
                if (!(p >= 0.0 && p <= 1.0))
                    throw InvalidParameterError("HmmModel: transition prob outside [0,1]");
                row_sum += p;
            }
            if (std::abs(row_sum - 1.0) > 1e-12)
                throw InvalidParameterError("HmmModel: transition row does not sum to 1");
        }
    }

    std::size_t num_states() const { return num_states_; }

    double transition(std::size_t from, std::size_t to) const {
        return transition_[from * num_states_ + to];
    }

    // P(e = 0 | state s)
    double emission_zero(std::size_t s) const { return emission_zero_[s]; }

    const std::vector<double>& transition_matrix() const { return transition_; }
    const std::vector<double>& emission_zero_vector() const { return emission_zero_; }

private:
    std::size_t num_states_;
    std::vector<double> transition_;   // row-major
    std::vector<double> emission_zero_;
};

// Two-state parameterization: P(S0->S0), P(S1->S1), P(e=0|S0), P(e=1|S1).
struct TwoStateParams {
    double p00 = 0.0;
    double p11 = 0.0;
    double q0 = 0.0;
    double q1 = 0.0;
};

inline HmmModel from_two_state(const TwoStateParams& p) {
    for (double v : {p.p00, p.p11, p.q0, p.q1})
        if (!(v >= 0.0 && v <= 1.0))
            throw InvalidParameterError("from_two_state: parameter outside [0,1]");
    return HmmModel(2, {p.p00, 1.0 - p.p00, 1.0 - p.p11, p.p11},
                    {p.q0, 1.0 - p.q1});
}

// Predictive distribution over hidden states, P(S_t | e_1 .. e_{t-1}).
// Small value type, owned by one worker at a time.
struct StateBelief {
    std::vector<double> probs;
};

namespace detail {

// One unclamped forward step: condition `belief` on the emission of `bit`,
// propagate through the transition matrix into `out`, and return the
// predictive probability P(bit | belief). If that probability is zero the
// contents of `out` are unspecified. `belief` and `out` must not alias.
inline double forward_step_raw(const HmmModel& m, const double* belief, int bit,
                               double* out) {
    const std::size_t n = m.num_states();
    double total = 0.0;
    std::array<double, 16> stack_post;
    std::vector<double> heap_post;
    double* post = stack_post.data();
    if (n > stack_post.size()) {
        heap_post.resize(n);
        post = heap_post.data();
    }
    for (std::size_t s = 0; s < n; ++s) {
        const double q = m.emission_zero(s);
        post[s] = belief[s] * (bit ? 1.0 - q : q);
        total += post[s];
    }
    if (total <= 0.0) return 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        double acc = 0.0;
        for (std::size_t s = 0; s < n; ++s)
            acc += post[s] * m.transition(s, t);
        out[t] = acc / total;
    }
    return total;
}

inline void power_iteration(const HmmModel& m, std::vector<double>& pi) {
    const std::size_t n = m.num_states();
    constexpr std::size_t kMaxIters = 1'000'000;
    constexpr double kTol = 1e-13;
    pi.assign(n, 1.0 / static_cast<double>(n));
    std::vector<double> next(n);
    for (std::size_t it = 0; it < kMaxIters; ++it) {
        double diff = 0.0, sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) acc += pi[i] * m.transition(i, j);
            next[j] = acc;
            sum += acc;
        }
        for (std::size_t j = 0; j < n; ++j) {
            next[j] /= sum;
            diff = std::max(diff, std::abs(next[j] - pi[j]));
        }
        pi.swap(next);
        if (diff < kTol) return;
    }
    throw SingularChainError("stationary_distribution: power iteration did not converge");
}

// Solve pi * P = pi, sum(pi) = 1 by Gaussian elimination on the transposed
// system. Returns false when a pivot vanishes (non-unique fixed point).
inline bool stationary_linear_solve(const HmmModel& m, std::vector<double>& pi) {
    const std::size_t n = m.num_states();
    // A = P^T - I with the last row replaced by the normalization constraint.
    std::vector<double> a(n * n);
    std::vector<double> b(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            a[i * n + j] = m.transition(j, i) - (i == j ? 1.0 : 0.0);
    for (std::size_t j = 0; j < n; ++j) a[(n - 1) * n + j] = 1.0;
    b[n - 1] = 1.0;

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
        if (std::abs(a[piv * n + col]) < 1e-14) return false;
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a[piv * n + j], a[col * n + j]);
            std::swap(b[piv], b[col]);
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r * n + col] / a[col * n + col];
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) a[r * n + j] -= f * a[col * n + j];
            b[r] -= f * b[col];
        }
    }
    pi.resize(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        pi[i] = b[i] / a[i * n + i];
        if (pi[i] < 0.0 && pi[i] > -1e-12) pi[i] = 0.0;
        if (pi[i] < 0.0) return false;
        sum += pi[i];
    }
    for (double& v : pi) v /= sum;
    return true;
}

} // namespace detail

// pi with pi * P = pi, sum(pi) = 1. Direct linear solve for small chains,
// power iteration otherwise or when the solve degenerates.
inline StateBelief stationary_distribution(const HmmModel& m) {
    const std::size_t n = m.num_states();
    std::vector<double> pi;
    bool solved = false;
    if (n <= 8) solved = detail::stationary_linear_solve(m, pi);
    if (solved) {
        // residual check; fall back if the solve drifted
        double resid = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) acc += pi[i] * m.transition(i, j);
            resid = std::max(resid, std::abs(acc - pi[j]));
        }
        if (resid >= 1e-12) solved = false;
    }
    if (!solved) detail::power_iteration(m, pi);
    return StateBelief{std::move(pi)};
}

inline double marginal_zero_prob(const HmmModel& m) {
    const StateBelief pi = stationary_distribution(m);
    double p0 = 0.0;
    for (std::size_t s = 0; s < m.num_states(); ++s)
        p0 += pi.probs[s] * m.emission_zero(s);
    return p0;
}

struct HmmSample {
    std::vector<std::uint8_t> bits;
    std::vector<std::uint32_t> states;
};

// Initial state from the stationary distribution, then chain transitions;
// bit t emitted with P(0) = emission_zero[state t]. Bit-reproducible for a
// fixed seed. Draw order per step: emission first, then transition.
inline HmmSample sample(const HmmModel& m, std::size_t length, std::uint64_t seed) {
    HmmSample out;
    out.bits.reserve(length);
    out.states.reserve(length);
    if (length == 0) return out;

    const StateBelief pi = stationary_distribution(m);
    Rng rng(seed);
    const std::size_t n = m.num_states();

    auto draw_from = [&](const double* probs) {
        const double u = rng.next_double();
        double cum = 0.0;
        for (std::size_t s = 0; s + 1 < n; ++s) {
            cum += probs[s];
            if (u < cum) return static_cast<std::uint32_t>(s);
        }
        return static_cast<std::uint32_t>(n - 1);
    };

    std::uint32_t state = draw_from(pi.probs.data());
    for (std::size_t t = 0; t < length; ++t) {
        out.states.push_back(state);
        out.bits.push_back(rng.next_double() < m.emission_zero(state) ? 0 : 1);
        state = draw_from(&m.transition_matrix()[state * n]);
    }
    return out;
}

// In-place forward recursion step: P(S_t | e_1..e_{t-1}) -> P(S_{t+1} | e_1..e_t)
// after observing e_t = observed_bit. Emission likelihoods are clamped so a
// zero-probability observation degrades gracefully instead of failing.
inline void forward_update_inplace(const HmmModel& m, StateBelief& belief,
                                   int observed_bit) {
    const std::size_t n = m.num_states();
    std::array<double, 16> stack_post;
    std::vector<double> heap_post;
    double* post = stack_post.data();
    if (n > stack_post.size()) {
        heap_post.resize(n);
        post = heap_post.data();
    }
    double total = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        const double q = m.emission_zero(s);
        const double like = clamp_prob(observed_bit ? 1.0 - q : q);
        post[s] = belief.probs[s] * like;
        total += post[s];
    }
    double sum = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        double acc = 0.0;
        for (std::size_t s = 0; s < n; ++s)
            acc += post[s] * m.transition(s, t);
        belief.probs[t] = acc / total;
        sum += belief.probs[t];
    }
    for (double& v : belief.probs) v /= sum;
}

inline StateBelief forward_update(const HmmModel& m, const StateBelief& belief,
                                  int observed_bit) {
    StateBelief out = belief;
    forward_update_inplace(m, out, observed_bit);
    return out;
}

// Transition-only step, used when a column decision is unavailable and the
// emission is treated as unobserved.
inline void propagate_inplace(const HmmModel& m, StateBelief& belief) {
    const std::size_t n = m.num_states();
    std::array<double, 16> stack_cur;
    std::vector<double> heap_cur;
    double* cur = stack_cur.data();
    if (n > stack_cur.size()) {
        heap_cur.resize(n);
        cur = heap_cur.data();
    }
    for (std::size_t s = 0; s < n; ++s) cur[s] = belief.probs[s];
    for (std::size_t t = 0; t < n; ++t) {
        double acc = 0.0;
        for (std::size_t s = 0; s < n; ++s)
            acc += cur[s] * m.transition(s, t);
        belief.probs[t] = acc;
    }
}

inline StateBelief propagate(const HmmModel& m, const StateBelief& belief) {
    StateBelief out = belief;
    propagate_inplace(m, out);
    return out;
}

// Predictive probability that the next emitted bit is 1, unclamped.
inline double predict_prob_one(const HmmModel& m, const StateBelief& belief) {
    double p1 = 0.0;
    for (std::size_t s = 0; s < m.num_states(); ++s)
        p1 += belief.probs[s] * (1.0 - m.emission_zero(s));
    return p1;
}

// Soft estimate of the next bit given the row past (the forward-recursion
// output): log P(e = 1 | past) / P(e = 0 | past), clamped.
inline LlrValue predict_llr(const HmmModel& m, const StateBelief& belief) {
    return llr_from_prob1(predict_prob_one(m, belief));
}

// The benchmark models. Each satisfies P(e = 0) = 0.5 at stationarity.
inline HmmModel named_model(std::string_view name) {
    if (name == "M1") return from_two_state({0.01, 0.065, 0.95, 0.925});
    if (name == "M2") return from_two_state({0.97, 0.967, 0.93, 0.973});
    if (name == "M3") return from_two_state({0.99, 0.989, 0.945, 0.9895});
    throw InvalidParameterError("named_model: unknown model '" + std::string(name) + "'");
}

namespace detail {

inline double parse_double_token(std::string_view tok) {
    double v = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last)
        throw FormatError("model config: bad number '" + std::string(tok) + "'");
    return v;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::vector<double> parse_number_list(std::string_view value) {
    value = trim(value);
    if (value.size() >= 2 && value.front() == '[' && value.back() == ']')
        value = trim(value.substr(1, value.size() - 2));
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= value.size()) {
        std::size_t comma = value.find(',', start);
        std::string_view tok = trim(value.substr(
            start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (!tok.empty()) out.push_back(parse_double_token(tok));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

} // namespace detail

// Key-value model description:
//
//   states = 2
//   transition = [0.01, 0.99, 0.935, 0.065]     # row-major
//   emission_zero = [0.95, 0.075]
//
// or the two-state shorthand:
//
//   two_state = [0.01, 0.065, 0.95, 0.925]      # p00, p11, q0, q1
inline HmmModel parse_model_config(std::string_view text) {
    std::map<std::string, std::vector<double>, std::less<>> entries;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(
            pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        if (auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = detail::trim(line);
        if (!line.empty()) {
            const std::size_t eq = line.find('=');
            if (eq == std::string_view::npos)
                throw FormatError("model config: expected 'key = value' line");
            const std::string key(detail::trim(line.substr(0, eq)));
            if (key != "states" && key != "transition" && key != "emission_zero" &&
                key != "two_state")
                throw FormatError("model config: unknown key '" + key + "'");
            if (!entries.emplace(key, detail::parse_number_list(line.substr(eq + 1))).second)
                throw FormatError("model config: duplicate key '" + key + "'");
        }
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }

    if (auto it = entries.find("two_state"); it != entries.end()) {
        if (entries.size() != 1)
            throw FormatError("model config: two_state excludes the other keys");
        if (it->second.size() != 4)
            throw FormatError("model config: two_state needs [p00, p11, q0, q1]");
        return from_two_state({it->second[0], it->second[1], it->second[2], it->second[3]});
    }
    auto st = entries.find("states");
    auto tr = entries.find("transition");
    auto em = entries.find("emission_zero");
    if (st == entries.end() || tr == entries.end() || em == entries.end())
        throw FormatError("model config: need states, transition and emission_zero");
    if (st->second.size() != 1 || st->second[0] < 1.0 ||
        st->second[0] != std::floor(st->second[0]))
        throw FormatError("model config: states must be a positive integer");
    const auto n = static_cast<std::size_t>(st->second[0]);
    return HmmModel(n, tr->second, em->second);
}

inline HmmModel load_model_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open model config: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_model_config(ss.str());
}

} // namespace dfsw
