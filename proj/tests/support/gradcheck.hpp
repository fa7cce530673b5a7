#pragma once

// Central-difference gradient checking, shared by the unit tests and the
// acceptance gate. Everything runs in double; a check passes when the
// relative error between analytic and numeric derivatives stays under the
// tolerance at every sampled coordinate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "authmail/rng.hpp"
#include "authmail/tensor.hpp"

namespace testsupport {

struct GradStats {
    double max_rel = 0.0;
    int checked = 0;
};

inline double rel_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) /
           std::max({std::abs(analytic), std::abs(numeric), 1e-4});
}

/// Compares t.g (already filled by a backward pass) against central
/// differences of `loss` at `samples` random coordinates of t.v. The loss
/// callable must recompute the full forward pass from current tensor values.
template <typename Loss>
void check_param(authmail::nn::Tensor<double>& t, const Loss& loss, std::mt19937_64& rng,
                 GradStats& st, int samples = 6, double h = 1e-4) {
    for (int s = 0; s < samples; ++s) {
        const std::size_t i = authmail::next_index(rng, t.size());
        const double keep = t.v[i];
        t.v[i] = keep + h;
        const double lp = loss();
        t.v[i] = keep - h;
        const double lm = loss();
        t.v[i] = keep;
        const double numeric = (lp - lm) / (2.0 * h);
        st.max_rel = std::max(st.max_rel, rel_error(t.g[i], numeric));
        ++st.checked;
    }
}

inline void fill_uniform(authmail::nn::Tensor<double>& t, std::mt19937_64& rng, double lo,
                         double hi) {
    for (auto& x : t.v) x = authmail::next_uniform(rng, lo, hi);
}

}  // namespace testsupport
