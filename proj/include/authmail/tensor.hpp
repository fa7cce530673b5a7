#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace authmail::nn {

/// Dense row-major array with an optional gradient buffer of the same shape.
/// No autograd graph lives here; layer functions pair forwards with explicit
/// backwards and accumulate into `g`.
template <typename R>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<R> v;  // values
    std::vector<R> g;  // gradient, empty unless trainable

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s, bool with_grad = false) : shape(std::move(s)) {
        v.assign(numel(shape), R(0));
        if (with_grad) g.assign(v.size(), R(0));
    }

    static std::size_t numel(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return s.empty() ? 0 : n;
    }

    std::size_t size() const { return v.size(); }
    bool trainable() const { return !g.empty(); }

    void zero_grad() {
        if (!g.empty()) std::fill(g.begin(), g.end(), R(0));
    }

    std::size_t dim(std::size_t i) const { return shape.at(i); }
};

inline std::string shape_string(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += 'x';
        out += std::to_string(s[i]);
    }
    return out + "]";
}

template <typename R>
void require_shape(const Tensor<R>& t, const std::vector<std::size_t>& want,
                   const char* what) {
    if (t.shape != want)
        throw std::invalid_argument(std::string(what) + ": expected " + shape_string(want) +
                                    ", got " + shape_string(t.shape));
}

template <typename R>
void require_rank(const Tensor<R>& t, std::size_t rank, const char* what) {
    if (t.shape.size() != rank)
        throw std::invalid_argument(std::string(what) + ": expected rank " +
                                    std::to_string(rank) + ", got " + shape_string(t.shape));
}

}  // namespace authmail::nn
