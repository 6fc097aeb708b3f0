#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace midt {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dense row-major tensor of doubles. Rank 1..3 in practice (vectors,
// matrices, conv kernel stacks); scalars are shape {1}.
struct Tensor {
    std::vector<size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<size_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (size_from_shape(shape) != data.size())
            throw Error("Tensor: shape/data length mismatch");
    }

    static size_t size_from_shape(const std::vector<size_t>& s) {
        size_t n = 1;
        for (size_t d : s) {
            if (d < 1) throw Error("Tensor: dimension must be >= 1");
            n *= d;
        }
        return n;
    }

    static Tensor zeros(std::vector<size_t> s) {
        size_t n = size_from_shape(s);
        return Tensor(std::move(s), std::vector<double>(n, 0.0));
    }
    static Tensor full(std::vector<size_t> s, double v) {
        size_t n = size_from_shape(s);
        return Tensor(std::move(s), std::vector<double>(n, v));
    }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    size_t size() const { return data.size(); }
    size_t rank() const { return shape.size(); }
    size_t rows() const { return shape.at(0); }
    size_t cols() const { return shape.size() >= 2 ? shape[1] : 1; }

    double& at(size_t i, size_t j) { return data[i * cols() + j]; }
    double at(size_t i, size_t j) const { return data[i * cols() + j]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape.size(); ++i)
            s += (i ? "x" : "") + std::to_string(shape[i]);
        return s + "]";
    }
};

}  // namespace midt
