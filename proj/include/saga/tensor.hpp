#pragma once

#include <algorithm>
#include <initializer_list>
#include <vector>

#include "saga/common.hpp"
#include "saga/prng.hpp"

namespace saga {

// Dense row-major array. Plain value type; autograd lives in Graph, which
// binds leaf Tensors and accumulates into `grad` when requires_grad is set.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;
    bool requires_grad = false;
    std::vector<T> grad;  // empty, or data.size() once allocated

    Tensor() = default;
    explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)), data(shape_numel(shape), fill) {}

    static Tensor zeros(Shape s) { return Tensor(std::move(s)); }

    static Tensor from(Shape s, std::initializer_list<T> values) {
        Tensor t(std::move(s));
        if (values.size() != t.data.size()) {
            throw shape_error("initializer length " + std::to_string(values.size()) +
                              " does not match shape " + shape_str(t.shape));
        }
        std::copy(values.begin(), values.end(), t.data.begin());
        return t;
    }

    static Tensor uniform(Shape s, Prng& rng, double lo, double hi) {
        Tensor t(std::move(s));
        for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
        return t;
    }

    size_t numel() const { return data.size(); }
    size_t rank() const { return shape.size(); }
    bool is_scalar() const { return data.size() == 1; }

    T scalar() const {
        if (!is_scalar()) throw shape_error("expected scalar, got shape " + shape_str(shape));
        return data[0];
    }

    T& at(std::initializer_list<size_t> idx) {
        return data[flat_index(idx)];
    }
    const T& at(std::initializer_list<size_t> idx) const {
        return data[flat_index(idx)];
    }

    void alloc_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }
    void zero_grad() { grad.assign(grad.size(), T(0)); }

   private:
    size_t flat_index(std::initializer_list<size_t> idx) const {
        size_t flat = 0;
        size_t axis = 0;
        for (size_t i : idx) {
            flat = flat * shape[axis] + i;
            axis++;
        }
        return flat;
    }
};

}  // namespace saga
