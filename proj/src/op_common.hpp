#pragma once

#include <initializer_list>

#include "segstereo/tensor.hpp"

namespace segstereo::detail {

inline Tape* common_tape(std::initializer_list<const Tensor*> ts) {
    Tape* tape = nullptr;
    for (const Tensor* t : ts) {
        if (!t->on_tape()) continue;
        if (tape && tape != t->tape)
            throw std::invalid_argument("op inputs live on different tapes");
        tape = t->tape;
    }
    return tape;
}

inline bool any_grad(std::initializer_list<const Tensor*> ts) {
    for (const Tensor* t : ts)
        if (t->requires_grad) return true;
    return false;
}

inline Tensor make_output(const Shape& shape, Tape* tape, bool requires_grad) {
    Tensor t;
    t.shape = shape;
    t.data = std::make_shared<std::vector<double>>(shape.numel());
    t.requires_grad = requires_grad;
    if (tape) tape->track(t);
    return t;
}

}  // namespace segstereo::detail
