#include "segstereo/tensor.hpp"

#include <cmath>
#include <sstream>

namespace segstereo {

Shape Shape::from(const std::vector<int>& extents) {
    if (extents.empty() || extents.size() > 4)
        throw std::invalid_argument("Shape: need 1..4 extents");
    for (int e : extents)
        if (e < 1) throw std::invalid_argument("Shape: extents must be >= 1");
    std::array<int, 4> s = {1, 1, 1, 1};
    size_t off = 4 - extents.size();
    for (size_t i = 0; i < extents.size(); ++i) s[off + i] = extents[i];
    return Shape(s[0], s[1], s[2], s[3]);
}

std::string Shape::str() const {
    std::ostringstream os;
    os << "[" << n << "," << c << "," << h << "," << w << "]";
    return os.str();
}

double Tensor::scalar() const {
    if (numel() != 1) throw std::invalid_argument("Tensor::scalar: numel != 1");
    return (*data)[0];
}

int Tape::track(Tensor& t) {
    if (t.node_id >= 0 && t.tape == this) return t.node_id;
    t.node_id = int(shapes_.size());
    t.tape = this;
    shapes_.push_back(t.shape);
    grads_.emplace_back();
    return t.node_id;
}

void Tape::record(std::vector<int> inputs, int output, std::function<void(Tape&)> backward) {
    for (int in : inputs)
        if (in >= output)
            throw std::logic_error("Tape::record: inputs must precede output");
    ops_.push_back({std::move(inputs), output, std::move(backward)});
}

std::vector<double>& Tape::grad(int node_id) {
    auto& g = grads_.at(node_id);
    if (g.empty()) g.assign(shapes_[node_id].numel(), 0.0);
    return g;
}

bool Tape::has_grad(int node_id) const {
    return node_id >= 0 && size_t(node_id) < grads_.size() && !grads_[node_id].empty();
}

void Tape::backward(const Tensor& output) {
    if (output.numel() != 1)
        throw std::invalid_argument("Tape::backward: output must be scalar");
    if (output.tape != this || output.node_id < 0)
        throw std::invalid_argument("Tape::backward: output not on this tape");
    grad(output.node_id).assign(1, 1.0);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
        if (!has_grad(it->output)) continue;  // no downstream use
        it->backward(*this);
    }
}

Tensor Tape::grad_tensor(const Tensor& t) const {
    if (t.tape != this || t.node_id < 0)
        throw std::invalid_argument("grad_tensor: tensor not on this tape");
    Tensor g;
    g.shape = t.shape;
    if (has_grad(t.node_id))
        g.data = std::make_shared<std::vector<double>>(grads_[t.node_id]);
    else
        g.data = std::make_shared<std::vector<double>>(t.numel(), 0.0);
    return g;
}

std::vector<double> Tape::grad_values(const Tensor& t) const {
    return *grad_tensor(t).data;
}

Tensor create(const Shape& shape, const Fill& fill, Tape* tape, bool requires_grad) {
    Tensor t;
    t.shape = shape;
    const int64_t n = shape.numel();
    switch (fill.kind) {
        case Fill::Kind::Zeros:
            t.data = std::make_shared<std::vector<double>>(n, 0.0);
            break;
        case Fill::Kind::Constant:
            t.data = std::make_shared<std::vector<double>>(n, fill.value);
            break;
        case Fill::Kind::Uniform: {
            t.data = std::make_shared<std::vector<double>>(n);
            std::mt19937_64 rng(fill.seed);
            std::uniform_real_distribution<double> dist(fill.lo, fill.hi);
            for (auto& v : *t.data) v = dist(rng);
            break;
        }
        case Fill::Kind::Values:
            if (int64_t(fill.values.size()) != n)
                throw std::invalid_argument("create: value count " +
                                            std::to_string(fill.values.size()) +
                                            " != numel " + std::to_string(n));
            t.data = std::make_shared<std::vector<double>>(fill.values);
            break;
    }
    t.requires_grad = requires_grad;
    if (tape) tape->track(t);
    return t;
}

Tensor constant_like(const Tensor& ref, std::vector<double> values) {
    if (int64_t(values.size()) != ref.numel())
        throw std::invalid_argument("constant_like: size mismatch");
    Tensor t;
    t.shape = ref.shape;
    t.data = std::make_shared<std::vector<double>>(std::move(values));
    return t;
}

namespace {

Tape* common_tape(std::initializer_list<const Tensor*> ts) {
    Tape* tape = nullptr;
    for (const Tensor* t : ts) {
        if (!t->on_tape()) continue;
        if (tape && tape != t->tape)
            throw std::invalid_argument("op inputs live on different tapes");
        tape = t->tape;
    }
    return tape;
}

bool any_grad(std::initializer_list<const Tensor*> ts) {
    for (const Tensor* t : ts)
        if (t->requires_grad) return true;
    return false;
}

Tensor make_output(const Shape& shape, Tape* tape, bool requires_grad) {
    Tensor t;
    t.shape = shape;
    t.data = std::make_shared<std::vector<double>>(shape.numel());
    t.requires_grad = requires_grad;
    if (tape) tape->track(t);
    return t;
}

// Elementwise binary with per-element grads captured as lambdas.
template <class Fwd, class BwdA, class BwdB>
Tensor ew_binary(const Tensor& a, const Tensor& b, Fwd fwd, BwdA dfda, BwdB dfdb) {
    if (a.shape != b.shape)
        throw std::invalid_argument("elementwise: shape mismatch " + a.shape.str() +
                                    " vs " + b.shape.str());
    Tape* tape = common_tape({&a, &b});
    Tensor out = make_output(a.shape, tape, any_grad({&a, &b}));
    const int64_t n = a.numel();
    const double* pa = a.ptr();
    const double* pb = b.ptr();
    double* po = out.ptr();
    for (int64_t i = 0; i < n; ++i) po[i] = fwd(pa[i], pb[i]);
    if (tape && out.requires_grad) {
        Tensor ac = a, bc = b;
        int oid = out.node_id;
        tape->record({a.node_id, b.node_id}, oid, [=](Tape& tp) {
            const auto& go = tp.grad(oid);
            const double* xa = ac.ptr();
            const double* xb = bc.ptr();
            if (ac.node_id >= 0 && ac.requires_grad) {
                auto& ga = tp.grad(ac.node_id);
                for (int64_t i = 0; i < n; ++i) ga[i] += go[i] * dfda(xa[i], xb[i]);
            }
            if (bc.node_id >= 0 && bc.requires_grad) {
                auto& gb = tp.grad(bc.node_id);
                for (int64_t i = 0; i < n; ++i) gb[i] += go[i] * dfdb(xa[i], xb[i]);
            }
        });
    }
    return out;
}

template <class Fwd, class Bwd>
Tensor ew_unary(const Tensor& a, Fwd fwd, Bwd dfdx) {
    Tape* tape = common_tape({&a});
    Tensor out = make_output(a.shape, tape, a.requires_grad);
    const int64_t n = a.numel();
    const double* pa = a.ptr();
    double* po = out.ptr();
    for (int64_t i = 0; i < n; ++i) po[i] = fwd(pa[i]);
    if (tape && out.requires_grad) {
        Tensor ac = a;
        int oid = out.node_id;
        tape->record({a.node_id}, oid, [=](Tape& tp) {
            const auto& go = tp.grad(oid);
            auto& ga = tp.grad(ac.node_id);
            const double* xa = ac.ptr();
            for (int64_t i = 0; i < n; ++i) ga[i] += go[i] * dfdx(xa[i]);
        });
    }
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return ew_binary(
        a, b, [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return ew_binary(
        a, b, [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return ew_binary(
        a, b, [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double c) {
    return ew_unary(a, [c](double x) { return c * x; }, [c](double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
    return ew_unary(a, [c](double x) { return x + c; }, [](double) { return 1.0; });
}

Tensor abs(const Tensor& a) {
    return ew_unary(
        a, [](double x) { return std::fabs(x); },
        [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor relu(const Tensor& a) {
    return ew_unary(
        a, [](double x) { return x > 0 ? x : 0.0; },
        [](double x) { return x > 0 ? 1.0 : 0.0; });
}

namespace {

Tensor reduce_impl(const Tensor& a, const Tensor* mask, bool mean) {
    if (a.numel() == 0) throw std::invalid_argument("reduce: empty tensor");
    if (mask && mask->shape != a.shape)
        throw std::invalid_argument("reduce: mask shape mismatch");
    Tape* tape = common_tape({&a});
    Tensor out = make_output(Shape{1, 1, 1, 1}, tape, a.requires_grad);
    const int64_t n = a.numel();
    const double* pa = a.ptr();
    const double* pm = mask ? mask->ptr() : nullptr;
    double acc = 0.0;  // fixed serial order: deterministic
    for (int64_t i = 0; i < n; ++i) acc += pm ? pm[i] * pa[i] : pa[i];
    const double denom = mean ? double(n) : 1.0;
    (*out.data)[0] = acc / denom;
    if (tape && out.requires_grad) {
        Tensor ac = a;
        // Mask is a stop-gradient constant; keep only its data alive.
        std::shared_ptr<std::vector<double>> mdata = mask ? mask->data : nullptr;
        int oid = out.node_id;
        tape->record({a.node_id}, oid, [=](Tape& tp) {
            const double g = tp.grad(oid)[0] / denom;
            auto& ga = tp.grad(ac.node_id);
            const double* m = mdata ? mdata->data() : nullptr;
            for (int64_t i = 0; i < n; ++i) ga[i] += g * (m ? m[i] : 1.0);
        });
    }
    return out;
}

}  // namespace

Tensor reduce_sum(const Tensor& a, const Tensor* mask) { return reduce_impl(a, mask, false); }
Tensor reduce_mean(const Tensor& a, const Tensor* mask) { return reduce_impl(a, mask, true); }

double grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f,
                  const Tensor& x, double h) {
    // Analytic gradient.
    std::vector<double> analytic;
    {
        Tape tape;
        Tensor xi = create(x.shape, Fill::from_values(*x.data), &tape, true);
        Tensor y = f(tape, xi);
        tape.backward(y);
        analytic = *tape.grad_tensor(xi).data;
    }
    // Central differences.
    double max_err = 0.0;
    std::vector<double> vals = *x.data;
    for (size_t i = 0; i < vals.size(); ++i) {
        const double orig = vals[i];
        double fp, fm;
        {
            Tape tape;
            vals[i] = orig + h;
            fp = f(tape, create(x.shape, Fill::from_values(vals), &tape, true)).scalar();
        }
        {
            Tape tape;
            vals[i] = orig - h;
            fm = f(tape, create(x.shape, Fill::from_values(vals), &tape, true)).scalar();
        }
        vals[i] = orig;
        const double numeric = (fp - fm) / (2 * h);
        const double a = analytic[i];
        const double err = std::fabs(a - numeric) /
                           std::max({1.0, std::fabs(a), std::fabs(numeric)});
        max_err = std::max(max_err, err);
    }
    return max_err;
}

void check_finite(const Tensor& t, const std::string& what) {
    for (double v : *t.data)
        if (!std::isfinite(v))
            throw std::runtime_error("non-finite value in " + what);
}

}  // namespace segstereo
