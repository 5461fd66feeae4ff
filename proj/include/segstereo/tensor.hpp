#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace segstereo {

// Dense 4-D extents in N-C-H-W order. Lower-rank data uses leading size-1 axes.
struct Shape {
    int n = 1, c = 1, h = 1, w = 1;

    Shape() = default;
    Shape(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {}
    // Accepts 1..4 extents, left-padding with 1s.
    Shape(std::initializer_list<int> extents)
        : Shape(from(std::vector<int>(extents))) {}
    static Shape from(const std::vector<int>& extents);

    int64_t numel() const { return int64_t(n) * c * h * w; }
    bool operator==(const Shape& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    bool operator!=(const Shape& o) const { return !(*this == o); }
    std::string str() const;
};

class Tape;

// Dense row-major tensor. Data is shared; tensors are immutable once built
// by an op. node_id identifies the tensor on its tape (-1 for constants).
struct Tensor {
    Shape shape;
    std::shared_ptr<std::vector<double>> data;
    bool requires_grad = false;
    int node_id = -1;
    Tape* tape = nullptr;

    Tensor() = default;

    int64_t numel() const { return shape.numel(); }
    double* ptr() { return data->data(); }
    const double* ptr() const { return data->data(); }

    int64_t index(int in, int ic, int iy, int ix) const {
        return ((int64_t(in) * shape.c + ic) * shape.h + iy) * shape.w + ix;
    }
    double at(int in, int ic, int iy, int ix) const {
        return (*data)[index(in, ic, iy, ix)];
    }
    double scalar() const;
    bool on_tape() const { return tape != nullptr && node_id >= 0; }
};

// Initialization recipe for create().
struct Fill {
    enum class Kind { Zeros, Constant, Uniform, Values } kind = Kind::Zeros;
    double value = 0.0;
    double lo = 0.0, hi = 1.0;
    uint64_t seed = 0;
    std::vector<double> values;

    static Fill zeros() { return {}; }
    static Fill constant(double v) {
        Fill f;
        f.kind = Kind::Constant;
        f.value = v;
        return f;
    }
    static Fill uniform(double lo, double hi, uint64_t seed) {
        Fill f;
        f.kind = Kind::Uniform;
        f.lo = lo;
        f.hi = hi;
        f.seed = seed;
        return f;
    }
    static Fill from_values(std::vector<double> v) {
        Fill f;
        f.kind = Kind::Values;
        f.values = std::move(v);
        return f;
    }
};

// Recorded-op tape for reverse-mode differentiation. Nodes are replayed in
// exact reverse recording order; a node's inputs always precede it.
class Tape {
public:
    // Registers a tensor on this tape, assigning its node id.
    int track(Tensor& t);

    // Records one op: backward reads grad(output) and accumulates into
    // grad(input) buffers.
    void record(std::vector<int> inputs, int output, std::function<void(Tape&)> backward);

    // Seeds grad(output)=1 and replays all nodes in reverse. Output must be
    // a scalar living on this tape.
    void backward(const Tensor& output);

    // Gradient buffer for a tracked tensor; allocated zero on first access.
    std::vector<double>& grad(int node_id);
    bool has_grad(int node_id) const;

    // Gradient of a tracked tensor as a constant tensor (zeros if untouched).
    Tensor grad_tensor(const Tensor& t) const;
    std::vector<double> grad_values(const Tensor& t) const;

    size_t num_nodes() const { return ops_.size(); }

private:
    struct Op {
        std::vector<int> inputs;
        int output;
        std::function<void(Tape&)> backward;
    };
    std::vector<Op> ops_;
    std::vector<Shape> shapes_;                 // per node id
    std::vector<std::vector<double>> grads_;    // per node id, lazily sized
};

// --- construction ---

Tensor create(const Shape& shape, const Fill& fill,
              Tape* tape = nullptr, bool requires_grad = false);

// Wraps existing values as a constant (not differentiable, not tracked).
Tensor constant_like(const Tensor& ref, std::vector<double> values);

// --- elementwise ops (identical shapes; no broadcasting beyond scalars) ---

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor abs(const Tensor& a);     // subgradient 0 at 0
Tensor relu(const Tensor& a);    // max(x,0), subgradient 0 at 0

// --- reductions (scalar output) ---

// Optional mask of {0,1} (same shape) is a stop-gradient constant.
// mean divides by the TOTAL element count, masked or not.
Tensor reduce_sum(const Tensor& a, const Tensor* mask = nullptr);
Tensor reduce_mean(const Tensor& a, const Tensor* mask = nullptr);

// --- gradient checking ---

// Max over elements of |analytic - numeric| / max(1, |analytic|, |numeric|),
// central differences with step h. f must be scalar-valued.
double grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f,
                  const Tensor& x, double h = 1e-5);

void check_finite(const Tensor& t, const std::string& what);

}  // namespace segstereo
