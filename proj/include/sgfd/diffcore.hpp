#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "sgfd/rng.hpp"

namespace sgfd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { Identity, Relu };

// ---------------------------------------------------------------------------
// Dense layer: y = act(x W^T + b), batches are row-major (one sample per row).
// Owns its parameters and their gradient slots.
// ---------------------------------------------------------------------------
struct DenseLayer {
    Matrix weight;       // out x in
    Vector bias;         // out
    Matrix grad_weight;  // same shape as weight
    Vector grad_bias;    // same shape as bias
    Activation activation = Activation::Identity;

    DenseLayer() = default;
    DenseLayer(Eigen::Index out, Eigen::Index in, Activation act);

    Eigen::Index in_dim() const { return weight.cols(); }
    Eigen::Index out_dim() const { return weight.rows(); }

    // Xavier-uniform init, limit sqrt(6 / (fan_in + fan_out)).
    void init_xavier(Rng& rng);
    void zero_grad();
};

// Cache of one forward pass, consumed by the matching backward pass.
struct AffineCache {
    Matrix input;   // n x in
    Matrix preact;  // n x out, before activation
};

// Forward pass over a batch (n x in) -> (n x out). Throws DimensionError on
// width mismatch naming expected/actual.
Matrix affine_forward(const DenseLayer& layer, const Matrix& x);

// Forward pass that also fills `cache` for affine_backward.
Matrix affine_forward_cached(const DenseLayer& layer, const Matrix& x, AffineCache& cache);

// Accumulates grad_weight/grad_bias on `layer` and returns d(loss)/d(input).
Matrix affine_backward(DenseLayer& layer, const AffineCache& cache, const Matrix& grad_out);

// ---------------------------------------------------------------------------
// Temperature softmax, p_i = exp(z_i / tau) / sum_j exp(z_j / tau),
// computed with max-subtraction. tau <= 0 -> DomainError.
// ---------------------------------------------------------------------------
Vector temp_softmax(const Vector& logits, double tau);

// Row-wise variant over a batch of logits.
Matrix temp_softmax_rows(const Matrix& logits, double tau);

// Given p = temp_softmax(z, tau) and dL/dp, returns dL/dz.
Matrix temp_softmax_backward(const Matrix& probs, const Matrix& grad_probs, double tau);

// ---------------------------------------------------------------------------
// ParamStore: named views over parameter tensors and their gradient slots.
// Modules own their Eigen matrices; the store holds (name, value*, grad*).
// ---------------------------------------------------------------------------
struct ParamEntry {
    std::string name;
    double* value = nullptr;
    double* grad = nullptr;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;

    Eigen::Index size() const { return rows * cols; }
    // Eigen default storage is column-major; serializers emit row-major.
    double value_at(Eigen::Index r, Eigen::Index c) const { return value[c * rows + r]; }
    void set_value_at(Eigen::Index r, Eigen::Index c, double v) { value[c * rows + r] = v; }
};

class ParamStore {
public:
    void add(const std::string& name, Matrix& value, Matrix& grad);
    void add(const std::string& name, Vector& value, Vector& grad);
    void add_layer(const std::string& prefix, DenseLayer& layer);

    void zero_grads();
    Eigen::Index total_size() const;

    const std::vector<ParamEntry>& entries() const { return entries_; }
    std::vector<ParamEntry>& entries() { return entries_; }
    const ParamEntry* find(const std::string& name) const;

    // Flat snapshot/restore of parameter values (not grads), used by early
    // stopping and by the divergence guard.
    std::vector<double> snapshot_values() const;
    void restore_values(const std::vector<double>& snap);

    bool values_finite() const;

private:
    std::vector<ParamEntry> entries_;
    void add_raw(const std::string& name, double* v, double* g, Eigen::Index rows, Eigen::Index cols);
};

// ---------------------------------------------------------------------------
// Gradient checking against central finite differences.
//
// `f(with_grad)` evaluates the scalar loss at the current parameter values;
// when with_grad is true it must also zero and then fill every gradient slot.
// Relative error uses a unit floor: |a - n| / max(1, |a|, |n|).
// ---------------------------------------------------------------------------
struct GradCheckFailure {
    std::string name;
    Eigen::Index index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    Eigen::Index checked = 0;
    std::vector<GradCheckFailure> failures;  // entries with rel_error > tol

    bool ok() const { return failures.empty(); }
};

GradCheckReport grad_check(const std::function<double(bool)>& f, ParamStore& params,
                           double step, double tol);

// ---------------------------------------------------------------------------
// Adam: first-order stochastic updates with per-parameter adaptive step sizes.
// ---------------------------------------------------------------------------
class AdamOptimizer {
public:
    explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8);

    // (Re)sizes moment buffers for the given store.
    void attach(const ParamStore& params);
    void step(ParamStore& params);
    void reset();

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace sgfd
