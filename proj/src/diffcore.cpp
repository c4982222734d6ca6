#include "sgfd/diffcore.hpp"

#include <cmath>
#include <sstream>

#include "sgfd/errors.hpp"

namespace sgfd {

DenseLayer::DenseLayer(Eigen::Index out, Eigen::Index in, Activation act)
    : weight(Matrix::Zero(out, in)),
      bias(Vector::Zero(out)),
      grad_weight(Matrix::Zero(out, in)),
      grad_bias(Vector::Zero(out)),
      activation(act) {}

void DenseLayer::init_xavier(Rng& rng) {
    const double limit = std::sqrt(6.0 / double(weight.rows() + weight.cols()));
    for (Eigen::Index j = 0; j < weight.cols(); ++j)
        for (Eigen::Index i = 0; i < weight.rows(); ++i)
            weight(i, j) = rng.uniform(-limit, limit);
    bias.setZero();
}

void DenseLayer::zero_grad() {
    grad_weight.setZero();
    grad_bias.setZero();
}

namespace {

void check_width(const DenseLayer& layer, const Matrix& x) {
    if (x.cols() != layer.in_dim()) {
        std::ostringstream msg;
        msg << "affine_forward: input width mismatch, expected " << layer.in_dim()
            << ", got " << x.cols();
        throw DimensionError(msg.str());
    }
}

}  // namespace

Matrix affine_forward(const DenseLayer& layer, const Matrix& x) {
    check_width(layer, x);
    Matrix z = (x * layer.weight.transpose()).rowwise() + layer.bias.transpose();
    if (layer.activation == Activation::Relu) z = z.cwiseMax(0.0);
    return z;
}

Matrix affine_forward_cached(const DenseLayer& layer, const Matrix& x, AffineCache& cache) {
    check_width(layer, x);
    cache.input = x;
    cache.preact = (x * layer.weight.transpose()).rowwise() + layer.bias.transpose();
    if (layer.activation == Activation::Relu) return cache.preact.cwiseMax(0.0);
    return cache.preact;
}

Matrix affine_backward(DenseLayer& layer, const AffineCache& cache, const Matrix& grad_out) {
    if (grad_out.cols() != layer.out_dim() || grad_out.rows() != cache.input.rows())
        throw DimensionError("affine_backward: gradient shape does not match cached forward pass");
    Matrix dz = grad_out;
    if (layer.activation == Activation::Relu)
        dz = dz.cwiseProduct((cache.preact.array() > 0.0).cast<double>().matrix());
    layer.grad_weight.noalias() += dz.transpose() * cache.input;
    layer.grad_bias.noalias() += dz.colwise().sum().transpose();
    return dz * layer.weight;
}

Vector temp_softmax(const Vector& logits, double tau) {
    if (!(tau > 0.0)) throw DomainError("temp_softmax: temperature must be > 0");
    if (!logits.allFinite()) throw DomainError("temp_softmax: non-finite logits");
    Vector scaled = logits / tau;
    const double m = scaled.maxCoeff();
    Vector e = (scaled.array() - m).exp();
    return e / e.sum();
}

Matrix temp_softmax_rows(const Matrix& logits, double tau) {
    if (!(tau > 0.0)) throw DomainError("temp_softmax: temperature must be > 0");
    if (!logits.allFinite()) throw DomainError("temp_softmax: non-finite logits");
    Matrix p(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::RowVectorXd scaled = logits.row(i) / tau;
        const double m = scaled.maxCoeff();
        Eigen::RowVectorXd e = (scaled.array() - m).exp();
        p.row(i) = e / e.sum();
    }
    return p;
}

Matrix temp_softmax_backward(const Matrix& probs, const Matrix& grad_probs, double tau) {
    if (probs.rows() != grad_probs.rows() || probs.cols() != grad_probs.cols())
        throw DimensionError("temp_softmax_backward: shape mismatch");
    // dz_i = p_i * (dp_i - sum_j dp_j p_j) / tau
    Matrix dz(probs.rows(), probs.cols());
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        const double dot = probs.row(i).dot(grad_probs.row(i));
        dz.row(i) = (probs.row(i).array() * (grad_probs.row(i).array() - dot)).matrix() / tau;
    }
    return dz;
}

void ParamStore::add_raw(const std::string& name, double* v, double* g,
                         Eigen::Index rows, Eigen::Index cols) {
    if (find(name) != nullptr)
        throw ConfigError("ParamStore: duplicate parameter name '" + name + "'");
    entries_.push_back(ParamEntry{name, v, g, rows, cols});
}

void ParamStore::add(const std::string& name, Matrix& value, Matrix& grad) {
    if (value.rows() != grad.rows() || value.cols() != grad.cols())
        throw DimensionError("ParamStore: gradient shape mismatch for '" + name + "'");
    add_raw(name, value.data(), grad.data(), value.rows(), value.cols());
}

void ParamStore::add(const std::string& name, Vector& value, Vector& grad) {
    if (value.size() != grad.size())
        throw DimensionError("ParamStore: gradient shape mismatch for '" + name + "'");
    add_raw(name, value.data(), grad.data(), value.size(), 1);
}

void ParamStore::add_layer(const std::string& prefix, DenseLayer& layer) {
    add(prefix + ".weight", layer.weight, layer.grad_weight);
    add(prefix + ".bias", layer.bias, layer.grad_bias);
}

void ParamStore::zero_grads() {
    for (auto& e : entries_)
        for (Eigen::Index i = 0; i < e.size(); ++i) e.grad[i] = 0.0;
}

Eigen::Index ParamStore::total_size() const {
    Eigen::Index n = 0;
    for (const auto& e : entries_) n += e.size();
    return n;
}

const ParamEntry* ParamStore::find(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return &e;
    return nullptr;
}

std::vector<double> ParamStore::snapshot_values() const {
    std::vector<double> snap;
    snap.reserve(std::size_t(total_size()));
    for (const auto& e : entries_)
        snap.insert(snap.end(), e.value, e.value + e.size());
    return snap;
}

void ParamStore::restore_values(const std::vector<double>& snap) {
    if (Eigen::Index(snap.size()) != total_size())
        throw DimensionError("ParamStore::restore_values: snapshot size mismatch");
    std::size_t off = 0;
    for (auto& e : entries_) {
        std::copy(snap.begin() + long(off), snap.begin() + long(off) + e.size(), e.value);
        off += std::size_t(e.size());
    }
}

bool ParamStore::values_finite() const {
    for (const auto& e : entries_)
        for (Eigen::Index i = 0; i < e.size(); ++i)
            if (!std::isfinite(e.value[i])) return false;
    return true;
}

GradCheckReport grad_check(const std::function<double(bool)>& f, ParamStore& params,
                           double step, double tol) {
    GradCheckReport report;
    const double base = f(true);  // fills analytic gradients
    if (!std::isfinite(base)) throw NumericError("grad_check: non-finite loss");

    // Copy analytic grads before FD evaluations overwrite anything.
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.entries().size());
    for (const auto& e : params.entries())
        analytic.emplace_back(e.grad, e.grad + e.size());

    std::size_t k = 0;
    for (auto& e : params.entries()) {
        for (Eigen::Index i = 0; i < e.size(); ++i) {
            const double saved = e.value[i];
            e.value[i] = saved + step;
            const double fp = f(false);
            e.value[i] = saved - step;
            const double fm = f(false);
            e.value[i] = saved;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw NumericError("grad_check: non-finite loss at perturbed point");
            const double numeric = (fp - fm) / (2.0 * step);
            const double a = analytic[k][std::size_t(i)];
            const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
            const double rel = std::abs(a - numeric) / denom;
            report.max_rel_error = std::max(report.max_rel_error, rel);
            ++report.checked;
            if (rel > tol)
                report.failures.push_back({e.name, i, a, numeric, rel});
        }
        ++k;
    }
    return report;
}

AdamOptimizer::AdamOptimizer(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::attach(const ParamStore& params) {
    m_.clear();
    v_.clear();
    t_ = 0;
    for (const auto& e : params.entries()) {
        m_.emplace_back(std::size_t(e.size()), 0.0);
        v_.emplace_back(std::size_t(e.size()), 0.0);
    }
}

void AdamOptimizer::reset() {
    for (auto& m : m_) std::fill(m.begin(), m.end(), 0.0);
    for (auto& v : v_) std::fill(v.begin(), v.end(), 0.0);
    t_ = 0;
}

void AdamOptimizer::step(ParamStore& params) {
    if (m_.size() != params.entries().size())
        throw ConfigError("AdamOptimizer: step() before attach()");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, double(t_));
    const double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (std::size_t k = 0; k < params.entries().size(); ++k) {
        auto& e = params.entries()[k];
        auto& m = m_[k];
        auto& v = v_[k];
        for (Eigen::Index i = 0; i < e.size(); ++i) {
            const double g = e.grad[i];
            m[std::size_t(i)] = beta1_ * m[std::size_t(i)] + (1.0 - beta1_) * g;
            v[std::size_t(i)] = beta2_ * v[std::size_t(i)] + (1.0 - beta2_) * g * g;
            const double mhat = m[std::size_t(i)] / bc1;
            const double vhat = v[std::size_t(i)] / bc2;
            e.value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace sgfd
