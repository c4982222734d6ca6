#include "sgfd/losses.hpp"

#include <cmath>
#include <sstream>

#include "sgfd/errors.hpp"

namespace sgfd {

namespace {
constexpr double kLogClamp = 1e-12;

void check_labels(const Matrix& probs, const std::vector<int>& labels) {
    if (Eigen::Index(labels.size()) != probs.rows())
        throw DimensionError("cross_entropy: label count does not match batch size");
    for (int y : labels)
        if (y < 0 || y >= probs.cols())
            throw IndexError("cross_entropy: label " + std::to_string(y) + " out of range [0, " +
                             std::to_string(probs.cols()) + ")");
}

double mean_sq_dist(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        std::ostringstream msg;
        msg << what << ": shape mismatch (" << a.rows() << "x" << a.cols() << " vs " << b.rows()
            << "x" << b.cols() << ")";
        throw DimensionError(msg.str());
    }
    if (a.rows() == 0) return 0.0;
    return (a - b).rowwise().squaredNorm().mean();
}

}  // namespace

double cross_entropy(const Matrix& probs, const std::vector<int>& labels) {
    check_labels(probs, labels);
    if (probs.rows() == 0) return 0.0;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i)
        sum += -std::log(std::max(probs(i, labels[std::size_t(i)]), kLogClamp));
    return sum / double(probs.rows());
}

double teacher_ce(const Matrix& p_visual, const Matrix& p_textual, const std::vector<int>& labels) {
    if (p_visual.rows() != p_textual.rows())
        throw DimensionError("teacher_ce: modality batch sizes differ");
    return 0.5 * (cross_entropy(p_visual, labels) + cross_entropy(p_textual, labels));
}

double fused_ce(const Matrix& p_fused, const std::vector<int>& labels) {
    return cross_entropy(p_fused, labels);
}

double ld_loss(const Matrix& p_visual_teacher, const Matrix& p_visual_student,
               const Matrix& p_textual_teacher, const Matrix& p_textual_student) {
    return mean_sq_dist(p_visual_teacher, p_visual_student, "ld_loss") +
           mean_sq_dist(p_textual_teacher, p_textual_student, "ld_loss");
}

double fd_loss(const Matrix& f_visual_teacher, const Matrix& f_visual_student,
               const Matrix& f_textual_teacher, const Matrix& f_textual_student) {
    return mean_sq_dist(f_visual_teacher, f_visual_student, "fd_loss") +
           mean_sq_dist(f_textual_teacher, f_textual_student, "fd_loss");
}

LossReport total_loss(double rec, double tce, double fce, double ld, double fd,
                      const LossWeights& weights) {
    auto require_finite = [](double v, const char* name) {
        if (!std::isfinite(v))
            throw NumericError(std::string("total_loss: non-finite term ") + name);
    };
    require_finite(rec, "rec");
    require_finite(tce, "tce");
    require_finite(fce, "fce");
    require_finite(ld, "ld");
    require_finite(fd, "fd");

    LossReport report;
    report.rec = rec;
    report.tce = tce;
    report.fce = fce;
    report.ld = ld;
    report.fd = fd;
    report.weights = weights;
    report.total = rec + weights.lambda1 * (ld + fd) + weights.lambda2 * (tce + fce);
    return report;
}

Matrix ce_softmax_grad_logits(const Matrix& probs, const std::vector<int>& labels, double tau) {
    check_labels(probs, labels);
    if (!(tau > 0.0)) throw DomainError("ce_softmax_grad_logits: temperature must be > 0");
    Matrix grad = probs;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) grad(i, labels[std::size_t(i)]) -= 1.0;
    return grad / (double(probs.rows()) * tau);
}

Matrix sq_dist_grad(const Matrix& x, const Matrix& target) {
    if (x.rows() != target.rows() || x.cols() != target.cols())
        throw DimensionError("sq_dist_grad: shape mismatch");
    if (x.rows() == 0) return x;
    return 2.0 * (x - target) / double(x.rows());
}

}  // namespace sgfd
