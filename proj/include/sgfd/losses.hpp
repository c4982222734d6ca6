#pragma once

#include <vector>

#include "sgfd/diffcore.hpp"

namespace sgfd {

struct LossWeights {
    double lambda1 = 1.0;  // knowledge-distillation weight
    double lambda2 = 1.0;  // cross-entropy weight
};

// Per-step objective breakdown. Invariant:
//   total = rec + lambda1 * (ld + fd) + lambda2 * (tce + fce)
struct LossReport {
    double tce = 0.0;
    double fce = 0.0;
    double ld = 0.0;
    double fd = 0.0;
    double rec = 0.0;
    double total = 0.0;
    LossWeights weights;
};

// Mean over the batch of -log P[row, label], with the probability clamped at
// 1e-12 inside the log. Labels must lie in [0, C).
double cross_entropy(const Matrix& probs, const std::vector<int>& labels);

// (CE(P_visual, y) + CE(P_textual, y)) / 2
double teacher_ce(const Matrix& p_visual, const Matrix& p_textual, const std::vector<int>& labels);

// CE(P_fused, y)
double fused_ce(const Matrix& p_fused, const std::vector<int>& labels);

// Mean over rows of ||P_m^t - P_m^s||^2 + ||P_e^t - P_e^s||^2. Teacher
// probabilities are constants; no gradient flows into the teacher here.
double ld_loss(const Matrix& p_visual_teacher, const Matrix& p_visual_student,
               const Matrix& p_textual_teacher, const Matrix& p_textual_student);

// Mean over rows of ||f_m^t - f_m^s||^2 + ||f_e^t - f_e^s||^2.
double fd_loss(const Matrix& f_visual_teacher, const Matrix& f_visual_student,
               const Matrix& f_textual_teacher, const Matrix& f_textual_student);

// Composes the final objective. Throws NumericError naming the first
// non-finite term.
LossReport total_loss(double rec, double tce, double fce, double ld, double fd,
                      const LossWeights& weights);

// --- gradient companions (used by the trainers) ----------------------------

// d(mean -log P[row,y]) / d logits for probs = temp_softmax(logits, tau):
// (P - onehot) / (batch * tau).
Matrix ce_softmax_grad_logits(const Matrix& probs, const std::vector<int>& labels, double tau);

// d(mean ||x - target||^2) / dx = 2 (x - target) / batch; `target` is constant.
Matrix sq_dist_grad(const Matrix& x, const Matrix& target);

}  // namespace sgfd
