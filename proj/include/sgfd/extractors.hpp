#pragma once

#include <vector>

#include "sgfd/corpus.hpp"
#include "sgfd/diffcore.hpp"

namespace sgfd {

enum class ExtractorKind { TeacherDeep, StudentShallow };

// Layer plan for a per-modality extractor. Teacher depth follows
// k = ceil(log_delta(D / d)) with a floor of 1; students are single-layer.
struct ExtractorSpec {
    Modality modality = Modality::Visual;
    int input_dim = 0;
    int output_dim = 0;
    int delta = 4;
    ExtractorKind kind = ExtractorKind::TeacherDeep;

    int depth() const { return int(widths.size()) - 1; }
    std::vector<int> widths;  // input_dim, hidden..., output_dim
};

struct DepthPlan {
    int depth = 0;
    std::vector<int> widths;  // length depth + 1, from D down to d
};

// k = ceil(log_delta(D / d)), floor 1; widths D, D/delta, D/delta^2, ..., d,
// each rounded, strictly decreasing, last forced to d.
DepthPlan plan_depth(int input_dim, int output_dim, int delta);

ExtractorSpec make_teacher_spec(Modality modality, int input_dim, int output_dim, int delta);
ExtractorSpec make_student_spec(Modality modality, int input_dim, int output_dim);

// Parameter stack realizing an ExtractorSpec. Hidden layers use ReLU, the
// final layer identity so features are unconstrained in sign.
struct Extractor {
    ExtractorSpec spec;
    std::vector<DenseLayer> layers;

    Extractor() = default;
    explicit Extractor(const ExtractorSpec& spec);

    void init(Rng& rng);
    void zero_grad();

    // Caches of the last forward_cached pass, one per layer.
    std::vector<AffineCache> caches;

    Matrix forward(const Matrix& generic) const;
    Matrix forward_cached(const Matrix& generic);
    // Accumulates layer grads, returns d(loss)/d(generic input).
    Matrix backward(const Matrix& grad_out);
};

// Deterministic forward through a teacher-deep stack (DimensionError on
// width mismatch, ConfigError on kind mismatch).
Matrix teacher_extract(const Extractor& teacher, const Matrix& generic_rows);

// Single affine step of the student. The student's output width must equal
// the paired teacher's (ConfigError otherwise); checked by callers that hold
// both via check_paired_dims.
Matrix student_extract(const Extractor& student, const Matrix& generic_rows);

void check_paired_dims(const Extractor& teacher, const Extractor& student);

}  // namespace sgfd
