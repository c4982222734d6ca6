#include "sgfd/extractors.hpp"

#include <cmath>
#include <sstream>

#include "sgfd/errors.hpp"

namespace sgfd {

DepthPlan plan_depth(int input_dim, int output_dim, int delta) {
    if (output_dim < 1) throw ValidationError("plan_depth: output_dim must be >= 1");
    if (output_dim > input_dim)
        throw ValidationError("plan_depth: output_dim exceeds input_dim");
    if (delta < 2) throw ValidationError("plan_depth: delta must be >= 2");

    const double ratio = double(input_dim) / double(output_dim);
    // ceil with a tolerance so exact powers (e.g. 4096/64 at delta 4) do not
    // round up on floating-point noise.
    const double raw = std::log(ratio) / std::log(double(delta));
    int k = int(std::ceil(raw - 1e-12));
    if (k < 1) k = 1;

    DepthPlan plan;
    plan.depth = k;
    plan.widths.push_back(input_dim);
    double w = double(input_dim);
    for (int i = 1; i < k; ++i) {
        w /= double(delta);
        int wi = int(std::llround(w));
        // Keep the chain strictly decreasing between input_dim and output_dim.
        wi = std::min(wi, plan.widths.back() - 1);
        wi = std::max(wi, output_dim + 1);
        if (wi <= output_dim || wi >= plan.widths.back()) continue;
        plan.widths.push_back(wi);
    }
    plan.widths.push_back(output_dim);
    plan.depth = int(plan.widths.size()) - 1;
    return plan;
}

ExtractorSpec make_teacher_spec(Modality modality, int input_dim, int output_dim, int delta) {
    ExtractorSpec spec;
    spec.modality = modality;
    spec.input_dim = input_dim;
    spec.output_dim = output_dim;
    spec.delta = delta;
    spec.kind = ExtractorKind::TeacherDeep;
    spec.widths = plan_depth(input_dim, output_dim, delta).widths;
    return spec;
}

ExtractorSpec make_student_spec(Modality modality, int input_dim, int output_dim) {
    ExtractorSpec spec;
    spec.modality = modality;
    spec.input_dim = input_dim;
    spec.output_dim = output_dim;
    spec.kind = ExtractorKind::StudentShallow;
    spec.widths = {input_dim, output_dim};
    return spec;
}

Extractor::Extractor(const ExtractorSpec& s) : spec(s) {
    if (spec.widths.size() < 2) throw ConfigError("Extractor: spec has no layers");
    for (std::size_t i = 0; i + 1 < spec.widths.size(); ++i) {
        const bool last = i + 2 == spec.widths.size();
        layers.emplace_back(spec.widths[i + 1], spec.widths[i],
                            last ? Activation::Identity : Activation::Relu);
    }
    caches.resize(layers.size());
}

void Extractor::init(Rng& rng) {
    for (auto& layer : layers) layer.init_xavier(rng);
}

void Extractor::zero_grad() {
    for (auto& layer : layers) layer.zero_grad();
}

Matrix Extractor::forward(const Matrix& generic) const {
    Matrix x = generic;
    for (const auto& layer : layers) x = affine_forward(layer, x);
    return x;
}

Matrix Extractor::forward_cached(const Matrix& generic) {
    Matrix x = generic;
    for (std::size_t i = 0; i < layers.size(); ++i)
        x = affine_forward_cached(layers[i], x, caches[i]);
    return x;
}

Matrix Extractor::backward(const Matrix& grad_out) {
    Matrix g = grad_out;
    for (std::size_t i = layers.size(); i-- > 0;)
        g = affine_backward(layers[i], caches[i], g);
    return g;
}

Matrix teacher_extract(const Extractor& teacher, const Matrix& generic_rows) {
    if (teacher.spec.kind != ExtractorKind::TeacherDeep)
        throw ConfigError("teacher_extract: extractor is not teacher-deep");
    return teacher.forward(generic_rows);
}

Matrix student_extract(const Extractor& student, const Matrix& generic_rows) {
    if (student.spec.kind != ExtractorKind::StudentShallow)
        throw ConfigError("student_extract: extractor is not student-shallow");
    return student.forward(generic_rows);
}

void check_paired_dims(const Extractor& teacher, const Extractor& student) {
    if (teacher.spec.output_dim != student.spec.output_dim) {
        std::ostringstream msg;
        msg << "paired teacher/student output widths differ (" << teacher.spec.output_dim
            << " vs " << student.spec.output_dim << ") for modality "
            << modality_name(teacher.spec.modality);
        throw ConfigError(msg.str());
    }
}

}  // namespace sgfd
