#include "sgfd/projection.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "sgfd/errors.hpp"
#include "sgfd/io.hpp"
#include "sgfd/rng.hpp"

namespace sgfd {

ProjectionMethod projection_method_from_name(const std::string& name) {
    if (name == "pca") return ProjectionMethod::Pca;
    if (name == "tsne") return ProjectionMethod::Tsne;
    throw ConfigError("unknown projection method '" + name + "' (expected pca|tsne)");
}

namespace {

// Canonical sign: the entry of largest magnitude is positive.
void canonicalize_sign(Eigen::Ref<Vector> v) {
    Eigen::Index argmax = 0;
    v.cwiseAbs().maxCoeff(&argmax);
    if (v(argmax) < 0.0) v = -v;
}

Matrix pca_2d(const Matrix& features) {
    const Eigen::Index n = features.rows();
    Matrix centered = features.rowwise() - features.colwise().mean();
    // Work on the smaller of the covariance (D x D) and Gram (n x n) problems.
    if (features.cols() <= n) {
        Matrix cov = centered.transpose() * centered / double(n - 1);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
        const Eigen::Index dims = cov.rows();
        Matrix basis(dims, 2);
        basis.col(0) = eig.eigenvectors().col(dims - 1);
        if (dims >= 2)
            basis.col(1) = eig.eigenvectors().col(dims - 2);
        else
            basis.col(1).setZero();
        canonicalize_sign(basis.col(0));
        canonicalize_sign(basis.col(1));
        return centered * basis;
    }
    Matrix gram = centered * centered.transpose() / double(n - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    Matrix coords(n, 2);
    for (int c = 0; c < 2; ++c) {
        const Eigen::Index idx = n - 1 - c;
        const double lambda = std::max(eig.eigenvalues()(idx), 0.0);
        Vector u = eig.eigenvectors().col(idx);
        canonicalize_sign(u);
        coords.col(c) = u * std::sqrt(lambda * double(n - 1));
    }
    return coords;
}

// Exact t-SNE. Affinities use a per-point bandwidth found by binary search on
// the entropy; the embedding is optimized with momentum and early
// exaggeration.
Matrix tsne_2d(const Matrix& features, std::uint64_t seed) {
    const Eigen::Index n = features.rows();
    const double perplexity = std::min(30.0, double(n - 1) / 3.0);
    const double log_perp = std::log(perplexity);

    Matrix d2(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j)
            d2(i, j) = (features.row(i) - features.row(j)).squaredNorm();
        d2(i, i) = 0.0;
    }

    Matrix p = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
        Vector row = Vector::Zero(n);
        for (int iter = 0; iter < 64; ++iter) {
            double sum = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                row(j) = i == j ? 0.0 : std::exp(-beta * d2(i, j));
                sum += row(j);
            }
            if (sum <= 0.0) sum = 1e-300;
            double entropy = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (row(j) <= 0.0) continue;
                const double pj = row(j) / sum;
                entropy -= pj * std::log(pj);
            }
            const double diff = entropy - log_perp;
            if (std::abs(diff) < 1e-5) break;
            if (diff > 0.0) {
                beta_lo = beta;
                beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta + beta_hi);
            } else {
                beta_hi = beta;
                beta = beta_lo > 0.0 ? 0.5 * (beta + beta_lo) : beta / 2.0;
            }
            row.setZero();
        }
        double sum = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            row(j) = i == j ? 0.0 : std::exp(-beta * d2(i, j));
            sum += row(j);
        }
        if (sum <= 0.0) sum = 1e-300;
        p.row(i) = row.transpose() / sum;
    }
    // Symmetrize and normalize.
    p = (p + p.transpose()) / (2.0 * double(n));
    p = p.cwiseMax(1e-12);

    Rng rng(seed);
    Matrix y(n, 2);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int c = 0; c < 2; ++c) y(i, c) = rng.normal(0.0, 1e-4);
    Matrix velocity = Matrix::Zero(n, 2);

    const int iters = 400;
    const int exaggeration_until = 100;
    const double lr = 100.0;
    for (int iter = 0; iter < iters; ++iter) {
        const double exaggeration = iter < exaggeration_until ? 4.0 : 1.0;
        const double momentum = iter < 200 ? 0.5 : 0.8;

        Matrix num(n, n);
        double qsum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (i == j) {
                    num(i, j) = 0.0;
                    continue;
                }
                num(i, j) = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
                qsum += num(i, j);
            }
        }
        if (qsum <= 0.0) qsum = 1e-300;

        Matrix grad = Matrix::Zero(n, 2);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (i == j) continue;
                const double q = std::max(num(i, j) / qsum, 1e-12);
                const double coeff = 4.0 * (exaggeration * p(i, j) - q) * num(i, j);
                grad.row(i) += coeff * (y.row(i) - y.row(j));
            }
        }
        velocity = momentum * velocity - lr * grad;
        y += velocity;
        y.rowwise() -= y.colwise().mean();
    }
    return y;
}

}  // namespace

Matrix project_features(const Matrix& features, ProjectionMethod method, std::uint64_t seed) {
    if (features.rows() < 3)
        throw ValidationError("project_features: need at least 3 rows");
    if (!features.allFinite())
        throw ValidationError("project_features: non-finite feature values");
    return method == ProjectionMethod::Pca ? pca_2d(features) : tsne_2d(features, seed);
}

double cluster_quality(const Matrix& features, const std::vector<int>& labels) {
    if (Eigen::Index(labels.size()) != features.rows())
        throw DimensionError("cluster_quality: label count does not match rows");
    const Eigen::Index n = features.rows();
    std::set<int> classes(labels.begin(), labels.end());
    if (classes.size() < 2)
        throw ValidationError("cluster_quality: need at least 2 classes present");
    const int num_classes = *classes.rbegin() + 1;

    std::vector<int> counts(std::size_t(num_classes), 0);
    for (int c : labels) {
        if (c < 0) throw IndexError("cluster_quality: negative class index");
        ++counts[std::size_t(c)];
    }

    double total = 0.0;
    std::vector<double> sums(static_cast<std::size_t>(num_classes));
    for (Eigen::Index i = 0; i < n; ++i) {
        std::fill(sums.begin(), sums.end(), 0.0);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            sums[std::size_t(labels[std::size_t(j)])] += (features.row(i) - features.row(j)).norm();
        }
        const int own = labels[std::size_t(i)];
        if (counts[std::size_t(own)] <= 1) continue;  // singleton scores 0
        const double a = sums[std::size_t(own)] / double(counts[std::size_t(own)] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < num_classes; ++c) {
            if (c == own || counts[std::size_t(c)] == 0) continue;
            b = std::min(b, sums[std::size_t(c)] / double(counts[std::size_t(c)]));
        }
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / double(n);
}

void write_projection_bundle(const std::string& path,
                             const std::vector<ProjectionRecord>& records) {
    std::ostringstream out;
    out << "item_id\tsource\tmodality\tx\ty\tlabel\n";
    char buf[64];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf, "%.17g\t%.17g", r.x, r.y);
        out << r.item_id << '\t' << r.source << '\t' << r.modality << '\t' << buf << '\t'
            << r.label << '\n';
    }
    write_text_file(path, out.str());
}

std::vector<ProjectionRecord> read_projection_bundle(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::vector<ProjectionRecord> records;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 || line.empty()) continue;  // header
        std::istringstream s(line);
        ProjectionRecord r;
        if (!(s >> r.item_id >> r.source >> r.modality >> r.x >> r.y >> r.label)) {
            std::ostringstream msg;
            msg << path << ": malformed bundle record at line " << lineno;
            throw ParseError(msg.str());
        }
        records.push_back(std::move(r));
    }
    return records;
}

std::string scatter_svg(const std::vector<ProjectionRecord>& records, int num_classes) {
    const int size = 640, margin = 40;
    double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
    if (!records.empty()) {
        xmin = xmax = records[0].x;
        ymin = ymax = records[0].y;
        for (const auto& r : records) {
            xmin = std::min(xmin, r.x);
            xmax = std::max(xmax, r.x);
            ymin = std::min(ymin, r.y);
            ymax = std::max(ymax, r.y);
        }
    }
    const double xspan = xmax - xmin > 0.0 ? xmax - xmin : 1.0;
    const double yspan = ymax - ymin > 0.0 ? ymax - ymin : 1.0;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
        << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    char buf[160];
    for (const auto& r : records) {
        const double px = margin + (r.x - xmin) / xspan * (size - 2 * margin);
        const double py = size - margin - (r.y - ymin) / yspan * (size - 2 * margin);
        const double hue = num_classes > 0 ? 360.0 * double(r.label) / double(num_classes) : 0.0;
        std::snprintf(buf, sizeof buf,
                      "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"3\" fill=\"hsl(%.0f,70%%,45%%)\" "
                      "fill-opacity=\"0.8\"/>\n",
                      px, py, hue);
        svg << buf;
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace sgfd
