#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgfd/diffcore.hpp"

namespace sgfd {

enum class ProjectionMethod { Pca, Tsne };

ProjectionMethod projection_method_from_name(const std::string& name);

// n x 2 coordinates. PCA is the exact top-2 principal projection with a
// canonical sign; t-SNE is a seeded exact (O(n^2)) implementation. Requires
// at least 3 rows.
Matrix project_features(const Matrix& features, ProjectionMethod method, std::uint64_t seed);

// Mean silhouette over points under Euclidean distance: per point,
// (b - a) / max(a, b) with a the mean intra-class distance and b the mean
// distance to the nearest other class; singleton-class points score 0.
// Requires at least 2 classes present.
double cluster_quality(const Matrix& features, const std::vector<int>& labels);

// One scatter record per (item, source, modality).
struct ProjectionRecord {
    std::string item_id;
    std::string source;    // raw | teacher | student
    std::string modality;  // visual | textual
    double x = 0.0;
    double y = 0.0;
    int label = 0;
};

void write_projection_bundle(const std::string& path, const std::vector<ProjectionRecord>& records);
std::vector<ProjectionRecord> read_projection_bundle(const std::string& path);

// Minimal SVG scatter of one (source, modality) slice, colored by label.
std::string scatter_svg(const std::vector<ProjectionRecord>& records, int num_classes);

}  // namespace sgfd
