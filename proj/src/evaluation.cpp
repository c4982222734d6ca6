#include "sgfd/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sgfd/errors.hpp"
#include "sgfd/extractors.hpp"

namespace sgfd {

std::vector<int> rank_items(const Backbone& backbone, int user, const std::vector<int>& candidates,
                            const Matrix& candidate_feats) {
    if (candidates.empty()) throw ValidationError("rank_items: empty candidate set");
    Vector scores = backbone.score_batch(user, candidates, candidate_feats);
    std::vector<int> order(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) order[i] = int(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double sa = scores(a), sb = scores(b);
        if (sa != sb) return sa > sb;
        return candidates[std::size_t(a)] < candidates[std::size_t(b)];
    });
    std::vector<int> ranked(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i)
        ranked[i] = candidates[std::size_t(order[i])];
    return ranked;
}

double recall_at_k(const std::vector<int>& ranked, const std::set<int>& relevant, int k) {
    if (k < 1) throw ValidationError("recall_at_k: k must be >= 1");
    if (relevant.empty()) throw ValidationError("recall_at_k: empty relevant set");
    int hits = 0;
    const int top = std::min<int>(k, int(ranked.size()));
    for (int r = 0; r < top; ++r)
        if (relevant.count(ranked[std::size_t(r)])) ++hits;
    return double(hits) / double(relevant.size());
}

double ndcg_at_k(const std::vector<int>& ranked, const std::set<int>& relevant, int k) {
    if (k < 1) throw ValidationError("ndcg_at_k: k must be >= 1");
    if (relevant.empty()) throw ValidationError("ndcg_at_k: empty relevant set");
    double dcg = 0.0;
    const int top = std::min<int>(k, int(ranked.size()));
    for (int r = 1; r <= top; ++r)
        if (relevant.count(ranked[std::size_t(r - 1)])) dcg += 1.0 / std::log2(double(r) + 1.0);
    double idcg = 0.0;
    const int ideal = std::min<int>(k, int(relevant.size()));
    for (int r = 1; r <= ideal; ++r) idcg += 1.0 / std::log2(double(r) + 1.0);
    return dcg / idcg;
}

namespace {

int worker_count() {
    unsigned n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("SGFD_NUM_WORKERS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1 && unsigned(cap) < n) n = unsigned(cap);
    }
    return int(n);
}

}  // namespace

MetricReport evaluate_split(const Backbone& backbone, const Matrix& item_feats,
                            const std::vector<std::vector<int>>& exclude_by_user,
                            const std::vector<std::vector<int>>& relevant_by_user, int num_items,
                            int k) {
    const int num_users = int(relevant_by_user.size());
    std::vector<int> eligible;
    for (int u = 0; u < num_users; ++u)
        if (!relevant_by_user[std::size_t(u)].empty()) eligible.push_back(u);

    MetricReport report;
    report.k = k;
    report.users_skipped = num_users - int(eligible.size());
    if (eligible.empty()) return report;

    std::vector<PerUserMetrics> slots(eligible.size());
    auto eval_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t idx = lo; idx < hi; ++idx) {
            const int u = eligible[idx];
            std::vector<char> excluded(std::size_t(num_items), 0);
            for (int i : exclude_by_user[std::size_t(u)]) excluded[std::size_t(i)] = 1;
            std::vector<int> candidates;
            candidates.reserve(std::size_t(num_items));
            for (int i = 0; i < num_items; ++i)
                if (!excluded[std::size_t(i)]) candidates.push_back(i);
            Matrix feats(candidates.size(), item_feats.cols());
            for (std::size_t c = 0; c < candidates.size(); ++c)
                feats.row(Eigen::Index(c)) = item_feats.row(candidates[c]);
            auto ranked = rank_items(backbone, u, candidates, feats);
            std::set<int> relevant(relevant_by_user[std::size_t(u)].begin(),
                                   relevant_by_user[std::size_t(u)].end());
            slots[idx] = {u, recall_at_k(ranked, relevant, k), ndcg_at_k(ranked, relevant, k)};
        }
    };

    const int workers = std::min<int>(worker_count(), int(eligible.size()));
    if (workers <= 1) {
        eval_range(0, eligible.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (eligible.size() + std::size_t(workers) - 1) / std::size_t(workers);
        for (int w = 0; w < workers; ++w) {
            const std::size_t lo = std::size_t(w) * chunk;
            const std::size_t hi = std::min(eligible.size(), lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(eval_range, lo, hi);
        }
        for (auto& t : pool) t.join();
    }

    // Sequential reduction keeps the means independent of the worker count.
    double recall_sum = 0.0, ndcg_sum = 0.0;
    for (const auto& s : slots) {
        recall_sum += s.recall;
        ndcg_sum += s.ndcg;
    }
    report.users_evaluated = int(slots.size());
    report.recall_at_k = recall_sum / double(slots.size());
    report.ndcg_at_k = ndcg_sum / double(slots.size());
    report.per_user = std::move(slots);
    return report;
}

MetricReport evaluate(const Backbone& backbone, const StudentModel& student,
                      const InteractionCorpus& corpus, const Matrix& visual_features,
                      const Matrix& textual_features, int k) {
    Matrix f_visual = student_extract(student.visual, visual_features);
    Matrix f_textual = student_extract(student.textual, textual_features);
    Matrix item_feats(f_visual.rows(), f_visual.cols() + f_textual.cols());
    item_feats << f_visual, f_textual;
    return evaluate_split(backbone, item_feats, corpus.train_items_by_user(),
                          corpus.test_items_by_user(), corpus.num_items(), k);
}

std::string metric_report_tsv(const MetricReport& report) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "recall@%d\tndcg@%d\n%.2f\t%.2f\n", report.k, report.k,
                  100.0 * report.recall_at_k, 100.0 * report.ndcg_at_k);
    return buf;
}

std::string metric_report_json(const MetricReport& report) {
    nlohmann::json j;
    j["k"] = report.k;
    j["recall_at_k"] = report.recall_at_k;
    j["ndcg_at_k"] = report.ndcg_at_k;
    j["users_evaluated"] = report.users_evaluated;
    j["users_skipped"] = report.users_skipped;
    return j.dump(2) + "\n";
}

namespace {

// Regularized incomplete beta via Lentz's continued fraction; used for the
// Student-t CDF.
double betacf(double a, double b, double x) {
    const int max_iter = 200;
    const double eps = 3e-12, fpmin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

double incbeta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                         a * std::log(x) + b * std::log(1.0 - x);
    const double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

double paired_t_test_pvalue(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw DimensionError("paired_t_test: sample sizes differ");
    const std::size_t n = a.size();
    if (n < 2) return 1.0;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= double(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i] - mean;
        var += d * d;
    }
    var /= double(n - 1);
    if (var <= 0.0) return mean == 0.0 ? 1.0 : 0.0;
    const double t = mean / std::sqrt(var / double(n));
    const double df = double(n - 1);
    return incbeta(df / 2.0, 0.5, df / (df + t * t));
}

}  // namespace sgfd
