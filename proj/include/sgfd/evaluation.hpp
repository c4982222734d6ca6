#pragma once

#include <set>
#include <string>
#include <vector>

#include "sgfd/backbone.hpp"
#include "sgfd/corpus.hpp"
#include "sgfd/model.hpp"

namespace sgfd {

struct PerUserMetrics {
    int user = 0;
    double recall = 0.0;
    double ndcg = 0.0;
};

struct MetricReport {
    double recall_at_k = 0.0;  // mean over evaluated users
    double ndcg_at_k = 0.0;
    int k = 20;
    int users_evaluated = 0;
    int users_skipped = 0;  // users with an empty relevant set
    std::vector<PerUserMetrics> per_user;
};

// Candidates sorted by descending score, ties broken by ascending item index.
// `candidate_feats` row i is the feature row of candidates[i].
std::vector<int> rank_items(const Backbone& backbone, int user, const std::vector<int>& candidates,
                            const Matrix& candidate_feats);

// |top-k of ranked ∩ relevant| / |relevant|. Empty relevant -> ValidationError
// (evaluate() skips such users before calling).
double recall_at_k(const std::vector<int>& ranked, const std::set<int>& relevant, int k);

// Binary-gain DCG@k, 1/log2(rank+1) with rank starting at 1, normalized by
// the ideal DCG truncated at min(k, |relevant|).
double ndcg_at_k(const std::vector<int>& ranked, const std::set<int>& relevant, int k);

// Full-ranking evaluation over all testing users: candidates are all items
// minus the user's train positives; relevant items are the user's test items.
// Parallelizes over users; SGFD_NUM_WORKERS caps the worker count. The
// result does not depend on the worker count.
MetricReport evaluate(const Backbone& backbone, const StudentModel& student,
                      const InteractionCorpus& corpus, const Matrix& visual_features,
                      const Matrix& textual_features, int k);

// Variant with an explicit split: positives to exclude from candidates and
// per-user relevant sets (used for the validation slice during training).
MetricReport evaluate_split(const Backbone& backbone, const Matrix& item_feats,
                            const std::vector<std::vector<int>>& exclude_by_user,
                            const std::vector<std::vector<int>>& relevant_by_user, int num_items,
                            int k);

// Percentage table, two decimals ("recall@K<TAB>ndcg@K" header then values).
std::string metric_report_tsv(const MetricReport& report);
std::string metric_report_json(const MetricReport& report);

// Two-tailed paired t-test; returns the p-value (1.0 when fewer than two
// pairs or zero variance of the differences).
double paired_t_test_pvalue(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace sgfd
