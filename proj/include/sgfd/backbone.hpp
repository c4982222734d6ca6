#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sgfd/corpus.hpp"
#include "sgfd/diffcore.hpp"

namespace sgfd {

// Training triples over global user/item indices, plus the batch's unique
// item list and per-triple local row indices into it.
struct TripletBatch {
    std::vector<int> users;
    std::vector<int> pos;        // global item index
    std::vector<int> neg;        // global item index
    std::vector<int> items;      // sorted unique items of the batch
    std::vector<int> pos_local;  // row of pos[i] in `items`
    std::vector<int> neg_local;  // row of neg[i] in `items`

    std::size_t size() const { return users.size(); }

    static TripletBatch build(const std::vector<int>& users, const std::vector<int>& pos,
                              const std::vector<int>& neg);
};

// ---------------------------------------------------------------------------
// Backbone contract: the only coupling between the recommendation model and
// the rest of SGFD. Item feature rows are the student's concatenated
// visual-then-textual features; gradients flow back through d_item_feats.
// ---------------------------------------------------------------------------
class Backbone {
public:
    virtual ~Backbone() = default;

    virtual std::string name() const = 0;
    virtual void init(int num_users, int num_items, int item_feat_dim, int embed_dim,
                      Rng& rng) = 0;
    virtual void collect_params(ParamStore& store) = 0;
    virtual void zero_grad() = 0;

    // Score of one (user, item) pair given the item's feature row.
    virtual double score(int user, int item, const Vector& item_feat) const = 0;

    // Scores for one user over candidates; item_feats row i belongs to items[i].
    virtual Vector score_batch(int user, const std::vector<int>& items,
                               const Matrix& item_feats) const = 0;

    // Pairwise-ranking loss: mean of -log sigmoid(s+ - s-) plus the
    // weight-decay term. Accumulates parameter gradients and fills
    // d_item_feats (same shape as item_feats; zero where unused).
    virtual double rec_loss_backward(const TripletBatch& batch, const Matrix& item_feats,
                                     double weight_decay, Matrix& d_item_feats) = 0;
};

// Loss value without touching gradients (used by grad_check and tests).
double rec_loss(Backbone& backbone, const TripletBatch& batch, const Matrix& item_feats,
                double weight_decay);

// Reference backbone: free user/item embeddings; the projected modality
// vector is added to the free item embedding, so the embedding width stays
// `embed_dim` regardless of the feature width.
class PairwiseBackbone final : public Backbone {
public:
    std::string name() const override { return "pairwise"; }
    void init(int num_users, int num_items, int item_feat_dim, int embed_dim, Rng& rng) override;
    void collect_params(ParamStore& store) override;
    void zero_grad() override;
    double score(int user, int item, const Vector& item_feat) const override;
    Vector score_batch(int user, const std::vector<int>& items,
                       const Matrix& item_feats) const override;
    double rec_loss_backward(const TripletBatch& batch, const Matrix& item_feats,
                             double weight_decay, Matrix& d_item_feats) override;

    Matrix user_emb, item_emb;
    Matrix grad_user_emb, grad_item_emb;
    DenseLayer proj;  // embed_dim x item_feat_dim, identity

private:
    Vector item_repr(int item, const Vector& item_feat) const;
};

// Feature-blind dot-product backbone; exists to demonstrate that swapping
// backbones requires no change elsewhere.
class DotBackbone final : public Backbone {
public:
    std::string name() const override { return "dot"; }
    void init(int num_users, int num_items, int item_feat_dim, int embed_dim, Rng& rng) override;
    void collect_params(ParamStore& store) override;
    void zero_grad() override;
    double score(int user, int item, const Vector& item_feat) const override;
    Vector score_batch(int user, const std::vector<int>& items,
                       const Matrix& item_feats) const override;
    double rec_loss_backward(const TripletBatch& batch, const Matrix& item_feats,
                             double weight_decay, Matrix& d_item_feats) override;

    Matrix user_emb, item_emb;
    Matrix grad_user_emb, grad_item_emb;
};

std::unique_ptr<Backbone> make_backbone(const std::string& name);

// Uniform draw of `count` items from the user's unobserved train items
// (everything except the user's train positives; falls back to all observed
// interactions when no split is present). Deterministic given seed.
std::vector<int> sample_negatives(const InteractionCorpus& corpus, int user, int count,
                                  std::uint64_t seed);

}  // namespace sgfd
