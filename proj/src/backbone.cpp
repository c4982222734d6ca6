#include "sgfd/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "sgfd/errors.hpp"
#include "sgfd/rng.hpp"

namespace sgfd {

TripletBatch TripletBatch::build(const std::vector<int>& users, const std::vector<int>& pos,
                                 const std::vector<int>& neg) {
    if (users.size() != pos.size() || users.size() != neg.size())
        throw DimensionError("TripletBatch: component lengths differ");
    TripletBatch batch;
    batch.users = users;
    batch.pos = pos;
    batch.neg = neg;
    std::set<int> uniq(pos.begin(), pos.end());
    uniq.insert(neg.begin(), neg.end());
    batch.items.assign(uniq.begin(), uniq.end());
    std::unordered_map<int, int> local;
    for (int i = 0; i < int(batch.items.size()); ++i) local[batch.items[std::size_t(i)]] = i;
    batch.pos_local.reserve(pos.size());
    batch.neg_local.reserve(neg.size());
    for (int p : pos) batch.pos_local.push_back(local.at(p));
    for (int n : neg) batch.neg_local.push_back(local.at(n));
    return batch;
}

namespace {

double log_sigmoid(double x) {
    // -softplus(-x), stable for both signs
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

double rec_loss(Backbone& backbone, const TripletBatch& batch, const Matrix& item_feats,
                double weight_decay) {
    Matrix scratch = Matrix::Zero(item_feats.rows(), item_feats.cols());
    // Evaluate-only path: run the backward variant on saved gradients.
    ParamStore store;
    backbone.collect_params(store);
    auto grads_before = [&] {
        std::vector<double> g;
        for (const auto& e : store.entries()) g.insert(g.end(), e.grad, e.grad + e.size());
        return g;
    }();
    const double loss = backbone.rec_loss_backward(batch, item_feats, weight_decay, scratch);
    // Restore gradient slots so the caller sees no side effects.
    std::size_t off = 0;
    for (auto& e : store.entries()) {
        std::copy(grads_before.begin() + long(off), grads_before.begin() + long(off) + e.size(),
                  e.grad);
        off += std::size_t(e.size());
    }
    return loss;
}

// ---------------------------------------------------------------------------
// PairwiseBackbone
// ---------------------------------------------------------------------------

void PairwiseBackbone::init(int num_users, int num_items, int item_feat_dim, int embed_dim,
                            Rng& rng) {
    user_emb.resize(num_users, embed_dim);
    item_emb.resize(num_items, embed_dim);
    for (Eigen::Index i = 0; i < user_emb.rows(); ++i)
        for (Eigen::Index j = 0; j < user_emb.cols(); ++j) user_emb(i, j) = rng.normal(0.0, 0.1);
    for (Eigen::Index i = 0; i < item_emb.rows(); ++i)
        for (Eigen::Index j = 0; j < item_emb.cols(); ++j) item_emb(i, j) = rng.normal(0.0, 0.1);
    grad_user_emb = Matrix::Zero(num_users, embed_dim);
    grad_item_emb = Matrix::Zero(num_items, embed_dim);
    proj = DenseLayer(embed_dim, item_feat_dim, Activation::Identity);
    proj.init_xavier(rng);
}

void PairwiseBackbone::collect_params(ParamStore& store) {
    store.add("backbone.user_emb", user_emb, grad_user_emb);
    store.add("backbone.item_emb", item_emb, grad_item_emb);
    store.add_layer("backbone.proj", proj);
}

void PairwiseBackbone::zero_grad() {
    grad_user_emb.setZero();
    grad_item_emb.setZero();
    proj.zero_grad();
}

Vector PairwiseBackbone::item_repr(int item, const Vector& item_feat) const {
    if (item < 0 || item >= item_emb.rows())
        throw IndexError("backbone: unknown item index " + std::to_string(item));
    return item_emb.row(item).transpose() +
           proj.weight * item_feat + proj.bias;
}

double PairwiseBackbone::score(int user, int item, const Vector& item_feat) const {
    if (user < 0 || user >= user_emb.rows())
        throw IndexError("backbone: unknown user index " + std::to_string(user));
    if (item_feat.size() != proj.in_dim())
        throw DimensionError("backbone: item feature width mismatch");
    return user_emb.row(user).dot(item_repr(item, item_feat).transpose());
}

Vector PairwiseBackbone::score_batch(int user, const std::vector<int>& items,
                                     const Matrix& item_feats) const {
    if (user < 0 || user >= user_emb.rows())
        throw IndexError("backbone: unknown user index " + std::to_string(user));
    if (Eigen::Index(items.size()) != item_feats.rows())
        throw DimensionError("backbone: candidate/feature row count mismatch");
    Matrix projected = (item_feats * proj.weight.transpose()).rowwise() + proj.bias.transpose();
    Vector scores(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        const int item = items[i];
        if (item < 0 || item >= item_emb.rows())
            throw IndexError("backbone: unknown item index " + std::to_string(item));
        scores(Eigen::Index(i)) =
            user_emb.row(user).dot(item_emb.row(item) + projected.row(Eigen::Index(i)));
    }
    return scores;
}

double PairwiseBackbone::rec_loss_backward(const TripletBatch& batch, const Matrix& item_feats,
                                           double weight_decay, Matrix& d_item_feats) {
    if (batch.size() == 0) throw ValidationError("rec_loss: empty triplet batch");
    if (Eigen::Index(batch.items.size()) != item_feats.rows())
        throw DimensionError("rec_loss: feature rows do not match batch items");

    const double n = double(batch.size());
    AffineCache proj_cache;
    Matrix projected = affine_forward_cached(proj, item_feats, proj_cache);

    d_item_feats = Matrix::Zero(item_feats.rows(), item_feats.cols());
    Matrix d_projected = Matrix::Zero(projected.rows(), projected.cols());

    double loss = 0.0;
    double decay_term = 0.0;
    for (std::size_t t = 0; t < batch.size(); ++t) {
        const int u = batch.users[t];
        if (u < 0 || u >= user_emb.rows())
            throw IndexError("backbone: unknown user index " + std::to_string(u));
        const int ip = batch.pos[t], in = batch.neg[t];
        const int lp = batch.pos_local[t], ln = batch.neg_local[t];
        Eigen::RowVectorXd repr_p = item_emb.row(ip) + projected.row(lp);
        Eigen::RowVectorXd repr_n = item_emb.row(in) + projected.row(ln);
        const double sp = user_emb.row(u).dot(repr_p);
        const double sn = user_emb.row(u).dot(repr_n);
        const double diff = sp - sn;
        loss += -log_sigmoid(diff);

        // d(-log sigmoid(diff))/d diff = sigmoid(diff) - 1
        const double g = (sigmoid(diff) - 1.0) / n;
        grad_user_emb.row(u) += g * (repr_p - repr_n);
        grad_item_emb.row(ip) += g * user_emb.row(u);
        grad_item_emb.row(in) -= g * user_emb.row(u);
        d_projected.row(lp) += g * user_emb.row(u);
        d_projected.row(ln) -= g * user_emb.row(u);

        // Batch-local embedding regularization (the projection layer is left
        // unregularized).
        decay_term += user_emb.row(u).squaredNorm() + item_emb.row(ip).squaredNorm() +
                      item_emb.row(in).squaredNorm();
        grad_user_emb.row(u) += (2.0 * weight_decay / n) * user_emb.row(u);
        grad_item_emb.row(ip) += (2.0 * weight_decay / n) * item_emb.row(ip);
        grad_item_emb.row(in) += (2.0 * weight_decay / n) * item_emb.row(in);
    }

    d_item_feats = affine_backward(proj, proj_cache, d_projected);
    return loss / n + weight_decay * decay_term / n;
}

// ---------------------------------------------------------------------------
// DotBackbone
// ---------------------------------------------------------------------------

void DotBackbone::init(int num_users, int num_items, int /*item_feat_dim*/, int embed_dim,
                       Rng& rng) {
    user_emb.resize(num_users, embed_dim);
    item_emb.resize(num_items, embed_dim);
    for (Eigen::Index i = 0; i < user_emb.rows(); ++i)
        for (Eigen::Index j = 0; j < user_emb.cols(); ++j) user_emb(i, j) = rng.normal(0.0, 0.1);
    for (Eigen::Index i = 0; i < item_emb.rows(); ++i)
        for (Eigen::Index j = 0; j < item_emb.cols(); ++j) item_emb(i, j) = rng.normal(0.0, 0.1);
    grad_user_emb = Matrix::Zero(num_users, embed_dim);
    grad_item_emb = Matrix::Zero(num_items, embed_dim);
}

void DotBackbone::collect_params(ParamStore& store) {
    store.add("backbone.user_emb", user_emb, grad_user_emb);
    store.add("backbone.item_emb", item_emb, grad_item_emb);
}

void DotBackbone::zero_grad() {
    grad_user_emb.setZero();
    grad_item_emb.setZero();
}

double DotBackbone::score(int user, int item, const Vector&) const {
    if (user < 0 || user >= user_emb.rows())
        throw IndexError("backbone: unknown user index " + std::to_string(user));
    if (item < 0 || item >= item_emb.rows())
        throw IndexError("backbone: unknown item index " + std::to_string(item));
    return user_emb.row(user).dot(item_emb.row(item));
}

Vector DotBackbone::score_batch(int user, const std::vector<int>& items,
                                const Matrix& item_feats) const {
    if (Eigen::Index(items.size()) != item_feats.rows())
        throw DimensionError("backbone: candidate/feature row count mismatch");
    Vector scores(items.size());
    for (std::size_t i = 0; i < items.size(); ++i)
        scores(Eigen::Index(i)) = score(user, items[i], Vector());
    return scores;
}

double DotBackbone::rec_loss_backward(const TripletBatch& batch, const Matrix& item_feats,
                                      double weight_decay, Matrix& d_item_feats) {
    if (batch.size() == 0) throw ValidationError("rec_loss: empty triplet batch");
    const double n = double(batch.size());
    d_item_feats = Matrix::Zero(item_feats.rows(), item_feats.cols());
    double loss = 0.0;
    double decay_term = 0.0;
    for (std::size_t t = 0; t < batch.size(); ++t) {
        const int u = batch.users[t], ip = batch.pos[t], in = batch.neg[t];
        const double diff = user_emb.row(u).dot(item_emb.row(ip) - item_emb.row(in));
        loss += -log_sigmoid(diff);
        const double g = (sigmoid(diff) - 1.0) / n;
        grad_user_emb.row(u) += g * (item_emb.row(ip) - item_emb.row(in));
        grad_item_emb.row(ip) += g * user_emb.row(u);
        grad_item_emb.row(in) -= g * user_emb.row(u);
        decay_term += user_emb.row(u).squaredNorm() + item_emb.row(ip).squaredNorm() +
                      item_emb.row(in).squaredNorm();
        grad_user_emb.row(u) += (2.0 * weight_decay / n) * user_emb.row(u);
        grad_item_emb.row(ip) += (2.0 * weight_decay / n) * item_emb.row(ip);
        grad_item_emb.row(in) += (2.0 * weight_decay / n) * item_emb.row(in);
    }
    return loss / n + weight_decay * decay_term / n;
}

std::unique_ptr<Backbone> make_backbone(const std::string& name) {
    if (name == "pairwise") return std::make_unique<PairwiseBackbone>();
    if (name == "dot") return std::make_unique<DotBackbone>();
    throw ConfigError("unknown backbone '" + name + "' (expected pairwise|dot)");
}

std::vector<int> sample_negatives(const InteractionCorpus& corpus, int user, int count,
                                  std::uint64_t seed) {
    if (user < 0 || user >= corpus.num_users())
        throw IndexError("sample_negatives: unknown user index " + std::to_string(user));
    const auto& positives = corpus.has_split() ? corpus.train : corpus.interactions;
    std::vector<char> observed(std::size_t(corpus.num_items()), 0);
    for (const auto& [u, i] : positives)
        if (u == user) observed[std::size_t(i)] = 1;
    std::vector<int> pool;
    pool.reserve(std::size_t(corpus.num_items()));
    for (int i = 0; i < corpus.num_items(); ++i)
        if (!observed[std::size_t(i)]) pool.push_back(i);
    if (pool.empty())
        throw ValidationError("sample_negatives: user " + std::to_string(user) +
                              " has interacted with every item");
    Rng rng(seed);
    std::vector<int> out;
    out.reserve(std::size_t(count));
    for (int k = 0; k < count; ++k) out.push_back(pool[std::size_t(rng.next(pool.size()))]);
    return out;
}

}  // namespace sgfd
