#include "sgfd/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sgfd/errors.hpp"
#include "sgfd/evaluation.hpp"

namespace sgfd {

std::string variant_name(AblationVariant variant) {
    switch (variant) {
        case AblationVariant::Full: return "full";
        case AblationVariant::LdOnly: return "ld_only";
        case AblationVariant::FdOnly: return "fd_only";
        case AblationVariant::NoFusion: return "no_fusion";
        case AblationVariant::ShallowTeacher: return "shallow_teacher";
        case AblationVariant::NoKd: return "no_kd";
    }
    return "?";
}

AblationVariant variant_from_name(const std::string& name) {
    for (auto v : all_variants())
        if (variant_name(v) == name) return v;
    throw ConfigError("unknown variant '" + name +
                      "' (expected full|ld_only|fd_only|no_fusion|shallow_teacher|no_kd)");
}

const std::vector<AblationVariant>& all_variants() {
    static const std::vector<AblationVariant> variants = {
        AblationVariant::Full,          AblationVariant::LdOnly,
        AblationVariant::FdOnly,        AblationVariant::NoFusion,
        AblationVariant::ShallowTeacher, AblationVariant::NoKd};
    return variants;
}

std::string teacher_mode_name(TeacherMode mode) {
    return mode == TeacherMode::PretrainFreeze ? "pretrain_freeze" : "joint";
}

TeacherMode teacher_mode_from_name(const std::string& name) {
    if (name == "pretrain_freeze") return TeacherMode::PretrainFreeze;
    if (name == "joint") return TeacherMode::Joint;
    throw ConfigError("unknown teacher_mode '" + name + "' (expected pretrain_freeze|joint)");
}

namespace {

double parse_num(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
    }
}

std::string fmt_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

bool is_decade(double v, int lo_exp, int hi_exp) {
    if (!(v > 0.0)) return false;
    const double e = std::log10(v);
    const double r = std::round(e);
    return std::abs(e - r) < 1e-9 && r >= lo_exp && r <= hi_exp;
}

bool in_set(double v, std::initializer_list<double> set) {
    for (double s : set)
        if (std::abs(v - s) < 1e-9) return true;
    return false;
}

}  // namespace

TrainConfig TrainConfig::from_kv(const std::map<std::string, std::string>& kv) {
    TrainConfig c;
    for (const auto& [key, value] : kv) {
        if (key == "learning_rate") c.learning_rate = parse_num(key, value);
        else if (key == "weight_decay") c.weight_decay = parse_num(key, value);
        else if (key == "batch_size") c.batch_size = int(parse_num(key, value));
        else if (key == "embed_dim") c.embed_dim = int(parse_num(key, value));
        else if (key == "feature_dim") c.feature_dim = int(parse_num(key, value));
        else if (key == "tau_transfer") c.tau_transfer = parse_num(key, value);
        else if (key == "delta") c.delta = int(parse_num(key, value));
        else if (key == "lambda1") c.lambda1 = parse_num(key, value);
        else if (key == "lambda2") c.lambda2 = parse_num(key, value);
        else if (key == "seed") c.seed = std::uint64_t(parse_num(key, value));
        else if (key == "max_epochs") c.max_epochs = int(parse_num(key, value));
        else if (key == "teacher_max_epochs") c.teacher_max_epochs = int(parse_num(key, value));
        else if (key == "patience") c.patience = int(parse_num(key, value));
        else if (key == "teacher_mode") c.teacher_mode = teacher_mode_from_name(value);
        else if (key == "backbone") c.backbone = value;
        else if (key == "grid_mode") c.grid_mode = value == "true" || value == "1";
        else if (key == "val_fraction") c.val_fraction = parse_num(key, value);
        else if (key == "eval_k") c.eval_k = int(parse_num(key, value));
        else throw ConfigError("unknown config key '" + key + "'");
    }
    c.validate();
    return c;
}

std::map<std::string, std::string> TrainConfig::to_kv() const {
    std::map<std::string, std::string> kv;
    kv["learning_rate"] = fmt_num(learning_rate);
    kv["weight_decay"] = fmt_num(weight_decay);
    kv["batch_size"] = std::to_string(batch_size);
    kv["embed_dim"] = std::to_string(embed_dim);
    kv["feature_dim"] = std::to_string(feature_dim);
    kv["tau_transfer"] = fmt_num(tau_transfer);
    kv["delta"] = std::to_string(delta);
    kv["lambda1"] = fmt_num(lambda1);
    kv["lambda2"] = fmt_num(lambda2);
    kv["seed"] = std::to_string(seed);
    kv["max_epochs"] = std::to_string(max_epochs);
    kv["teacher_max_epochs"] = std::to_string(teacher_max_epochs);
    kv["patience"] = std::to_string(patience);
    kv["teacher_mode"] = teacher_mode_name(teacher_mode);
    kv["backbone"] = backbone;
    kv["grid_mode"] = grid_mode ? "true" : "false";
    kv["val_fraction"] = fmt_num(val_fraction);
    kv["eval_k"] = std::to_string(eval_k);
    return kv;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (embed_dim < 1 || feature_dim < 1) throw ConfigError("dims must be >= 1");
    if (!(tau_transfer > 0.0)) throw ConfigError("tau_transfer must be > 0");
    if (delta < 2) throw ConfigError("delta must be >= 2");
    if (lambda1 < 0.0 || lambda2 < 0.0) throw ConfigError("lambda weights must be >= 0");
    if (max_epochs < 1 || teacher_max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0))
        throw ConfigError("val_fraction must be in [0, 1)");
    if (eval_k < 1) throw ConfigError("eval_k must be >= 1");
    if (grid_mode) {
        if (!is_decade(learning_rate, -5, 1))
            throw ConfigError("grid mode: learning_rate must be a decade in [1e-5, 1e+1]");
        if (!is_decade(weight_decay, -5, -1))
            throw ConfigError("grid mode: weight_decay must be a decade in [1e-5, 1e-1]");
        if (!in_set(tau_transfer, {5.0, 10.0, 20.0, 50.0, 100.0}))
            throw ConfigError("grid mode: tau_transfer must be one of {5,10,20,50,100}");
        if (!in_set(double(delta), {2.0, 4.0, 6.0, 8.0}))
            throw ConfigError("grid mode: delta must be one of {2,4,6,8}");
        if (!is_decade(lambda1, -3, 1) || !is_decade(lambda2, -3, 1))
            throw ConfigError("grid mode: lambda weights must be decades in [1e-3, 1e+1]");
    }
}

// ---------------------------------------------------------------------------
// Teacher pretraining
// ---------------------------------------------------------------------------

namespace {

Matrix gather_rows(const Matrix& source, const std::vector<int>& rows) {
    Matrix out(Eigen::Index(rows.size()), source.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(Eigen::Index(i)) = source.row(rows[i]);
    return out;
}

std::vector<int> gather_labels(const std::vector<int>& y, const std::vector<int>& rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (int r : rows) out.push_back(y[std::size_t(r)]);
    return out;
}

double head_accuracy(const Matrix& probs, const std::vector<int>& y,
                     const std::vector<int>& rows) {
    if (rows.empty()) return 0.0;
    int correct = 0;
    for (int r : rows) {
        Eigen::Index argmax = 0;
        probs.row(r).maxCoeff(&argmax);
        if (int(argmax) == y[std::size_t(r)]) ++correct;
    }
    return double(correct) / double(rows.size());
}

// Mean accuracy across heads (visual, textual, fused when present) on the
// given item rows; optionally also the summed CE loss on those rows.
double teacher_accuracy(const TeacherModel& model, const Matrix& x_visual, const Matrix& x_textual,
                        const std::vector<int>& y, const std::vector<int>& rows,
                        double* ce_loss = nullptr) {
    if (rows.empty()) return 0.0;
    Matrix fm = model.visual.forward(x_visual);
    Matrix fe = model.textual.forward(x_textual);
    Matrix pm = classify(model.cls_visual, fm, 1.0);
    Matrix pe = classify(model.cls_textual, fe, 1.0);
    double acc = head_accuracy(pm, y, rows) + head_accuracy(pe, y, rows);
    double heads = 2.0;
    Matrix pu;
    if (model.config.with_fusion) {
        Matrix fu = fuse(model.fusion, fm, fe);
        pu = classify(model.cls_fusion, fu, 1.0);
        acc += head_accuracy(pu, y, rows);
        heads += 1.0;
    }
    if (ce_loss) {
        Matrix pm_rows = gather_rows(pm, rows);
        Matrix pe_rows = gather_rows(pe, rows);
        const std::vector<int> y_rows = gather_labels(y, rows);
        *ce_loss = teacher_ce(pm_rows, pe_rows, y_rows);
        if (model.config.with_fusion) *ce_loss += fused_ce(gather_rows(pu, rows), y_rows);
    }
    return acc / heads;
}

}  // namespace

TeacherTrainResult train_teacher(const InteractionCorpus& corpus, const SemanticLabels& labels,
                                 const GenericFeatureMatrix& visual,
                                 const GenericFeatureMatrix& textual, const TrainConfig& config,
                                 bool with_fusion, bool shallow) {
    config.validate();
    const Matrix x_visual = visual.aligned(corpus);
    const Matrix x_textual = textual.aligned(corpus);
    const std::vector<int> y = labels.aligned(corpus);
    const int num_items = corpus.num_items();

    TeacherConfig tc;
    tc.visual_dim = visual.dim;
    tc.textual_dim = textual.dim;
    tc.feature_dim = config.feature_dim;
    tc.num_classes = labels.num_classes();
    tc.delta = config.delta;
    tc.with_fusion = with_fusion;
    tc.shallow = shallow;

    TeacherTrainResult result;
    result.model = TeacherModel(tc);
    TeacherModel& model = result.model;
    Rng rng(config.seed);
    model.init(rng);

    ParamStore store;
    model.collect_params(store);
    AdamOptimizer opt(config.learning_rate);
    opt.attach(store);

    // Class-stratified validation slice for the accuracy plateau: every class
    // with at least two items contributes ~10% of them (at least one).
    std::vector<std::vector<int>> by_class(std::size_t(labels.num_classes()));
    for (int i = 0; i < num_items; ++i) by_class[std::size_t(y[std::size_t(i)])].push_back(i);
    Rng split_rng = rng.fork(7001);
    std::vector<int> val_rows, train_rows;
    for (auto& members : by_class) {
        split_rng.shuffle(members.begin(), members.end());
        const int n_val = int(members.size()) >= 2 ? std::max(1, int(members.size()) / 10) : 0;
        for (std::size_t j = 0; j < members.size(); ++j)
            (int(j) < n_val ? val_rows : train_rows).push_back(members[j]);
    }
    std::sort(val_rows.begin(), val_rows.end());
    std::sort(train_rows.begin(), train_rows.end());

    std::vector<double> best_snapshot = store.snapshot_values();
    std::vector<double> last_good = best_snapshot;
    double best_val = -1.0;
    double best_val_loss = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    const LossWeights teacher_weights{0.0, 1.0};

    for (int epoch = 0; epoch < config.teacher_max_epochs; ++epoch) {
        Rng erng = rng.fork(10000 + std::uint64_t(epoch));
        std::vector<int> order = train_rows;
        erng.shuffle(order.begin(), order.end());

        bool bad_step = false;
        for (std::size_t start = 0; start < order.size(); start += std::size_t(config.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + std::size_t(config.batch_size));
            std::vector<int> batch(order.begin() + long(start), order.begin() + long(stop));
            const Matrix xm = gather_rows(x_visual, batch);
            const Matrix xe = gather_rows(x_textual, batch);
            const std::vector<int> yb = gather_labels(y, batch);

            model.zero_grad();
            double tce = 0.0, fce = 0.0;
            try {
                Matrix fm = model.visual.forward_cached(xm);
                Matrix fe = model.textual.forward_cached(xe);
                AffineCache cache_m, cache_e;
                Matrix pm = temp_softmax_rows(model.cls_visual.logits_cached(fm, cache_m), 1.0);
                Matrix pe = temp_softmax_rows(model.cls_textual.logits_cached(fe, cache_e), 1.0);
                tce = teacher_ce(pm, pe, yb);
                Matrix d_fm = affine_backward(model.cls_visual.affine, cache_m,
                                              0.5 * ce_softmax_grad_logits(pm, yb, 1.0));
                Matrix d_fe = affine_backward(model.cls_textual.affine, cache_e,
                                              0.5 * ce_softmax_grad_logits(pe, yb, 1.0));
                if (with_fusion) {
                    AffineCache cache_u, cache_cu;
                    Matrix fu = fuse_cached(model.fusion, fm, fe, cache_u);
                    Matrix pu = temp_softmax_rows(model.cls_fusion.logits_cached(fu, cache_cu), 1.0);
                    fce = fused_ce(pu, yb);
                    Matrix d_fu = affine_backward(model.cls_fusion.affine, cache_cu,
                                                  ce_softmax_grad_logits(pu, yb, 1.0));
                    Matrix d_cat = affine_backward(model.fusion.affine, cache_u, d_fu);
                    d_fm += d_cat.leftCols(fm.cols());
                    d_fe += d_cat.rightCols(fe.cols());
                }
                model.visual.backward(d_fm);
                model.textual.backward(d_fe);
                result.log.push_back(total_loss(0.0, tce, fce, 0.0, 0.0, teacher_weights));
            } catch (const NumericError&) {
                bad_step = true;
                break;
            }
            opt.step(store);
            // Decoupled weight decay; also keeps feature magnitudes bounded
            // once the accuracy has saturated.
            if (config.weight_decay > 0.0) {
                const double shrink = 1.0 - config.learning_rate * config.weight_decay;
                for (auto& e : store.entries())
                    for (Eigen::Index i = 0; i < e.size(); ++i) e.value[i] *= shrink;
            }
            if (!store.values_finite()) {
                bad_step = true;
                break;
            }
        }

        if (bad_step) {
            store.restore_values(last_good);
            result.diverged = true;
            result.epochs_run = epoch + 1;
            break;
        }
        last_good = store.snapshot_values();
        result.epochs_run = epoch + 1;

        if (!val_rows.empty()) {
            double val_loss = 0.0;
            const double val_acc =
                teacher_accuracy(model, x_visual, x_textual, y, val_rows, &val_loss);
            if (val_acc > best_val) {
                // Patience is anchored to accuracy improvements.
                best_val = val_acc;
                best_val_loss = val_loss;
                best_epoch = epoch;
                best_snapshot = store.snapshot_values();
            } else if (val_acc == best_val && val_loss < best_val_loss) {
                // Among equal-accuracy epochs keep the lowest-CE snapshot.
                best_val_loss = val_loss;
                best_snapshot = store.snapshot_values();
            }
            if (epoch - best_epoch >= config.patience) break;
        } else {
            best_snapshot = store.snapshot_values();
            best_epoch = epoch;
        }
    }

    if (!result.diverged && !val_rows.empty()) store.restore_values(best_snapshot);
    result.best_val_accuracy = best_val < 0.0 ? 0.0 : best_val;
    result.best_epoch = best_epoch;
    result.final_train_accuracy = teacher_accuracy(model, x_visual, x_textual, y, train_rows);
    return result;
}

// ---------------------------------------------------------------------------
// Joint training
// ---------------------------------------------------------------------------

namespace {

struct JointData {
    Matrix x_visual;                       // items x D_m
    Matrix x_textual;                      // items x D_e
    std::vector<int> y;                    // labels per item
    std::vector<std::pair<int, int>> train_used;  // train minus validation slice
    std::vector<std::vector<int>> train_used_by_user;
    std::vector<std::vector<int>> val_by_user;
    std::vector<std::vector<char>> positive;  // train positives bitmap per user
};

JointData prepare_joint_data(const InteractionCorpus& corpus, const SemanticLabels& labels,
                             const GenericFeatureMatrix& visual,
                             const GenericFeatureMatrix& textual, const TrainConfig& config,
                             Rng& rng) {
    if (!corpus.has_split())
        throw ValidationError("train_joint: corpus has no train/test split");
    JointData data;
    data.x_visual = visual.aligned(corpus);
    data.x_textual = textual.aligned(corpus);
    data.y = labels.aligned(corpus);

    data.positive.assign(std::size_t(corpus.num_users()),
                         std::vector<char>(std::size_t(corpus.num_items()), 0));
    for (const auto& [u, i] : corpus.train) data.positive[std::size_t(u)][std::size_t(i)] = 1;

    // Validation slice: val_fraction of each user's train interactions.
    auto train_by_user = corpus.train_items_by_user();
    data.train_used_by_user.resize(train_by_user.size());
    data.val_by_user.resize(train_by_user.size());
    for (int u = 0; u < corpus.num_users(); ++u) {
        auto items = train_by_user[std::size_t(u)];
        if (items.empty()) continue;
        Rng urng = rng.fork(40000 + std::uint64_t(u));
        urng.shuffle(items.begin(), items.end());
        int n_val = int(std::lround(config.val_fraction * double(items.size())));
        n_val = std::min(n_val, int(items.size()) - 1);
        for (std::size_t j = 0; j < items.size(); ++j) {
            if (int(j) < n_val) {
                data.val_by_user[std::size_t(u)].push_back(items[j]);
            } else {
                data.train_used_by_user[std::size_t(u)].push_back(items[j]);
                data.train_used.emplace_back(u, items[j]);
            }
        }
    }
    return data;
}

int sample_negative_for(const std::vector<char>& positive, int num_items, Rng& rng) {
    // Rejection sampling over the complement of the user's train positives.
    for (int tries = 0; tries < 10000; ++tries) {
        const int item = int(rng.next(std::uint64_t(num_items)));
        if (!positive[std::size_t(item)]) return item;
    }
    throw ValidationError("negative sampling failed: user has interacted with every item");
}

double mean_fd_all_items(const TeacherModel& teacher, const StudentModel& student,
                         const Matrix& x_visual, const Matrix& x_textual) {
    Matrix ft_m = teacher.visual.forward(x_visual);
    Matrix ft_e = teacher.textual.forward(x_textual);
    Matrix fs_m = student_extract(student.visual, x_visual);
    Matrix fs_e = student_extract(student.textual, x_textual);
    return fd_loss(ft_m, fs_m, ft_e, fs_e);
}

}  // namespace

JointTrainResult train_joint(const InteractionCorpus& corpus, const SemanticLabels& labels,
                             const GenericFeatureMatrix& visual,
                             const GenericFeatureMatrix& textual, const TeacherModel& teacher,
                             AblationVariant variant, const TrainConfig& config) {
    config.validate();
    if (teacher.config.num_classes != labels.num_classes())
        throw ConfigError("train_joint: teacher checkpoint class count differs from labels");
    if (teacher.config.feature_dim != config.feature_dim)
        throw ConfigError("train_joint: teacher checkpoint feature_dim differs from config");
    if (teacher.config.visual_dim != visual.dim || teacher.config.textual_dim != textual.dim)
        throw ConfigError("train_joint: teacher checkpoint input dims differ from features");

    JointTrainResult result;
    result.teacher = teacher;
    TeacherModel& T = result.teacher;

    const bool freeze = config.teacher_mode == TeacherMode::PretrainFreeze;
    const bool use_ld = variant != AblationVariant::FdOnly && variant != AblationVariant::NoKd;
    const bool use_fd = variant != AblationVariant::LdOnly && variant != AblationVariant::NoKd;
    const bool use_ce = variant != AblationVariant::NoKd;
    const double lambda1 = variant == AblationVariant::NoKd ? 0.0 : config.lambda1;
    const double lambda2 = variant == AblationVariant::NoKd ? 0.0 : config.lambda2;
    const LossWeights weights{lambda1, lambda2};
    const double tau = config.tau_transfer;
    const int d = config.feature_dim;

    Rng rng(config.seed);
    JointData data = prepare_joint_data(corpus, labels, visual, textual, config, rng);
    const int num_items = corpus.num_items();

    StudentConfig sc;
    sc.visual_dim = visual.dim;
    sc.textual_dim = textual.dim;
    sc.feature_dim = d;
    result.student = StudentModel(sc);
    StudentModel& student = result.student;
    student.init(rng);
    check_paired_dims(T.visual, student.visual);
    check_paired_dims(T.textual, student.textual);

    result.backbone = make_backbone(config.backbone);
    Backbone& backbone = *result.backbone;
    backbone.init(corpus.num_users(), num_items, 2 * d, config.embed_dim, rng);

    ParamStore store;
    student.collect_params(store);
    backbone.collect_params(store);
    if (!freeze) T.collect_params(store);
    AdamOptimizer opt(config.learning_rate);
    opt.attach(store);

    // Frozen-teacher caches over all items.
    Matrix ft_m_all, ft_e_all, pt_m_all, pt_e_all;
    if (freeze) {
        ft_m_all = T.visual.forward(data.x_visual);
        ft_e_all = T.textual.forward(data.x_textual);
        if (use_ld) {
            pt_m_all = classify(T.cls_visual, ft_m_all, tau);
            pt_e_all = classify(T.cls_textual, ft_e_all, tau);
        }
    }

    result.fd_initial = mean_fd_all_items(T, student, data.x_visual, data.x_textual);

    auto student_item_feats = [&]() {
        Matrix fs_m = student_extract(student.visual, data.x_visual);
        Matrix fs_e = student_extract(student.textual, data.x_textual);
        Matrix feats(fs_m.rows(), 2 * d);
        feats << fs_m, fs_e;
        return feats;
    };

    bool have_val = false;
    for (const auto& v : data.val_by_user)
        if (!v.empty()) have_val = true;

    std::vector<double> best_snapshot = store.snapshot_values();
    std::vector<double> last_good = best_snapshot;
    double best_recall = -1.0;
    int best_epoch = 0;
    int step_index = 0;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        Rng erng = rng.fork(20000 + std::uint64_t(epoch));
        std::vector<std::pair<int, int>> order = data.train_used;
        erng.shuffle(order.begin(), order.end());

        bool bad_step = false;
        for (std::size_t start = 0; start < order.size();
             start += std::size_t(config.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + std::size_t(config.batch_size));
            std::vector<int> users, pos, neg;
            users.reserve(stop - start);
            for (std::size_t t = start; t < stop; ++t) {
                const auto& [u, i] = order[t];
                users.push_back(u);
                pos.push_back(i);
                neg.push_back(sample_negative_for(data.positive[std::size_t(u)], num_items, erng));
            }
            TripletBatch batch = TripletBatch::build(users, pos, neg);
            const Matrix xm = gather_rows(data.x_visual, batch.items);
            const Matrix xe = gather_rows(data.x_textual, batch.items);
            const std::vector<int> yb = gather_labels(data.y, batch.items);

            student.zero_grad();
            backbone.zero_grad();
            T.zero_grad();

            double rec = 0.0, ld = 0.0, fd = 0.0, tce = 0.0, fce = 0.0;
            try {
                Matrix fs_m = student.visual.forward_cached(xm);
                Matrix fs_e = student.textual.forward_cached(xe);
                Matrix feats(fs_m.rows(), 2 * d);
                feats << fs_m, fs_e;

                Matrix d_feats;
                rec = backbone.rec_loss_backward(batch, feats, config.weight_decay, d_feats);
                Matrix d_fs_m = d_feats.leftCols(d);
                Matrix d_fs_e = d_feats.rightCols(d);

                // Teacher values for the batch items (frozen: cached rows).
                Matrix ft_m, ft_e, pt_m, pt_e;
                AffineCache t_cls_m_cache, t_cls_e_cache;
                if (freeze) {
                    ft_m = gather_rows(ft_m_all, batch.items);
                    ft_e = gather_rows(ft_e_all, batch.items);
                    if (use_ld) {
                        pt_m = gather_rows(pt_m_all, batch.items);
                        pt_e = gather_rows(pt_e_all, batch.items);
                    }
                } else {
                    ft_m = T.visual.forward_cached(xm);
                    ft_e = T.textual.forward_cached(xe);
                    if (use_ld) {
                        pt_m = temp_softmax_rows(T.cls_visual.logits(ft_m), tau);
                        pt_e = temp_softmax_rows(T.cls_textual.logits(ft_e), tau);
                    }
                }

                if (use_fd) {
                    fd = fd_loss(ft_m, fs_m, ft_e, fs_e);
                    d_fs_m += lambda1 * sq_dist_grad(fs_m, ft_m);
                    d_fs_e += lambda1 * sq_dist_grad(fs_e, ft_e);
                }

                const bool student_ce = use_ce && freeze;
                if (use_ld || student_ce) {
                    AffineCache cls_m_cache, cls_e_cache;
                    Matrix logits_m = T.cls_visual.logits_cached(fs_m, cls_m_cache);
                    Matrix logits_e = T.cls_textual.logits_cached(fs_e, cls_e_cache);
                    Matrix dlogits_m = Matrix::Zero(logits_m.rows(), logits_m.cols());
                    Matrix dlogits_e = Matrix::Zero(logits_e.rows(), logits_e.cols());
                    if (use_ld) {
                        Matrix ps_m = temp_softmax_rows(logits_m, tau);
                        Matrix ps_e = temp_softmax_rows(logits_e, tau);
                        ld = ld_loss(pt_m, ps_m, pt_e, ps_e);
                        dlogits_m += temp_softmax_backward(
                            ps_m, lambda1 * sq_dist_grad(ps_m, pt_m), tau);
                        dlogits_e += temp_softmax_backward(
                            ps_e, lambda1 * sq_dist_grad(ps_e, pt_e), tau);
                    }
                    if (student_ce) {
                        Matrix p1_m = temp_softmax_rows(logits_m, 1.0);
                        Matrix p1_e = temp_softmax_rows(logits_e, 1.0);
                        tce = teacher_ce(p1_m, p1_e, yb);
                        dlogits_m += lambda2 * 0.5 * ce_softmax_grad_logits(p1_m, yb, 1.0);
                        dlogits_e += lambda2 * 0.5 * ce_softmax_grad_logits(p1_e, yb, 1.0);
                    }
                    d_fs_m += affine_backward(T.cls_visual.affine, cls_m_cache, dlogits_m);
                    d_fs_e += affine_backward(T.cls_textual.affine, cls_e_cache, dlogits_e);
                }

                if (student_ce && T.config.with_fusion) {
                    AffineCache fuse_cache_s, cls_u_cache;
                    Matrix fu = fuse_cached(T.fusion, fs_m, fs_e, fuse_cache_s);
                    Matrix pu = temp_softmax_rows(T.cls_fusion.logits_cached(fu, cls_u_cache), 1.0);
                    fce = fused_ce(pu, yb);
                    Matrix d_fu = affine_backward(T.cls_fusion.affine, cls_u_cache,
                                                  lambda2 * ce_softmax_grad_logits(pu, yb, 1.0));
                    Matrix d_cat = affine_backward(T.fusion.affine, fuse_cache_s, d_fu);
                    d_fs_m += d_cat.leftCols(d);
                    d_fs_e += d_cat.rightCols(d);
                }

                // teacher_mode=joint: the lambda2 CE term stays on the teacher
                // path and keeps updating the teacher during stage 2.
                if (use_ce && !freeze) {
                    AffineCache cache_m, cache_e;
                    Matrix pm = temp_softmax_rows(T.cls_visual.logits_cached(ft_m, cache_m), 1.0);
                    Matrix pe = temp_softmax_rows(T.cls_textual.logits_cached(ft_e, cache_e), 1.0);
                    tce = teacher_ce(pm, pe, yb);
                    Matrix d_ft_m =
                        affine_backward(T.cls_visual.affine, cache_m,
                                        lambda2 * 0.5 * ce_softmax_grad_logits(pm, yb, 1.0));
                    Matrix d_ft_e =
                        affine_backward(T.cls_textual.affine, cache_e,
                                        lambda2 * 0.5 * ce_softmax_grad_logits(pe, yb, 1.0));
                    if (T.config.with_fusion) {
                        AffineCache cache_u, cache_cu;
                        Matrix fu = fuse_cached(T.fusion, ft_m, ft_e, cache_u);
                        Matrix pu =
                            temp_softmax_rows(T.cls_fusion.logits_cached(fu, cache_cu), 1.0);
                        fce = fused_ce(pu, yb);
                        Matrix d_fu =
                            affine_backward(T.cls_fusion.affine, cache_cu,
                                            lambda2 * ce_softmax_grad_logits(pu, yb, 1.0));
                        Matrix d_cat = affine_backward(T.fusion.affine, cache_u, d_fu);
                        d_ft_m += d_cat.leftCols(d);
                        d_ft_e += d_cat.rightCols(d);
                    }
                    T.visual.backward(d_ft_m);
                    T.textual.backward(d_ft_e);
                }

                student.visual.backward(d_fs_m);
                student.textual.backward(d_fs_e);

                result.log.push_back(total_loss(rec, tce, fce, ld, fd, weights));
            } catch (const NumericError&) {
                bad_step = true;
                break;
            }
            ++step_index;
            opt.step(store);
            if (!store.values_finite()) {
                bad_step = true;
                break;
            }
        }

        if (bad_step) {
            store.restore_values(last_good);
            result.diverged = true;
            result.epochs_run = epoch + 1;
            break;
        }
        last_good = store.snapshot_values();
        result.epochs_run = epoch + 1;

        if (!have_val) {
            // No validation slice (tiny per-user trains): run to max_epochs
            // and keep the final parameters.
            best_snapshot = store.snapshot_values();
            best_epoch = epoch;
            continue;
        }
        MetricReport val = evaluate_split(backbone, student_item_feats(),
                                          data.train_used_by_user, data.val_by_user, num_items,
                                          config.eval_k);
        const double recall = val.users_evaluated > 0 ? val.recall_at_k : 0.0;
        if (recall > best_recall) {
            best_recall = recall;
            best_epoch = epoch;
            best_snapshot = store.snapshot_values();
        }
        if (epoch - best_epoch >= config.patience) break;
    }

    if (!result.diverged) store.restore_values(best_snapshot);
    result.best_val_recall = best_recall < 0.0 ? 0.0 : best_recall;
    result.best_epoch = best_epoch;
    result.fd_final = mean_fd_all_items(T, student, data.x_visual, data.x_textual);
    return result;
}

// ---------------------------------------------------------------------------
// Ablation suite
// ---------------------------------------------------------------------------

AblationTable run_ablation_suite(const InteractionCorpus& corpus, const SemanticLabels& labels,
                                 const GenericFeatureMatrix& visual,
                                 const GenericFeatureMatrix& textual, const TrainConfig& config,
                                 int num_seeds) {
    if (num_seeds < 1) throw ValidationError("run_ablation_suite: need at least one seed");
    AblationTable table;
    table.k = config.eval_k;
    for (int s = 0; s < num_seeds; ++s) table.seeds.push_back(config.seed + std::uint64_t(s));
    for (auto variant : all_variants()) {
        AblationRow row;
        row.variant = variant;
        table.rows.push_back(row);
    }

    const Matrix x_visual = visual.aligned(corpus);
    const Matrix x_textual = textual.aligned(corpus);

    for (std::uint64_t seed : table.seeds) {
        TrainConfig cfg = config;
        cfg.seed = seed;

        // One teacher of each flavor per seed, shared across the variants
        // that use it.
        TeacherModel teacher_std, teacher_nofusion, teacher_shallow;
        try {
            teacher_std = train_teacher(corpus, labels, visual, textual, cfg, true, false).model;
            teacher_nofusion =
                train_teacher(corpus, labels, visual, textual, cfg, false, false).model;
            teacher_shallow =
                train_teacher(corpus, labels, visual, textual, cfg, true, true).model;
        } catch (const std::exception& e) {
            for (auto& row : table.rows)
                if (row.failure.empty()) row.failure = std::string("teacher: ") + e.what();
            break;
        }

        for (auto& row : table.rows) {
            if (!row.failure.empty()) continue;
            const TeacherModel& T = row.variant == AblationVariant::NoFusion ? teacher_nofusion
                                    : row.variant == AblationVariant::ShallowTeacher
                                        ? teacher_shallow
                                        : teacher_std;
            try {
                auto joint = train_joint(corpus, labels, visual, textual, T, row.variant, cfg);
                MetricReport report = evaluate(*joint.backbone, joint.student, corpus, x_visual,
                                               x_textual, cfg.eval_k);
                row.recalls.push_back(report.recall_at_k);
                row.ndcgs.push_back(report.ndcg_at_k);
            } catch (const std::exception& e) {
                row.failure = e.what();
            }
        }
    }

    for (auto& row : table.rows) {
        if (row.recalls.empty()) continue;
        double r = 0.0, n = 0.0;
        for (double v : row.recalls) r += v;
        for (double v : row.ndcgs) n += v;
        row.mean_recall = r / double(row.recalls.size());
        row.mean_ndcg = n / double(row.ndcgs.size());
    }
    return table;
}

std::string ablation_table_tsv(const AblationTable& table) {
    std::ostringstream out;
    out << "variant\trecall@" << table.k << "\tndcg@" << table.k << "\tseeds\tstatus\n";
    char buf[64];
    for (const auto& row : table.rows) {
        out << variant_name(row.variant) << '\t';
        if (row.failure.empty() && !row.recalls.empty()) {
            std::snprintf(buf, sizeof buf, "%.2f\t%.2f", 100.0 * row.mean_recall,
                          100.0 * row.mean_ndcg);
            out << buf << '\t' << row.recalls.size() << "\tok\n";
        } else {
            out << "-\t-\t0\tfailed: " << (row.failure.empty() ? "no runs" : row.failure) << '\n';
        }
    }
    return out.str();
}

}  // namespace sgfd
