#include "sgfd/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "sgfd/errors.hpp"
#include "sgfd/io.hpp"
#include "sgfd/rng.hpp"

namespace sgfd {

std::string modality_name(Modality m) {
    return m == Modality::Visual ? "visual" : "textual";
}

Modality modality_from_name(const std::string& name) {
    if (name == "visual") return Modality::Visual;
    if (name == "textual") return Modality::Textual;
    throw ParseError("unknown modality '" + name + "' (expected visual|textual)");
}

namespace {

std::vector<std::vector<int>> group_by_user(const InteractionCorpus& corpus,
                                            const std::vector<std::pair<int, int>>& pairs) {
    std::vector<std::vector<int>> out(std::size_t(corpus.num_users()));
    for (const auto& [u, i] : pairs) out[std::size_t(u)].push_back(i);
    return out;
}

}  // namespace

std::vector<std::vector<int>> InteractionCorpus::items_by_user() const {
    return group_by_user(*this, interactions);
}

std::vector<std::vector<int>> InteractionCorpus::train_items_by_user() const {
    return group_by_user(*this, train);
}

std::vector<std::vector<int>> InteractionCorpus::test_items_by_user() const {
    return group_by_user(*this, test);
}

int SemanticLabels::label_of(const std::string& item_id) const {
    auto it = labels.find(item_id);
    if (it == labels.end())
        throw ValidationError("no semantic label for item '" + item_id + "'");
    return it->second;
}

std::vector<int> SemanticLabels::aligned(const InteractionCorpus& corpus) const {
    std::vector<int> out;
    out.reserve(corpus.item_ids.size());
    for (const auto& id : corpus.item_ids) out.push_back(label_of(id));
    return out;
}

Eigen::MatrixXd GenericFeatureMatrix::aligned(const InteractionCorpus& corpus) const {
    Eigen::MatrixXd out(corpus.num_items(), dim);
    for (int i = 0; i < corpus.num_items(); ++i) {
        auto it = rows.find(corpus.item_ids[std::size_t(i)]);
        if (it == rows.end())
            throw ValidationError("no " + modality_name(modality) + " feature row for item '" +
                                  corpus.item_ids[std::size_t(i)] + "'");
        if (it->second.size() != dim)
            throw ValidationError("feature width mismatch for item '" +
                                  corpus.item_ids[std::size_t(i)] + "'");
        out.row(i) = it->second.transpose();
    }
    return out;
}

std::pair<InteractionCorpus, SemanticLabels> load_corpus(const std::string& interactions_path,
                                                         const std::string& labels_path) {
    InteractionCorpus corpus;
    auto records = read_interactions_file(interactions_path);
    std::set<std::pair<int, int>> seen;
    for (const auto& rec : records) {
        auto [uit, unew] = corpus.user_index.try_emplace(rec.user, corpus.num_users());
        if (unew) corpus.user_ids.push_back(rec.user);
        auto [iit, inew] = corpus.item_index.try_emplace(rec.item, corpus.num_items());
        if (inew) corpus.item_ids.push_back(rec.item);
        // Ratings are binarized to implicit feedback; duplicates collapse.
        if (seen.emplace(uit->second, iit->second).second)
            corpus.interactions.emplace_back(uit->second, iit->second);
    }

    auto raw_labels = read_labels_file(labels_path);
    // Densify by sorted label string so class indices are stable.
    std::set<std::string> classes;
    for (const auto& [item, cls] : raw_labels) classes.insert(cls);
    SemanticLabels labels;
    labels.class_names.assign(classes.begin(), classes.end());
    std::unordered_map<std::string, int> class_index;
    for (int c = 0; c < int(labels.class_names.size()); ++c)
        class_index[labels.class_names[std::size_t(c)]] = c;
    for (const auto& [item, cls] : raw_labels) labels.labels[item] = class_index[cls];

    for (const auto& id : corpus.item_ids)
        if (!labels.labels.count(id))
            throw ValidationError("item '" + id + "' has no label in " + labels_path);

    return {std::move(corpus), std::move(labels)};
}

InteractionCorpus k_core_filter(const InteractionCorpus& corpus, int k) {
    if (k < 1) throw ValidationError("k_core_filter: k must be >= 1");

    std::vector<char> user_alive(std::size_t(corpus.num_users()), 1);
    std::vector<char> item_alive(std::size_t(corpus.num_items()), 1);
    std::vector<int> user_deg(std::size_t(corpus.num_users()), 0);
    std::vector<int> item_deg(std::size_t(corpus.num_items()), 0);
    for (const auto& [u, i] : corpus.interactions) {
        ++user_deg[std::size_t(u)];
        ++item_deg[std::size_t(i)];
    }

    bool changed = true;
    while (changed) {
        changed = false;
        for (int u = 0; u < corpus.num_users(); ++u) {
            if (user_alive[std::size_t(u)] && user_deg[std::size_t(u)] < k) {
                user_alive[std::size_t(u)] = 0;
                changed = true;
            }
        }
        for (int i = 0; i < corpus.num_items(); ++i) {
            if (item_alive[std::size_t(i)] && item_deg[std::size_t(i)] < k) {
                item_alive[std::size_t(i)] = 0;
                changed = true;
            }
        }
        if (changed) {
            std::fill(user_deg.begin(), user_deg.end(), 0);
            std::fill(item_deg.begin(), item_deg.end(), 0);
            for (const auto& [u, i] : corpus.interactions) {
                if (user_alive[std::size_t(u)] && item_alive[std::size_t(i)]) {
                    ++user_deg[std::size_t(u)];
                    ++item_deg[std::size_t(i)];
                }
            }
        }
    }

    InteractionCorpus out;
    for (int u = 0; u < corpus.num_users(); ++u) {
        if (user_alive[std::size_t(u)] && user_deg[std::size_t(u)] > 0) {
            out.user_index[corpus.user_ids[std::size_t(u)]] = out.num_users();
            out.user_ids.push_back(corpus.user_ids[std::size_t(u)]);
        }
    }
    for (int i = 0; i < corpus.num_items(); ++i) {
        if (item_alive[std::size_t(i)] && item_deg[std::size_t(i)] > 0) {
            out.item_index[corpus.item_ids[std::size_t(i)]] = out.num_items();
            out.item_ids.push_back(corpus.item_ids[std::size_t(i)]);
        }
    }
    for (const auto& [u, i] : corpus.interactions) {
        if (user_alive[std::size_t(u)] && item_alive[std::size_t(i)]) {
            out.interactions.emplace_back(out.user_index.at(corpus.user_ids[std::size_t(u)]),
                                          out.item_index.at(corpus.item_ids[std::size_t(i)]));
        }
    }

    if (out.interactions.empty()) {
        std::ostringstream msg;
        msg << "k_core_filter: corpus is empty after " << k << "-core filtering";
        throw ValidationError(msg.str());
    }
    return out;
}

InteractionCorpus split_corpus(const InteractionCorpus& corpus, double train_fraction,
                               std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ValidationError("split_corpus: train_fraction must be in (0, 1)");

    InteractionCorpus out = corpus;
    out.train.clear();
    out.test.clear();

    auto per_user = corpus.items_by_user();
    Rng base(seed);
    for (int u = 0; u < corpus.num_users(); ++u) {
        auto items = per_user[std::size_t(u)];
        if (items.empty()) continue;
        Rng rng = base.fork(std::uint64_t(u));
        rng.shuffle(items.begin(), items.end());
        const auto n = items.size();
        const auto n_train = std::size_t(std::ceil(train_fraction * double(n)));
        for (std::size_t j = 0; j < n; ++j) {
            if (j < n_train)
                out.train.emplace_back(u, items[j]);
            else
                out.test.emplace_back(u, items[j]);
        }
    }
    return out;
}

SemanticLabels restrict_labels(const SemanticLabels& labels, const InteractionCorpus& corpus) {
    SemanticLabels out;
    std::set<int> used;
    for (const auto& id : corpus.item_ids) used.insert(labels.label_of(id));
    std::unordered_map<int, int> remap;
    for (int old_c : used) {
        remap[old_c] = int(out.class_names.size());
        out.class_names.push_back(labels.class_names[std::size_t(old_c)]);
    }
    for (const auto& id : corpus.item_ids) out.labels[id] = remap[labels.label_of(id)];
    return out;
}

namespace {

std::string zero_pad(const char* prefix, int value, int width) {
    std::ostringstream s;
    s << prefix;
    std::string digits = std::to_string(value);
    for (int i = int(digits.size()); i < width; ++i) s << '0';
    s << digits;
    return s.str();
}

}  // namespace

SynthCorpus synth_corpus(const SynthConfig& config) {
    if (config.num_users <= 0 || config.num_items <= 0 || config.num_classes <= 0)
        throw ValidationError("synth_corpus: counts must be positive");
    if (config.num_classes > config.num_items)
        throw ValidationError("synth_corpus: num_classes exceeds num_items");
    if (config.noise < 0.0) throw ValidationError("synth_corpus: noise must be >= 0");

    SynthCorpus out;
    auto& corpus = out.corpus;

    for (int u = 0; u < config.num_users; ++u) {
        std::string id = zero_pad("u", u, 5);
        corpus.user_index[id] = u;
        corpus.user_ids.push_back(std::move(id));
    }
    for (int i = 0; i < config.num_items; ++i) {
        std::string id = zero_pad("i", i, 5);
        corpus.item_index[id] = i;
        corpus.item_ids.push_back(std::move(id));
    }

    // Round-robin class assignment keeps every class populated.
    std::vector<int> item_class(std::size_t(config.num_items));
    for (int i = 0; i < config.num_items; ++i)
        item_class[std::size_t(i)] = i % config.num_classes;
    for (int c = 0; c < config.num_classes; ++c)
        out.labels.class_names.push_back(zero_pad("class", c, 2));
    for (int i = 0; i < config.num_items; ++i)
        out.labels.labels[corpus.item_ids[std::size_t(i)]] = item_class[std::size_t(i)];

    std::vector<std::vector<int>> class_items(std::size_t(config.num_classes));
    for (int i = 0; i < config.num_items; ++i)
        class_items[std::size_t(item_class[std::size_t(i)])].push_back(i);

    Rng root(config.seed);

    // Within-class popularity: Zipf weights over a per-class rank order
    // (skew 0 is uniform). Cumulative tables drive weighted draws.
    std::vector<std::vector<double>> class_cdf(std::size_t(config.num_classes));
    for (int c = 0; c < config.num_classes; ++c) {
        const auto& pool = class_items[std::size_t(c)];
        auto& cdf = class_cdf[std::size_t(c)];
        double total = 0.0;
        for (std::size_t r = 0; r < pool.size(); ++r) {
            total += std::pow(double(r + 1), -config.popularity_skew);
            cdf.push_back(total);
        }
        for (auto& v : cdf) v /= total;
    }
    auto draw_from_class = [&](int c, Rng& rng) {
        const auto& pool = class_items[std::size_t(c)];
        if (config.popularity_skew == 0.0) return pool[std::size_t(rng.next(pool.size()))];
        const auto& cdf = class_cdf[std::size_t(c)];
        const double u = rng.uniform();
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        const std::size_t r = std::min(std::size_t(it - cdf.begin()), pool.size() - 1);
        return pool[r];
    };

    // Features: class prototype + Gaussian noise, per modality. The first
    // distractor_dims coordinates have a zero prototype and boosted noise.
    auto make_features = [&](Modality modality, int dim, std::uint64_t stream) {
        GenericFeatureMatrix fm;
        fm.modality = modality;
        fm.dim = dim;
        const int dd = std::min(config.distractor_dims, dim);
        Rng rng = root.fork(stream);
        Eigen::MatrixXd protos(config.num_classes, dim);
        for (int c = 0; c < config.num_classes; ++c)
            for (int d = 0; d < dim; ++d)
                protos(c, d) = d < dd ? 0.0 : rng.normal(0.0, config.proto_scale);
        for (int i = 0; i < config.num_items; ++i) {
            Eigen::VectorXd row = protos.row(item_class[std::size_t(i)]).transpose();
            for (int d = 0; d < dim; ++d)
                row(d) += rng.normal(0.0, d < dd ? config.noise * config.distractor_boost
                                                 : config.noise);
            fm.rows[corpus.item_ids[std::size_t(i)]] = std::move(row);
        }
        return fm;
    };
    out.visual = make_features(Modality::Visual, config.visual_dim, 101);
    out.textual = make_features(Modality::Textual, config.textual_dim, 202);

    // Interactions: each user prefers one or two classes and interacts mostly
    // within them.
    Rng irng = root.fork(303);
    std::set<std::pair<int, int>> seen;
    for (int u = 0; u < config.num_users; ++u) {
        const int num_pref = 1 + int(irng.next(2));
        std::vector<int> prefs;
        prefs.push_back(int(irng.next(std::uint64_t(config.num_classes))));
        if (num_pref == 2) {
            int second = int(irng.next(std::uint64_t(config.num_classes)));
            if (second != prefs[0]) prefs.push_back(second);
        }
        const int want = std::min(config.interactions_per_user, config.num_items);
        int made = 0;
        int attempts = 0;
        const int max_attempts = 50 * want + 100;
        while (made < want && attempts < max_attempts) {
            ++attempts;
            int item;
            if (irng.uniform() < config.in_class_prob) {
                item = draw_from_class(int(prefs[std::size_t(irng.next(prefs.size()))]), irng);
            } else {
                item = int(irng.next(std::uint64_t(config.num_items)));
            }
            if (seen.emplace(u, item).second) {
                corpus.interactions.emplace_back(u, item);
                ++made;
            }
        }
    }

    out.corpus = split_corpus(corpus, config.train_fraction, config.seed ^ 0x5eedULL);
    return out;
}

}  // namespace sgfd
