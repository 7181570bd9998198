#include "kglp/latent.hpp"

#include <bit>
#include <fstream>

#include <json.hpp>

#include "kglp/rng.hpp"

namespace kglp {

namespace {

Eigen::VectorXd apply_g(Nonlinearity g, const Eigen::VectorXd& u) {
    if (g == Nonlinearity::identity) return u;
    return u.array().tanh().matrix();
}

Eigen::VectorXd apply_g_prime(Nonlinearity g, const Eigen::VectorXd& u) {
    if (g == Nonlinearity::identity) return Eigen::VectorXd::Ones(u.size());
    return (1.0 - u.array().tanh().square()).matrix();
}

Eigen::VectorXd sign_of(const Eigen::VectorXd& v) {
    return v.unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

}  // namespace

std::string model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::rescal: return "rescal";
        case ModelKind::e_mlp: return "e-mlp";
        case ModelKind::er_mlp: return "er-mlp";
        case ModelKind::ntn: return "ntn";
        case ModelKind::se: return "se";
        case ModelKind::transe: return "transe";
    }
    return "unknown";
}

ModelKind model_kind_from_name(const std::string& name) {
    if (name == "rescal") return ModelKind::rescal;
    if (name == "e-mlp" || name == "emlp") return ModelKind::e_mlp;
    if (name == "er-mlp" || name == "ermlp") return ModelKind::er_mlp;
    if (name == "ntn") return ModelKind::ntn;
    if (name == "se") return ModelKind::se;
    if (name == "transe") return ModelKind::transe;
    throw DataError("unknown model kind: " + name);
}

int LatentModel::num_entities() const {
    return static_cast<int>(std::visit([](const auto& p) { return p.entities.rows(); }, params));
}

int LatentModel::num_relations() const {
    return std::visit(
        [](const auto& p) -> int {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, RescalParams>) {
                return static_cast<int>(p.relation_weights.size());
            } else if constexpr (std::is_same_v<T, EmlpParams>) {
                return static_cast<int>(p.pair_maps.size());
            } else if constexpr (std::is_same_v<T, ErmlpParams>) {
                return static_cast<int>(p.relations.rows());
            } else if constexpr (std::is_same_v<T, NtnParams>) {
                return static_cast<int>(p.out_weights.size());
            } else if constexpr (std::is_same_v<T, SeParams>) {
                return static_cast<int>(p.subject_maps.size());
            } else {
                return static_cast<int>(p.relations.rows());
            }
        },
        params);
}

namespace {

void validate_config(const ModelConfig& cfg) {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw DataError(std::string("invalid model config: ") + what);
    };
    require(cfg.h_entity >= 1, "h_entity must be >= 1");
    switch (cfg.kind) {
        case ModelKind::rescal:
        case ModelKind::transe:
            break;
        case ModelKind::e_mlp:
            require(cfg.h_additive >= 1, "h_additive must be >= 1");
            break;
        case ModelKind::er_mlp:
            require(cfg.h_relation >= 1, "h_relation must be >= 1");
            require(cfg.h_combined >= 1, "h_combined must be >= 1");
            break;
        case ModelKind::ntn:
            require(cfg.h_additive >= 0 && cfg.h_bilinear >= 0, "ntn layer sizes must be >= 0");
            require(cfg.h_additive + cfg.h_bilinear >= 1, "ntn needs at least one hidden unit");
            break;
        case ModelKind::se:
            require(cfg.h_additive >= 1, "h_additive must be >= 1");
            break;
    }
}

LatentModel zero_model(const ModelConfig& cfg, int n_e, int n_r) {
    validate_config(cfg);
    if (n_e < 1 || n_r < 1) throw DataError("model needs at least one entity and one relation");
    LatentModel m;
    m.config = cfg;
    const int he = cfg.h_entity;
    switch (cfg.kind) {
        case ModelKind::rescal: {
            RescalParams p;
            p.entities = Eigen::MatrixXd::Zero(n_e, he);
            p.relation_weights.assign(static_cast<std::size_t>(n_r), Eigen::MatrixXd::Zero(he, he));
            m.params = std::move(p);
            break;
        }
        case ModelKind::e_mlp: {
            EmlpParams p;
            p.entities = Eigen::MatrixXd::Zero(n_e, he);
            p.pair_maps.assign(static_cast<std::size_t>(n_r),
                               Eigen::MatrixXd::Zero(2 * he, cfg.h_additive));
            p.out_weights.assign(static_cast<std::size_t>(n_r), Eigen::VectorXd::Zero(cfg.h_additive));
            m.params = std::move(p);
            break;
        }
        case ModelKind::er_mlp: {
            ErmlpParams p;
            p.entities = Eigen::MatrixXd::Zero(n_e, he);
            p.relations = Eigen::MatrixXd::Zero(n_r, cfg.h_relation);
            p.triple_map = Eigen::MatrixXd::Zero(2 * he + cfg.h_relation, cfg.h_combined);
            p.out_weights = Eigen::VectorXd::Zero(cfg.h_combined);
            m.params = std::move(p);
            break;
        }
        case ModelKind::ntn: {
            NtnParams p;
            p.entities = Eigen::MatrixXd::Zero(n_e, he);
            p.pair_maps.assign(static_cast<std::size_t>(n_r),
                               Eigen::MatrixXd::Zero(2 * he, cfg.h_additive));
            p.bilinear.assign(
                static_cast<std::size_t>(n_r),
                std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(cfg.h_bilinear),
                                             Eigen::MatrixXd::Zero(he, he)));
            p.out_weights.assign(static_cast<std::size_t>(n_r),
                                 Eigen::VectorXd::Zero(cfg.h_additive + cfg.h_bilinear));
            m.params = std::move(p);
            break;
        }
        case ModelKind::se: {
            SeParams p;
            p.entities = Eigen::MatrixXd::Zero(n_e, he);
            p.subject_maps.assign(static_cast<std::size_t>(n_r),
                                  Eigen::MatrixXd::Zero(cfg.h_additive, he));
            p.object_maps.assign(static_cast<std::size_t>(n_r),
                                 Eigen::MatrixXd::Zero(cfg.h_additive, he));
            m.params = std::move(p);
            break;
        }
        case ModelKind::transe: {
            TranseParams p;
            p.entities = Eigen::MatrixXd::Zero(n_e, he);
            p.relations = Eigen::MatrixXd::Zero(n_r, he);
            p.distance = cfg.distance;
            m.params = std::move(p);
            break;
        }
    }
    return m;
}

void check_triple(const LatentModel& m, const Triple& t) {
    if (t.subject < 0 || t.object < 0 || t.subject >= m.num_entities() ||
        t.object >= m.num_entities() || t.relation < 0 || t.relation >= m.num_relations()) {
        throw DataError("triple ids exceed model dimensions");
    }
}

}  // namespace

LatentModel init_model(const ModelConfig& cfg, int n_entities, int n_relations, std::uint64_t seed) {
    LatentModel m = zero_model(cfg, n_entities, n_relations);
    Rng rng(derive_seed(seed, "init-model"));
    const double sigma = 1.0 / std::sqrt(static_cast<double>(cfg.h_entity));
    Eigen::VectorXd values(flatten_parameters(m).size());
    for (Eigen::Index i = 0; i < values.size(); ++i) values[i] = sigma * rng.normal();
    assign_parameters(m, values);
    if (auto* p = std::get_if<TranseParams>(&m.params)) {
        for (Eigen::Index r = 0; r < p->entities.rows(); ++r) {
            const double norm = p->entities.row(r).norm();
            if (norm > 0) p->entities.row(r) /= norm;
        }
    }
    return m;
}

double score(const LatentModel& model, const Triple& t) {
    check_triple(model, t);
    const auto k = static_cast<std::size_t>(t.relation);
    const Nonlinearity g = model.config.g;
    return std::visit(
        [&](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            const Eigen::VectorXd ei = p.entities.row(t.subject).transpose();
            const Eigen::VectorXd ej = p.entities.row(t.object).transpose();
            if constexpr (std::is_same_v<T, RescalParams>) {
                return ei.dot(p.relation_weights[k] * ej);
            } else if constexpr (std::is_same_v<T, EmlpParams>) {
                Eigen::VectorXd pair(ei.size() + ej.size());
                pair << ei, ej;
                return p.out_weights[k].dot(apply_g(g, p.pair_maps[k].transpose() * pair));
            } else if constexpr (std::is_same_v<T, ErmlpParams>) {
                const Eigen::VectorXd rk = p.relations.row(t.relation).transpose();
                Eigen::VectorXd phi(ei.size() + ej.size() + rk.size());
                phi << ei, ej, rk;
                return p.out_weights.dot(apply_g(g, p.triple_map.transpose() * phi));
            } else if constexpr (std::is_same_v<T, NtnParams>) {
                const auto ha = p.pair_maps[k].cols();
                const auto hb = static_cast<Eigen::Index>(p.bilinear[k].size());
                Eigen::VectorXd z(ha + hb);
                if (ha > 0) {
                    Eigen::VectorXd pair(ei.size() + ej.size());
                    pair << ei, ej;
                    z.head(ha) = p.pair_maps[k].transpose() * pair;
                }
                for (Eigen::Index l = 0; l < hb; ++l) {
                    z[ha + l] = ei.dot(p.bilinear[k][static_cast<std::size_t>(l)] * ej);
                }
                return p.out_weights[k].dot(apply_g(g, z));
            } else if constexpr (std::is_same_v<T, SeParams>) {
                return -(p.subject_maps[k] * ei - p.object_maps[k] * ej).template lpNorm<1>();
            } else {
                const Eigen::VectorXd delta =
                    ei + p.relations.row(t.relation).transpose() - ej;
                return p.distance == TranseDistance::squared_euclidean ? -delta.squaredNorm()
                                                                       : -delta.template lpNorm<1>();
            }
        },
        model.params);
}

double transe_score_via_layers(const TranseParams& params, const Triple& t) {
    if (params.distance != TranseDistance::squared_euclidean) {
        throw DataError("layer form requires the squared Euclidean distance");
    }
    const Eigen::VectorXd ei = params.entities.row(t.subject).transpose();
    const Eigen::VectorXd ej = params.entities.row(t.object).transpose();
    if (std::abs(ei.norm() - 1.0) > 1e-9 || std::abs(ej.norm() - 1.0) > 1e-9) {
        throw DataError("layer form requires unit-norm entity rows");
    }
    const Eigen::VectorXd rk = params.relations.row(t.relation).transpose();
    const double h_additive = rk.dot(ei - ej); // A_k = [r_k; -r_k]
    const double h_bilinear = ei.dot(ej);      // B_k = I
    // The |e_i|^2 + |e_j|^2 terms equal 2 under the unit-norm precondition.
    return -(2.0 * h_additive - 2.0 * h_bilinear + rk.squaredNorm()) - 2.0;
}

long long param_count(const ModelConfig& cfg, long long n_e, long long n_r) {
    validate_config(cfg);
    const long long he = cfg.h_entity;
    const long long hr = cfg.h_relation;
    const long long ha = cfg.h_additive;
    const long long hb = cfg.h_bilinear;
    const long long hc = cfg.h_combined;
    switch (cfg.kind) {
        case ModelKind::rescal: return n_r * he * he + n_e * he;
        case ModelKind::e_mlp: return n_r * (ha + ha * 2 * he) + n_e * he;
        case ModelKind::er_mlp: return hc + hc * (2 * he + hr) + n_r * hr + n_e * he;
        case ModelKind::ntn: return n_r * hb * he * he + n_r * (hb + ha) + 2 * n_r * he * ha + n_e * he;
        case ModelKind::se: return 2 * n_r * he * ha + n_e * he;
        case ModelKind::transe: return n_r * he + n_e * he;
    }
    return 0;
}

LatentModel ntn_from_rescal(const LatentModel& rescal) {
    const auto* src = std::get_if<RescalParams>(&rescal.params);
    if (!src) throw DataError("ntn_from_rescal requires a rescal model");
    const int he = rescal.config.h_entity;
    const auto n_r = src->relation_weights.size();

    ModelConfig cfg;
    cfg.kind = ModelKind::ntn;
    cfg.h_entity = he;
    cfg.h_additive = 0;
    cfg.h_bilinear = he * he;
    cfg.g = Nonlinearity::identity;

    NtnParams p;
    p.entities = src->entities;
    p.pair_maps.assign(n_r, Eigen::MatrixXd::Zero(2 * he, 0));
    p.bilinear.resize(n_r);
    p.out_weights.resize(n_r);
    for (std::size_t k = 0; k < n_r; ++k) {
        // Slice l = b * he + a is the (a, b) indicator, matching column-major
        // vec() so that w_k' h_b = e_i' W_k e_j.
        p.bilinear[k].reserve(static_cast<std::size_t>(he) * static_cast<std::size_t>(he));
        for (int b = 0; b < he; ++b) {
            for (int a = 0; a < he; ++a) {
                Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(he, he);
                delta(a, b) = 1.0;
                p.bilinear[k].push_back(std::move(delta));
            }
        }
        p.out_weights[k] =
            Eigen::Map<const Eigen::VectorXd>(src->relation_weights[k].data(),
                                              static_cast<Eigen::Index>(he) * he);
    }

    LatentModel out;
    out.config = cfg;
    out.params = std::move(p);
    return out;
}

std::vector<std::pair<RelationId, double>> nearest_relations(const ErmlpParams& params, RelationId k,
                                                             int top) {
    const auto n_r = static_cast<RelationId>(params.relations.rows());
    if (k < 0 || k >= n_r) throw DataError("relation id out of range");
    std::vector<std::pair<RelationId, double>> all;
    all.reserve(static_cast<std::size_t>(n_r));
    for (RelationId r = 0; r < n_r; ++r) {
        if (r == k) continue;
        all.emplace_back(r, (params.relations.row(r) - params.relations.row(k)).squaredNorm());
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second < b.second : a.first < b.first;
    });
    if (top >= 0 && all.size() > static_cast<std::size_t>(top)) all.resize(static_cast<std::size_t>(top));
    return all;
}

ScoreGradient score_with_gradient(const LatentModel& model, const Triple& t) {
    check_triple(model, t);
    const auto k = static_cast<std::size_t>(t.relation);
    const Nonlinearity g = model.config.g;
    ScoreGradient out;
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            const Eigen::VectorXd ei = p.entities.row(t.subject).transpose();
            const Eigen::VectorXd ej = p.entities.row(t.object).transpose();
            if constexpr (std::is_same_v<T, RescalParams>) {
                const Eigen::MatrixXd& w = p.relation_weights[k];
                out.value = ei.dot(w * ej);
                out.d_subject = w * ej;
                out.d_object = w.transpose() * ei;
                out.d_relation_matrix = ei * ej.transpose();
            } else if constexpr (std::is_same_v<T, EmlpParams>) {
                const auto he = ei.size();
                Eigen::VectorXd pair(2 * he);
                pair << ei, ej;
                const Eigen::VectorXd u = p.pair_maps[k].transpose() * pair;
                out.value = p.out_weights[k].dot(apply_g(g, u));
                const Eigen::VectorXd v =
                    p.out_weights[k].cwiseProduct(apply_g_prime(g, u)); // d f / d u
                out.d_out_weights = apply_g(g, u);
                out.d_pair_map = pair * v.transpose();
                const Eigen::VectorXd d_pair = p.pair_maps[k] * v;
                out.d_subject = d_pair.head(he);
                out.d_object = d_pair.tail(he);
            } else if constexpr (std::is_same_v<T, ErmlpParams>) {
                const auto he = ei.size();
                const Eigen::VectorXd rk = p.relations.row(t.relation).transpose();
                Eigen::VectorXd phi(2 * he + rk.size());
                phi << ei, ej, rk;
                const Eigen::VectorXd u = p.triple_map.transpose() * phi;
                out.value = p.out_weights.dot(apply_g(g, u));
                const Eigen::VectorXd v = p.out_weights.cwiseProduct(apply_g_prime(g, u));
                out.d_out_weights = apply_g(g, u);
                out.d_triple_map = phi * v.transpose();
                const Eigen::VectorXd d_phi = p.triple_map * v;
                out.d_subject = d_phi.head(he);
                out.d_object = d_phi.segment(he, he);
                out.d_relation_vector = d_phi.tail(rk.size());
            } else if constexpr (std::is_same_v<T, NtnParams>) {
                const auto he = ei.size();
                const auto ha = p.pair_maps[k].cols();
                const auto hb = static_cast<Eigen::Index>(p.bilinear[k].size());
                Eigen::VectorXd pair(2 * he);
                pair << ei, ej;
                Eigen::VectorXd z(ha + hb);
                if (ha > 0) z.head(ha) = p.pair_maps[k].transpose() * pair;
                for (Eigen::Index l = 0; l < hb; ++l) {
                    z[ha + l] = ei.dot(p.bilinear[k][static_cast<std::size_t>(l)] * ej);
                }
                out.value = p.out_weights[k].dot(apply_g(g, z));
                const Eigen::VectorXd v = p.out_weights[k].cwiseProduct(apply_g_prime(g, z));
                out.d_out_weights = apply_g(g, z);
                out.d_subject = Eigen::VectorXd::Zero(he);
                out.d_object = Eigen::VectorXd::Zero(he);
                if (ha > 0) {
                    const Eigen::VectorXd va = v.head(ha);
                    out.d_pair_map = pair * va.transpose();
                    const Eigen::VectorXd d_pair = p.pair_maps[k] * va;
                    out.d_subject += d_pair.head(he);
                    out.d_object += d_pair.tail(he);
                } else {
                    out.d_pair_map = Eigen::MatrixXd::Zero(2 * he, 0);
                }
                out.d_bilinear.resize(static_cast<std::size_t>(hb));
                for (Eigen::Index l = 0; l < hb; ++l) {
                    const Eigen::MatrixXd& b = p.bilinear[k][static_cast<std::size_t>(l)];
                    const double vb = v[ha + l];
                    out.d_bilinear[static_cast<std::size_t>(l)] = vb * (ei * ej.transpose());
                    out.d_subject += vb * (b * ej);
                    out.d_object += vb * (b.transpose() * ei);
                }
            } else if constexpr (std::is_same_v<T, SeParams>) {
                const Eigen::VectorXd r = p.subject_maps[k] * ei - p.object_maps[k] * ej;
                out.value = -r.template lpNorm<1>();
                const Eigen::VectorXd s = sign_of(r);
                out.d_subject_map = -s * ei.transpose();
                out.d_object_map = s * ej.transpose();
                out.d_subject = -p.subject_maps[k].transpose() * s;
                out.d_object = p.object_maps[k].transpose() * s;
            } else {
                const Eigen::VectorXd rk = p.relations.row(t.relation).transpose();
                const Eigen::VectorXd delta = ei + rk - ej;
                if (p.distance == TranseDistance::squared_euclidean) {
                    out.value = -delta.squaredNorm();
                    out.d_subject = -2.0 * delta;
                    out.d_relation_vector = -2.0 * delta;
                    out.d_object = 2.0 * delta;
                } else {
                    out.value = -delta.template lpNorm<1>();
                    const Eigen::VectorXd s = sign_of(delta);
                    out.d_subject = -s;
                    out.d_relation_vector = -s;
                    out.d_object = s;
                }
            }
        },
        model.params);
    return out;
}

namespace {

// Adds scale * (d score / d params) for triple t into a model-shaped
// accumulator. Subject and object contributions accumulate, so self-loops
// (i == j) are handled by addition.
void scatter_gradient(LatentModel& acc, const Triple& t, const ScoreGradient& sg, double scale) {
    const auto k = static_cast<std::size_t>(t.relation);
    std::visit(
        [&](auto& p) {
            using T = std::decay_t<decltype(p)>;
            p.entities.row(t.subject) += scale * sg.d_subject.transpose();
            p.entities.row(t.object) += scale * sg.d_object.transpose();
            if constexpr (std::is_same_v<T, RescalParams>) {
                p.relation_weights[k] += scale * sg.d_relation_matrix;
            } else if constexpr (std::is_same_v<T, EmlpParams>) {
                p.pair_maps[k] += scale * sg.d_pair_map;
                p.out_weights[k] += scale * sg.d_out_weights;
            } else if constexpr (std::is_same_v<T, ErmlpParams>) {
                p.relations.row(t.relation) += scale * sg.d_relation_vector.transpose();
                p.triple_map += scale * sg.d_triple_map;
                p.out_weights += scale * sg.d_out_weights;
            } else if constexpr (std::is_same_v<T, NtnParams>) {
                if (p.pair_maps[k].size() > 0) p.pair_maps[k] += scale * sg.d_pair_map;
                for (std::size_t l = 0; l < p.bilinear[k].size(); ++l) {
                    p.bilinear[k][l] += scale * sg.d_bilinear[l];
                }
                p.out_weights[k] += scale * sg.d_out_weights;
            } else if constexpr (std::is_same_v<T, SeParams>) {
                p.subject_maps[k] += scale * sg.d_subject_map;
                p.object_maps[k] += scale * sg.d_object_map;
            } else {
                p.relations.row(t.relation) += scale * sg.d_relation_vector.transpose();
            }
        },
        acc.params);
}

}  // namespace

void apply_example_update(LatentModel& model, const Triple& t, const ScoreGradient& sg,
                          double scale, double learning_rate, double weight_decay) {
    const auto k = static_cast<std::size_t>(t.relation);
    const double lr = learning_rate;
    auto step = [&](auto& param, const auto& grad) {
        param -= lr * (scale * grad + weight_decay * param);
    };
    std::visit(
        [&](auto& p) {
            using T = std::decay_t<decltype(p)>;
            // Self-loops: decay each touched row once, gradient parts per slot.
            if (t.subject == t.object) {
                Eigen::VectorXd both = sg.d_subject + sg.d_object;
                p.entities.row(t.subject) -=
                    lr * (scale * both.transpose() + weight_decay * p.entities.row(t.subject));
            } else {
                p.entities.row(t.subject) -= lr * (scale * sg.d_subject.transpose() +
                                                   weight_decay * p.entities.row(t.subject));
                p.entities.row(t.object) -= lr * (scale * sg.d_object.transpose() +
                                                  weight_decay * p.entities.row(t.object));
            }
            if constexpr (std::is_same_v<T, RescalParams>) {
                step(p.relation_weights[k], sg.d_relation_matrix);
            } else if constexpr (std::is_same_v<T, EmlpParams>) {
                step(p.pair_maps[k], sg.d_pair_map);
                step(p.out_weights[k], sg.d_out_weights);
            } else if constexpr (std::is_same_v<T, ErmlpParams>) {
                p.relations.row(t.relation) -= lr * (scale * sg.d_relation_vector.transpose() +
                                                     weight_decay * p.relations.row(t.relation));
                step(p.triple_map, sg.d_triple_map);
                step(p.out_weights, sg.d_out_weights);
            } else if constexpr (std::is_same_v<T, NtnParams>) {
                if (p.pair_maps[k].size() > 0) step(p.pair_maps[k], sg.d_pair_map);
                for (std::size_t l = 0; l < p.bilinear[k].size(); ++l) {
                    step(p.bilinear[k][l], sg.d_bilinear[l]);
                }
                step(p.out_weights[k], sg.d_out_weights);
            } else if constexpr (std::is_same_v<T, SeParams>) {
                step(p.subject_maps[k], sg.d_subject_map);
                step(p.object_maps[k], sg.d_object_map);
            } else {
                p.relations.row(t.relation) -= lr * (scale * sg.d_relation_vector.transpose() +
                                                     weight_decay * p.relations.row(t.relation));
            }
        },
        model.params);
}

LatentModel gradient(const LatentModel& model, const Triple& t, LossKind loss, int label) {
    if (loss == LossKind::margin_ranking) {
        throw DataError("margin ranking gradient needs a (positive, negative) pair");
    }
    const ScoreGradient sg = score_with_gradient(model, t);
    const double p = sigmoid(sg.value);
    const double dloss_df = loss == LossKind::log_loss
                                ? p - static_cast<double>(label)
                                : 2.0 * (p - static_cast<double>(label)) * p * (1.0 - p);
    LatentModel acc = zero_model(model.config, model.num_entities(), model.num_relations());
    scatter_gradient(acc, t, sg, dloss_df);
    return acc;
}

LatentModel gradient(const LatentModel& model, const Triple& positive, const Triple& negative,
                     double margin) {
    if (margin <= 0) throw DataError("margin must be positive");
    const ScoreGradient sp = score_with_gradient(model, positive);
    const ScoreGradient sn = score_with_gradient(model, negative);
    LatentModel acc = zero_model(model.config, model.num_entities(), model.num_relations());
    if (margin + sn.value - sp.value > 0.0) {
        scatter_gradient(acc, positive, sp, -1.0);
        scatter_gradient(acc, negative, sn, +1.0);
    }
    return acc;
}

namespace {

template <typename Fn>
void visit_matrices(const LatentModel& model, Fn&& fn) {
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            fn("E", p.entities);
            if constexpr (std::is_same_v<T, RescalParams>) {
                for (std::size_t k = 0; k < p.relation_weights.size(); ++k) {
                    fn("W_" + std::to_string(k), p.relation_weights[k]);
                }
            } else if constexpr (std::is_same_v<T, EmlpParams>) {
                for (std::size_t k = 0; k < p.pair_maps.size(); ++k) {
                    fn("A_" + std::to_string(k), p.pair_maps[k]);
                    fn("w_" + std::to_string(k), p.out_weights[k]);
                }
            } else if constexpr (std::is_same_v<T, ErmlpParams>) {
                fn("R", p.relations);
                fn("C", p.triple_map);
                fn("w", p.out_weights);
            } else if constexpr (std::is_same_v<T, NtnParams>) {
                for (std::size_t k = 0; k < p.out_weights.size(); ++k) {
                    fn("A_" + std::to_string(k), p.pair_maps[k]);
                    for (std::size_t l = 0; l < p.bilinear[k].size(); ++l) {
                        fn("B_" + std::to_string(k) + "_" + std::to_string(l), p.bilinear[k][l]);
                    }
                    fn("w_" + std::to_string(k), p.out_weights[k]);
                }
            } else if constexpr (std::is_same_v<T, SeParams>) {
                for (std::size_t k = 0; k < p.subject_maps.size(); ++k) {
                    fn("As_" + std::to_string(k), p.subject_maps[k]);
                    fn("Ao_" + std::to_string(k), p.object_maps[k]);
                }
            } else {
                fn("R", p.relations);
            }
        },
        model.params);
}

template <typename Fn>
void visit_matrices_mutable(LatentModel& model, Fn&& fn) {
    std::visit(
        [&](auto& p) {
            using T = std::decay_t<decltype(p)>;
            fn(p.entities);
            if constexpr (std::is_same_v<T, RescalParams>) {
                for (auto& w : p.relation_weights) fn(w);
            } else if constexpr (std::is_same_v<T, EmlpParams>) {
                for (std::size_t k = 0; k < p.pair_maps.size(); ++k) {
                    fn(p.pair_maps[k]);
                    fn(p.out_weights[k]);
                }
            } else if constexpr (std::is_same_v<T, ErmlpParams>) {
                fn(p.relations);
                fn(p.triple_map);
                fn(p.out_weights);
            } else if constexpr (std::is_same_v<T, NtnParams>) {
                for (std::size_t k = 0; k < p.out_weights.size(); ++k) {
                    fn(p.pair_maps[k]);
                    for (auto& b : p.bilinear[k]) fn(b);
                    fn(p.out_weights[k]);
                }
            } else if constexpr (std::is_same_v<T, SeParams>) {
                for (std::size_t k = 0; k < p.subject_maps.size(); ++k) {
                    fn(p.subject_maps[k]);
                    fn(p.object_maps[k]);
                }
            } else {
                fn(p.relations);
            }
        },
        model.params);
}

}  // namespace

Eigen::VectorXd flatten_parameters(const LatentModel& model) {
    Eigen::Index total = 0;
    visit_matrices(model, [&](const std::string&, const auto& m) { total += m.size(); });
    Eigen::VectorXd out(total);
    Eigen::Index at = 0;
    visit_matrices(model, [&](const std::string&, const auto& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) out[at++] = m(r, c);
        }
    });
    return out;
}

void assign_parameters(LatentModel& model, const Eigen::VectorXd& values) {
    Eigen::Index at = 0;
    visit_matrices_mutable(model, [&](auto& m) {
        if (at + m.size() > values.size()) throw DataError("parameter vector too short");
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = values[at++];
        }
    });
    if (at != values.size()) throw DataError("parameter vector size mismatch");
}

// --- serialization -------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little,
              "model container assumes a little-endian host");

constexpr char kModelMagic[8] = {'K', 'G', 'L', 'P', 'M', 'D', '0', '1'};

std::string nonlinearity_name(Nonlinearity g) {
    return g == Nonlinearity::tanh ? "tanh" : "identity";
}

std::string distance_name(TranseDistance d) {
    return d == TranseDistance::squared_euclidean ? "squared-euclidean" : "l1";
}

void write_row_major(std::ostream& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            out.write(reinterpret_cast<const char*>(&v), sizeof(double));
        }
    }
}

}  // namespace

void save_model(const LatentModel& model, const std::filesystem::path& path, std::uint64_t seed) {
    nlohmann::json header;
    header["format"] = "kglp-model";
    header["version"] = 1;
    header["kind"] = model_kind_name(model.config.kind);
    header["n_entities"] = model.num_entities();
    header["n_relations"] = model.num_relations();
    header["dims"] = {{"h_entity", model.config.h_entity},
                      {"h_relation", model.config.h_relation},
                      {"h_additive", model.config.h_additive},
                      {"h_bilinear", model.config.h_bilinear},
                      {"h_combined", model.config.h_combined}};
    header["g"] = nonlinearity_name(model.config.g);
    header["distance"] = distance_name(model.config.distance);
    header["seed"] = seed;
    nlohmann::json mats = nlohmann::json::array();
    visit_matrices(model, [&](const std::string& name, const auto& m) {
        mats.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    });
    header["matrices"] = mats;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model file: " + path.string());
    out.write(kModelMagic, sizeof(kModelMagic));
    const std::string head = header.dump();
    const std::uint64_t n = head.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    visit_matrices(model, [&](const std::string&, const auto& m) {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, Eigen::VectorXd>) {
            write_row_major(out, Eigen::MatrixXd(m));
        } else {
            write_row_major(out, m);
        }
    });
    if (!out) throw DataError("failed writing model file: " + path.string());
}

LatentModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || !std::equal(magic, magic + 8, kModelMagic)) {
        throw ParseError("not a kglp model file: " + path.string());
    }
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    std::string head(n, '\0');
    in.read(head.data(), static_cast<std::streamsize>(n));
    if (!in) throw ParseError("truncated model header");
    const nlohmann::json header = nlohmann::json::parse(head);
    if (header.value("format", "") != "kglp-model") throw ParseError("unexpected container format");

    ModelConfig cfg;
    cfg.kind = model_kind_from_name(header.at("kind").get<std::string>());
    const auto& dims = header.at("dims");
    cfg.h_entity = dims.at("h_entity").get<int>();
    cfg.h_relation = dims.at("h_relation").get<int>();
    cfg.h_additive = dims.at("h_additive").get<int>();
    cfg.h_bilinear = dims.at("h_bilinear").get<int>();
    cfg.h_combined = dims.at("h_combined").get<int>();
    cfg.g = header.value("g", "tanh") == "tanh" ? Nonlinearity::tanh : Nonlinearity::identity;
    cfg.distance = header.value("distance", "squared-euclidean") == "l1"
                       ? TranseDistance::l1
                       : TranseDistance::squared_euclidean;

    LatentModel model =
        zero_model(cfg, header.at("n_entities").get<int>(), header.at("n_relations").get<int>());

    const auto& mats = header.at("matrices");
    std::size_t idx = 0;
    bool valid = true;
    visit_matrices_mutable(model, [&](auto& m) {
        if (!valid) return;
        if (idx >= mats.size()) {
            valid = false;
            return;
        }
        const auto& entry = mats[idx++];
        if (entry.at("rows").get<Eigen::Index>() != m.rows() ||
            entry.at("cols").get<Eigen::Index>() != m.cols()) {
            valid = false;
            return;
        }
        for (Eigen::Index r = 0; r < m.rows() && in; ++r) {
            for (Eigen::Index c = 0; c < m.cols() && in; ++c) {
                double v = 0;
                in.read(reinterpret_cast<char*>(&v), sizeof(double));
                m(r, c) = v;
            }
        }
    });
    if (!valid || idx != mats.size()) throw ParseError("model header does not match expected shapes");
    if (!in) throw ParseError("truncated model payload");
    return model;
}

}  // namespace kglp
