#include "kglp/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "kglp/rng.hpp"
#include "kglp/train.hpp"
#include "logistic.hpp"

namespace kglp {

double are_score(const KnowledgeGraph& kg, const AreModel& model, const Triple& t,
                 bool* missing_pra) {
    double value = 0.0;
    if (model.latent_enabled()) value += score(model.latent, t);
    const auto& pra = model.pra.at(static_cast<std::size_t>(t.relation));
    if (pra.has_value()) {
        value += pra_score(kg, *pra, t.subject, t.object);
        if (missing_pra) *missing_pra = false;
    } else if (missing_pra) {
        *missing_pra = true;
    }
    return value;
}

AreFit fit_are(const KnowledgeGraph& kg, const LabeledTripleSet& data, const AreFitOptions& options) {
    if (data.items.empty()) throw DataError("fit_are needs labeled data");
    const auto n = data.items.size();
    const auto n_r = static_cast<std::size_t>(kg.num_relations());

    AreFit fit;
    fit.model.pra.assign(n_r, std::nullopt);
    if (options.rank > 0) {
        ModelConfig cfg;
        cfg.kind = ModelKind::rescal;
        cfg.h_entity = options.rank;
        fit.model.latent = init_model(cfg, kg.num_entities(), kg.num_relations(),
                                      derive_seed(options.seed, "are-latent"));
    } else {
        fit.model.latent.config.kind = ModelKind::rescal;
        fit.model.latent.config.h_entity = 0;
    }

    // Path types are fixed up front; the alternation refits only their weights.
    std::vector<std::vector<PathType>> types(n_r);
    std::vector<std::vector<std::size_t>> rows_of(n_r);  // data rows per relation
    for (std::size_t i = 0; i < n; ++i) {
        rows_of[static_cast<std::size_t>(data.items[i].triple.relation)].push_back(i);
    }
    std::vector<Eigen::MatrixXd> features(n_r);
    if (options.use_pra) {
        for (std::size_t k = 0; k < n_r; ++k) {
            if (rows_of[k].empty()) continue;
            types[k] = enumerate_path_types(kg, static_cast<RelationId>(k), options.max_path_length,
                                            options.budget, derive_seed(options.seed, "are-paths", k));
            Eigen::MatrixXd x(rows_of[k].size(), types[k].size());
            for (std::size_t r = 0; r < rows_of[k].size(); ++r) {
                const Triple& t = data.items[rows_of[k][r]].triple;
                x.row(static_cast<Eigen::Index>(r)) =
                    pra_features(kg, t.subject, t.object, t.relation, types[k]).transpose();
            }
            features[k] = std::move(x);
        }
    }

    std::vector<Eigen::VectorXd> path_weights(n_r);
    for (std::size_t k = 0; k < n_r; ++k) {
        path_weights[k] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(types[k].size()));
    }

    auto latent_scores = [&]() {
        std::vector<double> f1(n, 0.0);
        if (fit.model.latent_enabled()) {
            for (std::size_t i = 0; i < n; ++i) f1[i] = score(fit.model.latent, data.items[i].triple);
        }
        return f1;
    };
    auto path_scores = [&]() {
        std::vector<double> f2(n, 0.0);
        for (std::size_t k = 0; k < n_r; ++k) {
            if (features[k].size() == 0) continue;
            const Eigen::VectorXd s = features[k] * path_weights[k];
            for (std::size_t r = 0; r < rows_of[k].size(); ++r) {
                f2[rows_of[k][r]] = s[static_cast<Eigen::Index>(r)];
            }
        }
        return f2;
    };
    auto joint_loss = [&](const std::vector<double>& f1, const std::vector<double>& f2) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum += log_loss(sigmoid(f1[i] + f2[i]), data.items[i].label);
        }
        return sum / static_cast<double>(n);
    };

    {
        const auto f1 = latent_scores();
        const auto f2 = path_scores();
        fit.loss.push_back(joint_loss(f1, f2));
    }

    int consecutive_increases = 0;
    for (int round = 0; round < options.max_rounds; ++round) {
        // Path step: offset logistic refit per relation, no intercept.
        if (options.use_pra) {
            const auto f1 = latent_scores();
            for (std::size_t k = 0; k < n_r; ++k) {
                if (features[k].size() == 0 || rows_of[k].empty()) continue;
                Eigen::VectorXi labels(static_cast<Eigen::Index>(rows_of[k].size()));
                Eigen::VectorXd offsets(static_cast<Eigen::Index>(rows_of[k].size()));
                bool has_pos = false, has_neg = false;
                for (std::size_t r = 0; r < rows_of[k].size(); ++r) {
                    const auto& item = data.items[rows_of[k][r]];
                    labels[static_cast<Eigen::Index>(r)] = item.label;
                    offsets[static_cast<Eigen::Index>(r)] = f1[rows_of[k][r]];
                    (item.label == 1 ? has_pos : has_neg) = true;
                }
                if (!has_pos || !has_neg) continue;  // degenerate relation, keep weights
                detail::LogisticOptions lopt;
                lopt.l1 = options.l1_strength;
                lopt.tol = options.tol * 1e-2;
                lopt.include_bias = false;
                path_weights[k] =
                    detail::fit_logistic_l1(features[k], labels, offsets, lopt).weights;
            }
        }

        // Latent step: one SGD epoch against the path offsets.
        if (fit.model.latent_enabled()) {
            const auto f2 = path_scores();
            sgd_epoch_log_loss(fit.model.latent, data.items, f2, options.learning_rate,
                               options.lambda,
                               derive_seed(options.seed, "are-round", static_cast<std::uint64_t>(round)));
        }

        const auto f1 = latent_scores();
        const auto f2 = path_scores();
        const double current = joint_loss(f1, f2);
        const double previous = fit.loss.back();
        fit.loss.push_back(current);
        if (current > previous + options.tol) {
            if (++consecutive_increases >= 3) {
                fit.diverged = true;
                break;
            }
        } else {
            consecutive_increases = 0;
        }
        if (std::abs(previous - current) < options.tol) break;
    }

    for (std::size_t k = 0; k < n_r; ++k) {
        if (types[k].empty()) continue;
        PraModel m;
        m.relation = static_cast<RelationId>(k);
        m.bias = 0.0;
        std::vector<double> kept;
        for (Eigen::Index p = 0; p < path_weights[k].size(); ++p) {
            if (path_weights[k][p] != 0.0) {
                m.path_types.push_back(types[k][static_cast<std::size_t>(p)]);
                kept.push_back(path_weights[k][p]);
            }
        }
        m.weights =
            Eigen::Map<const Eigen::VectorXd>(kept.data(), static_cast<Eigen::Index>(kept.size()));
        fit.model.pra[k] = std::move(m);
    }
    return fit;
}

void save_are(const AreModel& model, const KnowledgeGraph& kg, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["format"] = "kglp-are";
    j["version"] = 1;
    j["latent_enabled"] = model.latent_enabled();
    if (model.latent_enabled()) {
        save_model(model.latent, dir / "latent.kgm");
        j["latent"] = "latent.kgm";
    }
    nlohmann::json pra = nlohmann::json::array();
    for (std::size_t k = 0; k < model.pra.size(); ++k) {
        if (!model.pra[k].has_value()) continue;
        const std::string file = "pra_" + std::to_string(k) + ".json";
        save_pra_model(*model.pra[k], kg, dir / file);
        pra.push_back({{"relation", kg.relations().name(static_cast<RelationId>(k))}, {"file", file}});
    }
    j["pra"] = pra;
    std::ofstream out(dir / "are.json");
    if (!out) throw DataError("cannot write are manifest");
    out << j.dump(2) << '\n';
}

AreModel load_are(const KnowledgeGraph& kg, const std::filesystem::path& dir) {
    std::ifstream in(dir / "are.json");
    if (!in) throw DataError("cannot open are manifest in " + dir.string());
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "kglp-are") throw ParseError("not a kglp are manifest");
    AreModel model;
    model.pra.assign(static_cast<std::size_t>(kg.num_relations()), std::nullopt);
    if (j.value("latent_enabled", false)) {
        model.latent = load_model(dir / j.at("latent").get<std::string>());
    } else {
        model.latent.config.kind = ModelKind::rescal;
        model.latent.config.h_entity = 0;
    }
    for (const auto& entry : j.at("pra")) {
        PraModel m = load_pra_model(kg, dir / entry.at("file").get<std::string>());
        model.pra[static_cast<std::size_t>(m.relation)] = std::move(m);
    }
    return model;
}

Eigen::VectorXd phi_neighborhood(const KnowledgeGraph& kg, EntityId i, EntityId j, RelationId k) {
    kg.check_relation(k);
    const auto n_r = kg.num_relations();
    Eigen::VectorXd phi(n_r - 1);
    Eigen::Index at = 0;
    for (RelationId r = 0; r < n_r; ++r) {
        if (r == k) continue;
        phi[at++] = kg.contains({i, r, j}) ? 1.0 : 0.0;
    }
    return phi;
}

double additive_score(const AdditiveModel& model, const Triple& t, const KnowledgeGraph& kg) {
    double value = 0.0;
    if (const auto it = model.subject_weights.find(AdditiveModel::slot_key(t.relation, t.object));
        it != model.subject_weights.end()) {
        value += it->second.dot(model.subject_repr.row(t.subject));
    }
    if (const auto it = model.object_weights.find(AdditiveModel::slot_key(t.relation, t.subject));
        it != model.object_weights.end()) {
        value += it->second.dot(model.object_repr.row(t.object));
    }
    if (model.neighborhood_weights.size() > 0) {
        for (RelationId r = 0; r < kg.num_relations(); ++r) {
            if (r == t.relation) continue;
            if (kg.contains({t.subject, r, t.object})) {
                value += model.neighborhood_weights(t.relation, r);
            }
        }
    }
    return value;
}

StackedModel fit_stacker(const Eigen::MatrixXd& base_scores, const Eigen::VectorXi& labels) {
    if (base_scores.cols() < 2) throw DataError("stacking needs at least two base scorers");
    detail::LogisticOptions lopt;
    lopt.l1 = 0.0;
    lopt.tol = 1e-10;
    lopt.max_iters = 50000;
    lopt.include_bias = true;
    const auto fit =
        detail::fit_logistic_l1(base_scores, labels, Eigen::VectorXd::Zero(base_scores.rows()), lopt);
    return {fit.weights, fit.bias};
}

double stacked_score(const StackedModel& model, const Eigen::VectorXd& base_scores) {
    if (base_scores.size() != model.weights.size()) throw DataError("base score arity mismatch");
    return model.weights.dot(base_scores) + model.bias;
}

void save_stacked(const StackedModel& model, std::span<const std::string> base_files,
                  const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = "kglp-stacked";
    j["version"] = 1;
    j["bias"] = model.bias;
    j["weights"] = std::vector<double>(model.weights.data(), model.weights.data() + model.weights.size());
    j["base"] = std::vector<std::string>(base_files.begin(), base_files.end());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write stacked model: " + path.string());
    out << j.dump(2) << '\n';
}

StackedModel load_stacked(const std::filesystem::path& path, std::vector<std::string>* base_files) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open stacked model: " + path.string());
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "kglp-stacked") throw ParseError("not a kglp stacked model");
    StackedModel model;
    model.bias = j.at("bias").get<double>();
    const auto w = j.at("weights").get<std::vector<double>>();
    model.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    if (base_files) *base_files = j.at("base").get<std::vector<std::string>>();
    return model;
}

PlattCalibrator platt_calibrate(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size() || scores.empty()) throw DataError("bad calibration input");
    const auto n_pos = std::count(labels.begin(), labels.end(), 1);
    if (n_pos == 0 || n_pos == static_cast<std::ptrdiff_t>(labels.size())) {
        throw DataError("calibration needs both classes");
    }
    constexpr double kCap = 1e3;
    const auto n = static_cast<Eigen::Index>(scores.size());

    // Perfectly separable data has its likelihood maximum at |a| = infinity;
    // detect it up front, pin the slope at the cap, and fit the offset alone.
    double min_pos = 1e300, max_pos = -1e300, min_neg = 1e300, max_neg = -1e300;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] == 1) {
            min_pos = std::min(min_pos, scores[i]);
            max_pos = std::max(max_pos, scores[i]);
        } else {
            min_neg = std::min(min_neg, scores[i]);
            max_neg = std::max(max_neg, scores[i]);
        }
    }
    const bool separable_up = min_pos > max_neg;
    const bool separable_down = max_pos < min_neg;

    PlattCalibrator cal;
    double a = 1.0;
    double b = 0.0;
    if (separable_up || separable_down) {
        cal.capped = true;
        a = separable_up ? kCap : -kCap;
        for (int it = 0; it < 200; ++it) {
            double grad = 0.0, hess = 1e-12;
            for (std::size_t i = 0; i < scores.size(); ++i) {
                const double p = sigmoid(a * scores[i] + b);
                grad += p - static_cast<double>(labels[i]);
                hess += std::max(p * (1.0 - p), 1e-12);
            }
            b -= grad / hess;
            if (std::abs(grad) < 1e-10) break;
        }
        cal.scale = a;
        cal.offset = b;
        return cal;
    }

    // Newton iterations on the two-parameter Bernoulli likelihood; the tiny
    // ridge keeps the Hessian invertible for constant scores.
    for (int it = 0; it < 200; ++it) {
        Eigen::Vector2d grad = Eigen::Vector2d::Zero();
        Eigen::Matrix2d hess = 1e-12 * Eigen::Matrix2d::Identity();
        for (Eigen::Index i = 0; i < n; ++i) {
            const double s = scores[static_cast<std::size_t>(i)];
            const double p = sigmoid(a * s + b);
            const double r = p - static_cast<double>(labels[static_cast<std::size_t>(i)]);
            const double w = std::max(p * (1.0 - p), 1e-12);
            grad += r * Eigen::Vector2d(s, 1.0);
            hess += w * Eigen::Vector2d(s, 1.0) * Eigen::RowVector2d(s, 1.0);
        }
        const Eigen::Vector2d delta = hess.ldlt().solve(grad);
        a -= delta[0];
        b -= delta[1];
        a = std::clamp(a, -kCap, kCap);
        if (grad.norm() < 1e-10) break;
    }
    cal.capped = std::abs(a) >= kCap;
    cal.scale = a;
    cal.offset = b;
    return cal;
}

}  // namespace kglp
