#include "kglp/graphfeat.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "kglp/rng.hpp"
#include "logistic.hpp"

namespace kglp {

namespace {

// Undirected neighborhood of e under relation k (out plus in, deduplicated).
std::vector<EntityId> undirected_neighbors(const KnowledgeGraph& kg, RelationId k, EntityId e) {
    const auto& fwd = kg.out_neighbors(e, k, Direction::forward);
    const auto& inv = kg.out_neighbors(e, k, Direction::inverse);
    std::vector<EntityId> out;
    out.reserve(fwd.size() + inv.size());
    std::set_union(fwd.begin(), fwd.end(), inv.begin(), inv.end(), std::back_inserter(out));
    return out;
}

// Counts vertex-distinct undirected paths from `at` to `target` by remaining
// length. Path counts, not walk counts: a path never revisits a vertex, so the
// ensemble is finite and truncation at the graph diameter is exact on trees.
void count_simple_paths(const KnowledgeGraph& kg, RelationId k, EntityId at, EntityId target,
                        int depth, int max_depth, std::vector<char>& visited,
                        std::vector<double>& counts) {
    for (const EntityId next : undirected_neighbors(kg, k, at)) {
        if (next == target) {
            counts[static_cast<std::size_t>(depth + 1)] += 1.0;
            continue;
        }
        if (visited[static_cast<std::size_t>(next)] || depth + 1 >= max_depth) continue;
        visited[static_cast<std::size_t>(next)] = 1;
        count_simple_paths(kg, k, next, target, depth + 1, max_depth, visited, counts);
        visited[static_cast<std::size_t>(next)] = 0;
    }
}

double katz_sum(const KnowledgeGraph& kg, RelationId k, EntityId i, EntityId j, double beta,
                int max_length, bool truncated) {
    std::vector<double> counts(static_cast<std::size_t>(max_length) + 1, 0.0);
    std::vector<char> visited(static_cast<std::size_t>(kg.num_entities()), 0);
    visited[static_cast<std::size_t>(i)] = 1;
    count_simple_paths(kg, k, i, j, 0, max_length, visited, counts);
    double sum = 0.0;
    double factor = 1.0;
    for (int len = 1; len <= max_length; ++len) {
        factor *= beta;
        const double term = factor * counts[static_cast<std::size_t>(len)];
        if (!truncated && counts[static_cast<std::size_t>(len)] > 0.0 && term < 1e-12) break;
        sum += term;
    }
    return sum;
}

}  // namespace

double similarity(const KnowledgeGraph& kg, RelationId k, EntityId i, EntityId j,
                  const SimilaritySpec& spec, SimilarityFlags* flags) {
    kg.check_entity(i);
    kg.check_entity(j);
    kg.check_relation(k);
    switch (spec.kind) {
        case SimilarityKind::common_neighbors:
        case SimilarityKind::adamic_adar: {
            const auto gi = undirected_neighbors(kg, k, i);
            const auto gj = undirected_neighbors(kg, k, j);
            std::vector<EntityId> common;
            std::set_intersection(gi.begin(), gi.end(), gj.begin(), gj.end(),
                                  std::back_inserter(common));
            if (spec.kind == SimilarityKind::common_neighbors) {
                return static_cast<double>(common.size());
            }
            double sum = 0.0;
            for (const EntityId z : common) {
                const auto degree = undirected_neighbors(kg, k, z).size();
                if (degree < 2) {
                    if (flags) ++flags->degenerate_adamic_adar_terms;
                    continue;  // 1/log(1) is undefined; contributes 0
                }
                sum += 1.0 / std::log(static_cast<double>(degree));
            }
            return sum;
        }
        case SimilarityKind::preferential_attachment: {
            return static_cast<double>(undirected_neighbors(kg, k, i).size()) *
                   static_cast<double>(undirected_neighbors(kg, k, j).size());
        }
        case SimilarityKind::katz: {
            if (spec.beta <= 0.0 || spec.beta >= 1.0) throw DataError("katz beta must be in (0, 1)");
            return katz_sum(kg, k, i, j, spec.beta, kg.num_entities() - 1, false);
        }
        case SimilarityKind::local_katz: {
            if (spec.beta <= 0.0) throw DataError("katz beta must be positive");
            if (spec.max_length < 1) throw DataError("local katz needs max_length >= 1");
            return katz_sum(kg, k, i, j, spec.beta, spec.max_length, true);
        }
    }
    return 0.0;
}

std::string path_type_name(const KnowledgeGraph& kg, const PathType& t) {
    std::string out;
    for (std::size_t s = 0; s < t.steps.size(); ++s) {
        if (s > 0) out += ", ";
        out += kg.relations().name(t.steps[s].relation);
        if (t.steps[s].direction == Direction::inverse) out += "^-1";
    }
    return out;
}

std::vector<PathType> enumerate_path_types(const KnowledgeGraph& kg, RelationId k, int max_length,
                                           std::size_t budget, std::uint64_t seed) {
    kg.check_relation(k);
    if (max_length < 1) throw DataError("max_length must be >= 1");

    // Group walks by their type prefix per source subject: frontier maps a
    // step sequence to the set of nodes it reaches.
    std::set<PathType> found;
    std::vector<std::pair<EntityId, std::vector<EntityId>>> sources;
    {
        std::map<EntityId, std::vector<EntityId>> by_subject;
        for (const Triple& t : kg.positives()) {
            if (t.relation == k) by_subject[t.subject].push_back(t.object);
        }
        sources.assign(by_subject.begin(), by_subject.end());
    }

    const PathType label_step{{PathStep{k, Direction::forward}}};
    for (const auto& [subject, objects] : sources) {
        std::map<PathType, std::set<EntityId>> frontier;
        frontier[PathType{}] = {subject};
        for (int len = 1; len <= max_length; ++len) {
            std::map<PathType, std::set<EntityId>> next;
            for (const auto& [prefix, nodes] : frontier) {
                for (RelationId r = 0; r < kg.num_relations(); ++r) {
                    for (const Direction d : {Direction::forward, Direction::inverse}) {
                        std::set<EntityId> reached;
                        for (const EntityId node : nodes) {
                            const auto& step = kg.out_neighbors(node, r, d);
                            reached.insert(step.begin(), step.end());
                        }
                        if (reached.empty()) continue;
                        PathType extended = prefix;
                        extended.steps.push_back({r, d});
                        for (const EntityId object : objects) {
                            if (reached.contains(object) && extended != label_step) {
                                found.insert(extended);
                            }
                        }
                        next.emplace(std::move(extended), std::move(reached));
                    }
                }
            }
            frontier = std::move(next);
        }
    }

    std::vector<PathType> out(found.begin(), found.end());
    std::sort(out.begin(), out.end(), [](const PathType& a, const PathType& b) {
        if (a.steps.size() != b.steps.size()) return a.steps.size() < b.steps.size();
        return a < b;
    });
    if (out.size() > budget) {
        Rng rng(derive_seed(seed, "path-types"));
        rng.shuffle(out);
        out.resize(budget);
        std::sort(out.begin(), out.end(), [](const PathType& a, const PathType& b) {
            if (a.steps.size() != b.steps.size()) return a.steps.size() < b.steps.size();
            return a < b;
        });
    }
    return out;
}

double path_probability(const KnowledgeGraph& kg, EntityId i, EntityId j, const PathType& t) {
    kg.check_entity(i);
    kg.check_entity(j);
    if (t.steps.empty()) throw DataError("path type must have at least one step");
    // Distribute walk mass step by step; dead ends drop their mass.
    std::unordered_map<EntityId, double> mass{{i, 1.0}};
    for (const PathStep& step : t.steps) {
        std::unordered_map<EntityId, double> next;
        for (const auto& [node, p] : mass) {
            const auto& nbrs = kg.out_neighbors(node, step.relation, step.direction);
            if (nbrs.empty()) continue;
            const double share = p / static_cast<double>(nbrs.size());
            for (const EntityId nb : nbrs) next[nb] += share;
        }
        mass = std::move(next);
        if (mass.empty()) return 0.0;
    }
    const auto it = mass.find(j);
    return it == mass.end() ? 0.0 : it->second;
}

Eigen::VectorXd pra_features(const KnowledgeGraph& kg, EntityId i, EntityId j, RelationId k,
                             std::span<const PathType> path_types) {
    kg.check_relation(k);
    Eigen::VectorXd phi(static_cast<Eigen::Index>(path_types.size()));
    for (std::size_t p = 0; p < path_types.size(); ++p) {
        phi[static_cast<Eigen::Index>(p)] = path_probability(kg, i, j, path_types[p]);
    }
    return phi;
}

double pra_score(const KnowledgeGraph& kg, const PraModel& model, EntityId i, EntityId j) {
    return model.weights.dot(pra_features(kg, i, j, model.relation, model.path_types)) + model.bias;
}

PraFit fit_pra(const KnowledgeGraph& kg, RelationId k, std::span<const Triple> positives,
               std::span<const Triple> negatives, const FitPraOptions& options) {
    return fit_pra(kg, k, positives, negatives,
                   enumerate_path_types(kg, k, options.max_path_length, options.budget, options.seed),
                   options);
}

PraFit fit_pra(const KnowledgeGraph& kg, RelationId k, std::span<const Triple> positives,
               std::span<const Triple> negatives, std::vector<PathType> path_types,
               const FitPraOptions& options) {
    kg.check_relation(k);
    if (positives.empty() || negatives.empty()) {
        throw DataError("pra fit needs both positive and negative examples");
    }

    const auto n = static_cast<Eigen::Index>(positives.size() + negatives.size());
    const auto d = static_cast<Eigen::Index>(path_types.size());
    Eigen::MatrixXd features(n, d);
    Eigen::VectorXi labels(n);
    Eigen::Index row = 0;
    for (const Triple& t : positives) {
        features.row(row) = pra_features(kg, t.subject, t.object, k, path_types).transpose();
        labels[row++] = 1;
    }
    for (const Triple& t : negatives) {
        features.row(row) = pra_features(kg, t.subject, t.object, k, path_types).transpose();
        labels[row++] = 0;
    }

    detail::LogisticOptions lopt;
    lopt.l1 = options.l1_strength;
    lopt.tol = options.tol;
    lopt.max_iters = options.max_iters;
    lopt.include_bias = options.include_bias;
    detail::LogisticFit lfit =
        detail::fit_logistic_l1(features, labels, Eigen::VectorXd::Zero(n), lopt);

    PraFit fit;
    fit.model.relation = k;
    fit.model.bias = lfit.bias;
    fit.objective = std::move(lfit.objective);
    std::vector<double> kept;
    for (Eigen::Index p = 0; p < d; ++p) {
        if (lfit.weights[p] != 0.0) {
            fit.model.path_types.push_back(path_types[static_cast<std::size_t>(p)]);
            kept.push_back(lfit.weights[p]);
        }
    }
    fit.model.weights = Eigen::Map<const Eigen::VectorXd>(kept.data(),
                                                          static_cast<Eigen::Index>(kept.size()));
    return fit;
}

std::vector<PraRule> pra_rules(const PraModel& model, const KnowledgeGraph& kg) {
    std::vector<std::size_t> order(model.path_types.size());
    for (std::size_t p = 0; p < order.size(); ++p) order[p] = p;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return model.weights[static_cast<Eigen::Index>(a)] >
               model.weights[static_cast<Eigen::Index>(b)];
    });

    const std::string head_relation = kg.relations().name(model.relation);
    std::vector<PraRule> rules;
    for (const std::size_t p : order) {
        const double weight = model.weights[static_cast<Eigen::Index>(p)];
        if (weight == 0.0) continue;
        const PathType& t = model.path_types[p];
        const std::size_t len = t.steps.size();
        auto var = [&](std::size_t v) -> std::string {
            if (v == 0) return "x";
            if (v == len) return "y";
            return "z" + std::to_string(v);
        };
        std::string text = "(x, " + head_relation + ", y) ← ";
        for (std::size_t s = 0; s < len; ++s) {
            if (s > 0) text += " ∧ ";
            const std::string rel = kg.relations().name(t.steps[s].relation);
            if (t.steps[s].direction == Direction::forward) {
                text += "(" + var(s) + ", " + rel + ", " + var(s + 1) + ")";
            } else {
                text += "(" + var(s + 1) + ", " + rel + ", " + var(s) + ")";
            }
        }
        rules.push_back({weight, std::move(text)});
    }
    return rules;
}

void write_rules(std::span<const PraRule> rules, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write rules file: " + path.string());
    for (const PraRule& r : rules) {
        out << r.weight << '\t' << r.text << '\n';
    }
}

namespace {

nlohmann::json path_type_to_json(const KnowledgeGraph& kg, const PathType& t) {
    nlohmann::json steps = nlohmann::json::array();
    for (const PathStep& s : t.steps) {
        steps.push_back({{"relation", kg.relations().name(s.relation)},
                         {"direction", s.direction == Direction::forward ? "forward" : "inverse"}});
    }
    return steps;
}

PathType path_type_from_json(const KnowledgeGraph& kg, const nlohmann::json& j) {
    PathType t;
    for (const auto& s : j) {
        const auto rel = kg.relations().lookup(s.at("relation").get<std::string>());
        if (!rel) throw DataError("pra model references unknown relation");
        const Direction d =
            s.at("direction").get<std::string>() == "inverse" ? Direction::inverse : Direction::forward;
        t.steps.push_back({*rel, d});
    }
    return t;
}

}  // namespace

void save_pra_model(const PraModel& model, const KnowledgeGraph& kg,
                    const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = "kglp-pra";
    j["version"] = 1;
    j["relation"] = kg.relations().name(model.relation);
    j["bias"] = model.bias;
    nlohmann::json paths = nlohmann::json::array();
    for (std::size_t p = 0; p < model.path_types.size(); ++p) {
        paths.push_back({{"steps", path_type_to_json(kg, model.path_types[p])},
                         {"weight", model.weights[static_cast<Eigen::Index>(p)]}});
    }
    j["paths"] = paths;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write pra model: " + path.string());
    out << j.dump(2) << '\n';
}

PraModel load_pra_model(const KnowledgeGraph& kg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open pra model: " + path.string());
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "kglp-pra") throw ParseError("not a kglp pra model");
    PraModel model;
    const auto rel = kg.relations().lookup(j.at("relation").get<std::string>());
    if (!rel) throw DataError("pra model references unknown relation");
    model.relation = *rel;
    model.bias = j.at("bias").get<double>();
    std::vector<double> weights;
    for (const auto& p : j.at("paths")) {
        model.path_types.push_back(path_type_from_json(kg, p.at("steps")));
        weights.push_back(p.at("weight").get<double>());
    }
    model.weights = Eigen::Map<const Eigen::VectorXd>(weights.data(),
                                                      static_cast<Eigen::Index>(weights.size()));
    return model;
}

}  // namespace kglp
