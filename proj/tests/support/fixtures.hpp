#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kglp/graph.hpp"
#include "kglp/latent.hpp"
#include "kglp/rng.hpp"

namespace kglp::testing {

/// The five-triple actor example: one entity dictionary entry per name in
/// first-appearance order.
inline std::vector<StringTriple> spock_triples() {
    return {
        {"LeonardNimoy", "profession", "Actor"},
        {"LeonardNimoy", "starredIn", "StarTrek"},
        {"LeonardNimoy", "played", "Spock"},
        {"Spock", "characterIn", "StarTrek"},
        {"StarTrek", "genre", "ScienceFiction"},
    };
}

/// The two-franchise movie graph (8 triples, 7 entities, 4 relations).
inline std::vector<StringTriple> movie_triples() {
    return {
        {"LeonardNimoy", "starredIn", "StarTrek"},
        {"LeonardNimoy", "played", "Spock"},
        {"Spock", "characterIn", "StarTrek"},
        {"StarTrek", "genre", "ScienceFiction"},
        {"AlecGuinness", "starredIn", "StarWars"},
        {"AlecGuinness", "played", "ObiWanKenobi"},
        {"ObiWanKenobi", "characterIn", "StarWars"},
        {"StarWars", "genre", "ScienceFiction"},
    };
}

inline KnowledgeGraph movie_graph() {
    const auto lines = movie_triples();
    return KnowledgeGraph::ingest(lines);
}

/// Undirected triangle a-b, b-c, a-c over a single relation.
inline KnowledgeGraph triangle_graph() {
    const std::vector<StringTriple> lines = {
        {"a", "edge", "b"},
        {"b", "edge", "c"},
        {"a", "edge", "c"},
    };
    return KnowledgeGraph::ingest(lines);
}

/// Block-structured tensor: entities fall into `blocks` groups round-robin and
/// (i, k, j) holds iff the seeded block pattern of relation k links their
/// groups. Exactly representable by a bilinear model of rank `blocks`.
struct BlockModel {
    std::vector<StringTriple> lines;
    std::vector<int> block_of;                     // per entity
    std::vector<std::vector<std::uint8_t>> links;  // [relation][b1 * blocks + b2]
    int blocks = 0;
};

inline BlockModel block_model(int n_entities, int n_relations, int blocks, double density,
                              std::uint64_t seed) {
    BlockModel out;
    out.blocks = blocks;
    Rng rng(derive_seed(seed, "block-model"));
    out.block_of.resize(static_cast<std::size_t>(n_entities));
    for (int e = 0; e < n_entities; ++e) out.block_of[static_cast<std::size_t>(e)] = e % blocks;
    out.links.assign(static_cast<std::size_t>(n_relations),
                     std::vector<std::uint8_t>(static_cast<std::size_t>(blocks * blocks), 0));
    for (auto& pattern : out.links) {
        bool any = false;
        for (auto& cell : pattern) {
            cell = rng.uniform() < density ? 1 : 0;
            any = any || cell;
        }
        if (!any) pattern[0] = 1;  // keep every relation populated
    }
    for (int k = 0; k < n_relations; ++k) {
        for (int i = 0; i < n_entities; ++i) {
            for (int j = 0; j < n_entities; ++j) {
                const int b = out.block_of[static_cast<std::size_t>(i)] * blocks +
                              out.block_of[static_cast<std::size_t>(j)];
                if (out.links[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)]) {
                    out.lines.push_back({"e" + std::to_string(i), "r" + std::to_string(k),
                                         "e" + std::to_string(j)});
                }
            }
        }
    }
    return out;
}

/// Entities on a width x height grid with translation relations: `east` links
/// (x, y) -> (x+1, y) and `north` links (x, y) -> (x, y+1), plus their `west`
/// and `south` reverses when requested.
inline std::vector<StringTriple> grid_translation_triples(int width, int height,
                                                          bool with_reverse = false) {
    std::vector<StringTriple> lines;
    auto name = [](int x, int y) { return "p" + std::to_string(x) + "_" + std::to_string(y); };
    for (int x = 0; x < width; ++x) {
        for (int y = 0; y < height; ++y) {
            if (x + 1 < width) {
                lines.push_back({name(x, y), "east", name(x + 1, y)});
                if (with_reverse) lines.push_back({name(x + 1, y), "west", name(x, y)});
            }
            if (y + 1 < height) {
                lines.push_back({name(x, y), "north", name(x, y + 1)});
                if (with_reverse) lines.push_back({name(x, y + 1), "south", name(x, y)});
            }
        }
    }
    return lines;
}

/// Planted-rule graph: `target` holds between a and c exactly when some b has
/// (a, r1, b) and (b, r2, c). A seeded `noise` relation links a-group and
/// c-group entities directly so enumeration sees a competing (uninformative)
/// path type.
struct PlantedRule {
    std::vector<StringTriple> lines;
    std::vector<std::pair<std::string, std::string>> rule_pairs;     // label 1
    std::vector<std::pair<std::string, std::string>> nonrule_pairs;  // label 0
};

inline PlantedRule planted_rule(int n_a, int n_b, int n_c, double p_edge, std::uint64_t seed) {
    PlantedRule out;
    Rng rng(derive_seed(seed, "planted-rule"));
    std::vector<std::vector<char>> ab(static_cast<std::size_t>(n_a),
                                      std::vector<char>(static_cast<std::size_t>(n_b), 0));
    std::vector<std::vector<char>> bc(static_cast<std::size_t>(n_b),
                                      std::vector<char>(static_cast<std::size_t>(n_c), 0));
    auto an = [](int i) { return "a" + std::to_string(i); };
    auto bn = [](int i) { return "b" + std::to_string(i); };
    auto cn = [](int i) { return "c" + std::to_string(i); };
    for (int i = 0; i < n_a; ++i) {
        for (int j = 0; j < n_b; ++j) {
            if (rng.uniform() < p_edge) {
                ab[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 1;
                out.lines.push_back({an(i), "r1", bn(j)});
            }
        }
    }
    for (int j = 0; j < n_b; ++j) {
        for (int l = 0; l < n_c; ++l) {
            if (rng.uniform() < p_edge) {
                bc[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)] = 1;
                out.lines.push_back({bn(j), "r2", cn(l)});
            }
        }
    }
    for (int i = 0; i < n_a; ++i) {
        for (int l = 0; l < n_c; ++l) {
            bool linked = false;
            for (int j = 0; j < n_b && !linked; ++j) {
                linked = ab[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] &&
                         bc[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)];
            }
            if (linked) {
                out.rule_pairs.emplace_back(an(i), cn(l));
            } else {
                out.nonrule_pairs.emplace_back(an(i), cn(l));
            }
            if (rng.uniform() < 0.15) out.lines.push_back({an(i), "noise", cn(l)});
        }
    }
    // target triples exist for every rule pair so type constraints admit all
    // a-group subjects and c-group objects
    for (const auto& [a, c] : out.rule_pairs) out.lines.push_back({a, "target", c});
    return out;
}

inline std::vector<StringTriple> random_triples(int n_entities, int n_relations, double density,
                                                std::uint64_t seed) {
    std::vector<StringTriple> lines;
    Rng rng(derive_seed(seed, "random-kg"));
    for (int k = 0; k < n_relations; ++k) {
        for (int i = 0; i < n_entities; ++i) {
            for (int j = 0; j < n_entities; ++j) {
                if (rng.uniform() < density) {
                    lines.push_back({"e" + std::to_string(i), "r" + std::to_string(k),
                                     "e" + std::to_string(j)});
                }
            }
        }
    }
    if (lines.empty()) lines.push_back({"e0", "r0", "e1"});
    return lines;
}

/// Central finite differences of fn over every parameter of the model.
template <typename LossFn>
Eigen::VectorXd finite_difference_gradient(const LatentModel& model, LossFn&& fn,
                                           double h = 1e-5) {
    LatentModel probe = model;
    Eigen::VectorXd theta = flatten_parameters(probe);
    Eigen::VectorXd grad(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double saved = theta[i];
        theta[i] = saved + h;
        assign_parameters(probe, theta);
        const double up = fn(probe);
        theta[i] = saved - h;
        assign_parameters(probe, theta);
        const double down = fn(probe);
        theta[i] = saved;
        grad[i] = (up - down) / (2.0 * h);
    }
    assign_parameters(probe, theta);
    return grad;
}

/// max_i |a_i - b_i| / max(1, |a_i|, |b_i|)
inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

}  // namespace kglp::testing
