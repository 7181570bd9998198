#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "kglp/graphfeat.hpp"
#include "kglp/loss.hpp"
#include "support/fixtures.hpp"

using namespace kglp;

namespace {

// Explicit walk enumeration: expands every concrete walk of the step sequence
// and sums the step-wise 1/deg products of those ending at j.
double walk_enumeration_probability(const KnowledgeGraph& kg, EntityId at, EntityId j,
                                    const PathType& t, std::size_t step, double weight) {
    if (step == t.steps.size()) return at == j ? weight : 0.0;
    const auto& nbrs = kg.out_neighbors(at, t.steps[step].relation, t.steps[step].direction);
    if (nbrs.empty()) return 0.0;
    double sum = 0.0;
    for (const EntityId nb : nbrs) {
        sum += walk_enumeration_probability(kg, nb, j, t, step + 1,
                                            weight / static_cast<double>(nbrs.size()));
    }
    return sum;
}

}  // namespace

TEST_CASE("triangle similarity values") {
    const KnowledgeGraph kg = testing::triangle_graph();
    const EntityId a = *kg.entities().lookup("a");
    const EntityId c = *kg.entities().lookup("c");

    CHECK(similarity(kg, 0, a, c, {SimilarityKind::common_neighbors}) == 1.0);
    CHECK(similarity(kg, 0, a, c, {SimilarityKind::preferential_attachment}) == 4.0);
    CHECK(similarity(kg, 0, a, c, {SimilarityKind::adamic_adar}) ==
          doctest::Approx(1.0 / std::log(2.0)).epsilon(1e-12));

    SimilaritySpec katz;
    katz.kind = SimilarityKind::local_katz;
    katz.beta = 0.1;
    katz.max_length = 2;
    // one length-1 path and one length-2 path
    CHECK(similarity(kg, 0, a, c, katz) == doctest::Approx(0.11).epsilon(1e-12));
}

TEST_CASE("degree-one common neighbors contribute zero to adamic-adar, flagged") {
    // star: z is the only common neighbor of a and b and has degree 2; make a
    // degenerate case via i == j instead: neighbors of a are {b}, b has degree 1.
    const std::vector<StringTriple> lines = {{"a", "e", "b"}};
    const KnowledgeGraph kg = KnowledgeGraph::ingest(lines);
    SimilarityFlags flags;
    const double v = similarity(kg, 0, 0, 0, {SimilarityKind::adamic_adar}, &flags);
    CHECK(v == 0.0);
    CHECK(flags.degenerate_adamic_adar_terms == 1);
}

TEST_CASE("truncated katz equals untruncated on a tree once past the diameter") {
    // path graph a-b-c-d: diameter 3, single simple path per pair
    const std::vector<StringTriple> lines = {{"a", "e", "b"}, {"b", "e", "c"}, {"c", "e", "d"}};
    const KnowledgeGraph kg = KnowledgeGraph::ingest(lines);
    SimilaritySpec exact;
    exact.kind = SimilarityKind::katz;
    exact.beta = 0.3;
    SimilaritySpec truncated;
    truncated.kind = SimilarityKind::local_katz;
    truncated.beta = 0.3;
    truncated.max_length = 6;  // 2 * diameter
    for (EntityId i = 0; i < 4; ++i) {
        for (EntityId j = 0; j < 4; ++j) {
            if (i == j) continue;
            CHECK(similarity(kg, 0, i, j, exact) ==
                  doctest::Approx(similarity(kg, 0, i, j, truncated)).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(similarity(kg, 0, 0, 1, {SimilarityKind::katz, 1.5, 0}), DataError);
}

TEST_CASE("path type enumeration on the movie graph") {
    const KnowledgeGraph kg = testing::movie_graph();
    const RelationId starred = *kg.relations().lookup("starredIn");
    const RelationId played = *kg.relations().lookup("played");
    const RelationId character = *kg.relations().lookup("characterIn");

    const auto types = enumerate_path_types(kg, starred, 2, 100, 0);
    const PathType composed{{{played, Direction::forward}, {character, Direction::forward}}};
    CHECK(std::find(types.begin(), types.end(), composed) != types.end());

    // the target relation's own forward step is excluded
    const PathType label{{{starred, Direction::forward}}};
    CHECK(std::find(types.begin(), types.end(), label) == types.end());

    // every returned type is realized by at least one training pair
    for (const PathType& t : types) {
        bool witnessed = false;
        for (const Triple& tr : kg.positives()) {
            if (tr.relation != starred) continue;
            if (path_probability(kg, tr.subject, tr.object, t) > 0.0) {
                witnessed = true;
                break;
            }
        }
        CHECK(witnessed);
    }

    // budget subsampling is deterministic and bounded
    const auto rich_lines = testing::random_triples(7, 3, 0.25, 1);
    const KnowledgeGraph rich_kg = KnowledgeGraph::ingest(rich_lines);
    const auto all_types = enumerate_path_types(rich_kg, 0, 2, 10000, 9);
    REQUIRE(all_types.size() > 3);
    const auto capped = enumerate_path_types(rich_kg, 0, 2, 3, 9);
    CHECK(capped.size() == 3);
    CHECK(capped == enumerate_path_types(rich_kg, 0, 2, 3, 9));
    for (const PathType& t : capped) {
        CHECK(std::find(all_types.begin(), all_types.end(), t) != all_types.end());
    }
}

TEST_CASE("length-1 boundary: only directly-linking relations qualify") {
    const std::vector<StringTriple> lines = {
        {"a", "target", "b"}, {"a", "also", "b"}, {"c", "target", "d"}};
    const KnowledgeGraph kg = KnowledgeGraph::ingest(lines);
    const auto types = enumerate_path_types(kg, *kg.relations().lookup("target"), 1, 100, 0);
    REQUIRE(types.size() == 1);
    CHECK(types[0].steps.size() == 1);
    CHECK(types[0].steps[0].relation == *kg.relations().lookup("also"));
}

TEST_CASE("walk probability on the movie graph") {
    const KnowledgeGraph kg = testing::movie_graph();
    const EntityId nimoy = *kg.entities().lookup("LeonardNimoy");
    const EntityId star_trek = *kg.entities().lookup("StarTrek");
    const PathType composed{{{*kg.relations().lookup("played"), Direction::forward},
                             {*kg.relations().lookup("characterIn"), Direction::forward}}};
    CHECK(path_probability(kg, nimoy, star_trek, composed) == 1.0);

    // dead-end first step
    const PathType dead{{{*kg.relations().lookup("genre"), Direction::forward},
                         {*kg.relations().lookup("genre"), Direction::forward}}};
    CHECK(path_probability(kg, nimoy, star_trek, dead) == 0.0);
}

TEST_CASE("walk probabilities match explicit enumeration and sum to at most one") {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        const auto lines = testing::random_triples(7, 3, 0.18, 400 + seed);
        const KnowledgeGraph kg = KnowledgeGraph::ingest(lines);
        Rng rng(seed);
        for (int trial = 0; trial < 6; ++trial) {
            PathType t;
            const int len = 1 + static_cast<int>(rng.uniform_index(3));
            for (int s = 0; s < len; ++s) {
                t.steps.push_back({static_cast<RelationId>(rng.uniform_index(
                                       static_cast<std::uint64_t>(kg.num_relations()))),
                                   rng.uniform() < 0.5 ? Direction::forward : Direction::inverse});
            }
            const EntityId i = static_cast<EntityId>(
                rng.uniform_index(static_cast<std::uint64_t>(kg.num_entities())));
            double total = 0.0;
            bool any_dead_end = false;
            for (EntityId j = 0; j < kg.num_entities(); ++j) {
                const double p = path_probability(kg, i, j, t);
                const double oracle = walk_enumeration_probability(kg, i, j, t, 0, 1.0);
                CHECK(p == doctest::Approx(oracle).epsilon(1e-12));
                CHECK(p >= 0.0);
                CHECK(p <= 1.0);
                total += p;
            }
            // mass is 1 exactly when no walk dies en route
            const double dead_mass = 1.0 - total;
            any_dead_end = dead_mass > 1e-12;
            CHECK(total <= 1.0 + 1e-12);
            if (!any_dead_end) CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("feature vectors have one entry per path type") {
    const KnowledgeGraph kg = testing::movie_graph();
    const RelationId starred = *kg.relations().lookup("starredIn");
    const auto types = enumerate_path_types(kg, starred, 2, 100, 0);
    const EntityId nimoy = *kg.entities().lookup("LeonardNimoy");
    const EntityId star_trek = *kg.entities().lookup("StarTrek");
    const Eigen::VectorXd phi = pra_features(kg, nimoy, star_trek, starred, types);
    CHECK(phi.size() == static_cast<Eigen::Index>(types.size()));
    CHECK((phi.array() >= 0.0).all());
    CHECK((phi.array() <= 1.0).all());

    // one realized path type on this graph: the feature vector is exactly [1.0]
    REQUIRE(types.size() == 1);
    CHECK(phi[0] == 1.0);

    // disconnected pair: all-zero vector
    const EntityId sf = *kg.entities().lookup("ScienceFiction");
    CHECK(pra_features(kg, sf, nimoy, starred, types).cwiseAbs().sum() == 0.0);
}

TEST_CASE("planted two-step rule is recovered with perfect held-out accuracy") {
    const testing::PlantedRule fixture = testing::planted_rule(10, 6, 10, 0.3, 4);
    const KnowledgeGraph kg = KnowledgeGraph::ingest(fixture.lines);
    const RelationId target = *kg.relations().lookup("target");
    const RelationId r1 = *kg.relations().lookup("r1");
    const RelationId r2 = *kg.relations().lookup("r2");

    auto resolve = [&](const std::vector<std::pair<std::string, std::string>>& pairs) {
        std::vector<Triple> out;
        for (const auto& [a, c] : pairs) {
            out.push_back({*kg.entities().lookup(a), target, *kg.entities().lookup(c)});
        }
        return out;
    };
    std::vector<Triple> pos = resolve(fixture.rule_pairs);
    std::vector<Triple> neg = resolve(fixture.nonrule_pairs);
    REQUIRE(pos.size() >= 10);
    REQUIRE(neg.size() >= 10);

    // 70/30 train/held-out split of both classes
    const auto split_at = [](std::vector<Triple>& v) {
        const std::size_t cut = v.size() * 7 / 10;
        std::vector<Triple> held(v.begin() + static_cast<std::ptrdiff_t>(cut), v.end());
        v.resize(cut);
        return held;
    };
    const std::vector<Triple> pos_held = split_at(pos);
    const std::vector<Triple> neg_held = split_at(neg);

    FitPraOptions opts;
    opts.l1_strength = 0.05;
    opts.max_path_length = 2;
    const PraFit fit = fit_pra(kg, target, pos, neg, opts);

    // the planted path carries the largest weight
    const PathType rule{{{r1, Direction::forward}, {r2, Direction::forward}}};
    REQUIRE(!fit.model.path_types.empty());
    Eigen::Index rule_idx = -1;
    for (Eigen::Index p = 0; p < static_cast<Eigen::Index>(fit.model.path_types.size()); ++p) {
        if (fit.model.path_types[static_cast<std::size_t>(p)] == rule) rule_idx = p;
    }
    REQUIRE(rule_idx >= 0);
    CHECK(fit.model.weights[rule_idx] == fit.model.weights.maxCoeff());
    CHECK(fit.model.weights[rule_idx] > 0.0);

    // held-out accuracy 100% at the 0.5 probability threshold
    for (const Triple& t : pos_held) {
        CHECK(sigmoid(pra_score(kg, fit.model, t.subject, t.object)) > 0.5);
    }
    for (const Triple& t : neg_held) {
        CHECK(sigmoid(pra_score(kg, fit.model, t.subject, t.object)) < 0.5);
    }

    // objective trace is non-increasing
    for (std::size_t i = 1; i < fit.objective.size(); ++i) {
        CHECK(fit.objective[i] <= fit.objective[i - 1] + 1e-9);
    }
}

TEST_CASE("extreme l1 drives all weights to zero and the bias to the base rate") {
    const testing::PlantedRule fixture = testing::planted_rule(8, 5, 8, 0.3, 6);
    const KnowledgeGraph kg = KnowledgeGraph::ingest(fixture.lines);
    const RelationId target = *kg.relations().lookup("target");
    std::vector<Triple> pos, neg;
    for (const auto& [a, c] : fixture.rule_pairs) {
        pos.push_back({*kg.entities().lookup(a), target, *kg.entities().lookup(c)});
    }
    for (const auto& [a, c] : fixture.nonrule_pairs) {
        neg.push_back({*kg.entities().lookup(a), target, *kg.entities().lookup(c)});
    }
    FitPraOptions opts;
    opts.l1_strength = 1e6;
    const PraFit fit = fit_pra(kg, target, pos, neg, opts);
    CHECK(fit.model.path_types.empty());
    CHECK(fit.model.weights.size() == 0);
    const double base_rate =
        static_cast<double>(pos.size()) / static_cast<double>(pos.size() + neg.size());
    const double logit = std::log(base_rate / (1.0 - base_rate));
    CHECK(fit.model.bias == doctest::Approx(logit).epsilon(1e-3));

    // pruning soundness: scoring with the pruned model is the full dot product
    CHECK(pra_score(kg, fit.model, pos.front().subject, pos.front().object) ==
          doctest::Approx(fit.model.bias));
}

TEST_CASE("single-class data is rejected") {
    const KnowledgeGraph kg = testing::movie_graph();
    const RelationId starred = *kg.relations().lookup("starredIn");
    std::vector<Triple> pos;
    for (const Triple& t : kg.positives()) {
        if (t.relation == starred) pos.push_back(t);
    }
    FitPraOptions opts;
    CHECK_THROWS_AS(fit_pra(kg, starred, pos, {}, opts), DataError);
}

TEST_CASE("rule rendering: ordering, inverse steps, counts") {
    const KnowledgeGraph kg = testing::movie_graph();
    PraModel model;
    model.relation = *kg.relations().lookup("starredIn");
    model.path_types = {
        PathType{{{*kg.relations().lookup("played"), Direction::forward},
                  {*kg.relations().lookup("characterIn"), Direction::forward}}},
        PathType{{{*kg.relations().lookup("genre"), Direction::inverse}}},
    };
    model.weights = Eigen::Vector2d(1.5, 2.62);
    model.bias = 0.1;

    const auto rules = pra_rules(model, kg);
    REQUIRE(rules.size() == 2);
    CHECK(rules[0].weight == 2.62);
    CHECK(rules[0].text == "(x, starredIn, y) ← (y, genre, x)");
    CHECK(rules[1].text ==
          "(x, starredIn, y) ← (x, played, z1) ∧ (z1, characterIn, y)");

    PraModel empty;
    empty.relation = model.relation;
    empty.weights = Eigen::VectorXd();
    CHECK(pra_rules(empty, kg).empty());
}

TEST_CASE("pra model json round-trip") {
    const KnowledgeGraph kg = testing::movie_graph();
    PraModel model;
    model.relation = *kg.relations().lookup("starredIn");
    model.path_types = {PathType{{{*kg.relations().lookup("played"), Direction::forward},
                                  {*kg.relations().lookup("characterIn"), Direction::forward}}}};
    model.weights = Eigen::VectorXd::Constant(1, 2.5);
    model.bias = -0.25;
    const auto path = std::filesystem::temp_directory_path() / "kglp_pra.json";
    save_pra_model(model, kg, path);
    const PraModel again = load_pra_model(kg, path);
    CHECK(again.relation == model.relation);
    CHECK(again.bias == model.bias);
    CHECK(again.path_types == model.path_types);
    CHECK(again.weights == model.weights);
    std::filesystem::remove(path);
}

TEST_CASE("feature extraction is pure") {
    const KnowledgeGraph kg = testing::movie_graph();
    const RelationId starred = *kg.relations().lookup("starredIn");
    const auto types = enumerate_path_types(kg, starred, 2, 100, 0);
    const Eigen::VectorXd a = pra_features(kg, 0, 2, starred, types);
    const Eigen::VectorXd b = pra_features(kg, 0, 2, starred, types);
    CHECK(a == b);
}
