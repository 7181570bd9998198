#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "kglp/sampling.hpp"
#include "support/fixtures.hpp"

using namespace kglp;

TEST_CASE("perturbation produces admissible unobserved corruptions") {
    const KnowledgeGraph kg = testing::movie_graph();
    const TypeConstraints tc = infer_type_constraints(kg);
    const Triple t{*kg.entities().lookup("LeonardNimoy"), *kg.relations().lookup("starredIn"),
                   *kg.entities().lookup("StarTrek")};

    const auto negs = perturb_negatives(kg, t, 4, tc, 17);
    REQUIRE(!negs.empty());
    // Object corruption admits only the other movie.
    const Triple expected{t.subject, t.relation, *kg.entities().lookup("StarWars")};
    CHECK(std::any_of(negs.begin(), negs.end(),
                      [&](const LabeledTriple& n) { return n.triple == expected; }));
    for (const auto& n : negs) {
        CHECK(n.label == 0);
        CHECK(!kg.contains(n.triple));
        CHECK(n.triple != t);
        const bool subject_changed = n.triple.subject != t.subject;
        const bool object_changed = n.triple.object != t.object;
        CHECK(subject_changed != object_changed);  // exactly one slot differs
        if (subject_changed) {
            CHECK(n.provenance == Provenance::perturbed_subject);
            CHECK(tc.subject_admissible(n.triple.relation, n.triple.subject));
        } else {
            CHECK(n.provenance == Provenance::perturbed_object);
            CHECK(tc.object_admissible(n.triple.relation, n.triple.object));
        }
    }
}

TEST_CASE("perturbation with no admissible corruption returns nothing") {
    const std::vector<StringTriple> lines = {{"a", "r", "b"}};
    const KnowledgeGraph kg = KnowledgeGraph::ingest(lines);
    const TypeConstraints tc = infer_type_constraints(kg);
    CHECK(perturb_negatives(kg, {0, 0, 1}, 3, tc, 5).empty());
}

TEST_CASE("perturbation requires a positive source") {
    const KnowledgeGraph kg = testing::movie_graph();
    const TypeConstraints tc = infer_type_constraints(kg);
    CHECK_THROWS_AS(perturb_negatives(kg, {0, 0, 0}, 1, tc, 1), DataError);
}

TEST_CASE("perturbation is deterministic and never emits positives") {
    for (std::uint64_t fixture = 0; fixture < 10; ++fixture) {
        const auto lines = testing::random_triples(9, 3, 0.15, 100 + fixture);
        const KnowledgeGraph kg = KnowledgeGraph::ingest(lines);
        const TypeConstraints tc = infer_type_constraints(kg);
        for (const Triple& t : kg.positives()) {
            const auto a = perturb_negatives(kg, t, 2, tc, fixture);
            const auto b = perturb_negatives(kg, t, 2, tc, fixture);
            REQUIRE(a.size() == b.size());
            for (std::size_t i = 0; i < a.size(); ++i) {
                CHECK(a[i].triple == b[i].triple);
                CHECK(!kg.contains(a[i].triple));
            }
        }
    }
}

TEST_CASE("lcwa: all admissible unobserved objects for seen pairs, nothing otherwise") {
    // Four people born in four cities; one person observed once.
    const std::vector<StringTriple> lines = {
        {"p1", "bornIn", "c1"}, {"p2", "bornIn", "c2"}, {"p3", "bornIn", "c3"},
        {"p4", "bornIn", "c4"}, {"p1", "livedIn", "c2"},
    };
    const KnowledgeGraph kg = KnowledgeGraph::ingest(lines);
    const TypeConstraints tc = infer_type_constraints(kg);
    const RelationId born = *kg.relations().lookup("bornIn");
    const EntityId p1 = *kg.entities().lookup("p1");

    const auto negs = lcwa_negatives(kg, p1, born, tc);
    CHECK(negs.size() == 3);  // 4 admissible cities minus the observed one
    for (const Triple& n : negs) {
        CHECK(n.subject == p1);
        CHECK(!kg.contains(n));
    }

    // returned objects plus observed objects cover the admissible set
    std::vector<EntityId> covered;
    for (const Triple& n : negs) covered.push_back(n.object);
    for (const EntityId j : kg.out_neighbors(p1, born, Direction::forward)) covered.push_back(j);
    std::sort(covered.begin(), covered.end());
    CHECK(covered == tc.objects[static_cast<std::size_t>(born)]);

    // unseen (subject, relation) pair abstains
    const RelationId lived = *kg.relations().lookup("livedIn");
    CHECK(lcwa_negatives(kg, *kg.entities().lookup("p2"), lived, tc).empty());
}

TEST_CASE("cwa sampling respects the cap, admissibility and determinism") {
    const KnowledgeGraph kg = testing::movie_graph();
    const TypeConstraints tc = infer_type_constraints(kg);

    CHECK(cwa_negatives(kg, tc, 0, 1).empty());

    const auto sample = cwa_negatives(kg, tc, 5, 7);
    CHECK(sample.size() <= 5);
    for (const Triple& t : sample) {
        CHECK(!kg.contains(t));
        CHECK(tc.subject_admissible(t.relation, t.subject));
        CHECK(tc.object_admissible(t.relation, t.object));
    }
    CHECK(cwa_negatives(kg, tc, 5, 7) == sample);

    // without type constraints, person x starredIn x movie combinations and
    // stranger triples appear in the complement
    const TypeConstraints open = open_type_constraints(kg);
    const auto wide = cwa_negatives(kg, open, 200, 3);
    const RelationId starred = *kg.relations().lookup("starredIn");
    const bool has_irrelevant =
        std::any_of(wide.begin(), wide.end(), [&](const Triple& t) {
            return t.relation == starred && !tc.subject_admissible(starred, t.subject);
        });
    CHECK(has_irrelevant);
}

TEST_CASE("cwa without replacement exhausts a small complement") {
    const std::vector<StringTriple> lines = {{"a", "r", "b"}, {"b", "r", "a"}};
    const KnowledgeGraph kg = KnowledgeGraph::ingest(lines);
    const TypeConstraints open = open_type_constraints(kg);
    // complement = 4 cells - 2 positives
    const auto all = cwa_negatives(kg, open, 10, 1);
    CHECK(all.size() == 2);
    std::set<Triple> unique(all.begin(), all.end());
    CHECK(unique.size() == all.size());
}

TEST_CASE("labeled set construction enforces disjointness") {
    const KnowledgeGraph kg = testing::movie_graph();
    const TypeConstraints tc = infer_type_constraints(kg);
    const auto negs = perturb_negatives(kg, kg.positives().front(), 1, tc, 2);
    const LabeledTripleSet set = LabeledTripleSet::build(kg, kg.positives(), negs);
    CHECK(set.num_positives() == kg.positives().size());
    CHECK(set.num_negatives() == negs.size());

    const LabeledTriple bad{kg.positives().front(), 0, Provenance::cwa};
    CHECK_THROWS_AS(LabeledTripleSet::build(kg, kg.positives(), std::vector<LabeledTriple>{bad}),
                    DataError);
}

TEST_CASE("labeled TSV export carries label and provenance columns") {
    const KnowledgeGraph kg = testing::movie_graph();
    const TypeConstraints tc = infer_type_constraints(kg);
    auto items = perturb_negatives(kg, kg.positives().front(), 1, tc, 2);
    items.push_back({kg.positives().front(), 1, Provenance::observed});
    const auto path = std::filesystem::temp_directory_path() / "kglp_labeled.tsv";
    write_labeled_tsv(kg, items, path);

    std::ifstream in(path);
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        CHECK(std::count(line.begin(), line.end(), '\t') == 4);
        ++rows;
    }
    CHECK(rows == items.size());
    std::filesystem::remove(path);
}
