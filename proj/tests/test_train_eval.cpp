#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kglp/eval.hpp"
#include "kglp/train.hpp"
#include "support/fixtures.hpp"

using namespace kglp;

TEST_CASE("loss values") {
    CHECK(margin_ranking_loss(2.0, 0.5) == 0.0);
    CHECK(margin_ranking_loss(0.2, 0.5) == doctest::Approx(1.3).epsilon(1e-12));
    CHECK(log_loss(0.5, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(squared_loss(0.25, 1) == doctest::Approx(0.5625).epsilon(1e-12));

    bool clamped = false;
    CHECK(std::isfinite(log_loss(0.0, 1, &clamped)));
    CHECK(clamped);
    log_loss(0.3, 1, &clamped);
    CHECK(!clamped);

    // ranking loss is zero exactly when the margin is met
    CHECK(margin_ranking_loss(1.0, 0.0) == 0.0);
    CHECK(margin_ranking_loss(0.999, 0.0) > 0.0);
}

namespace {

struct TranslationFixture {
    KnowledgeGraph kg;
    TypeConstraints constraints;
    std::vector<Triple> train;
    std::vector<Triple> test;
};

TranslationFixture translation_fixture(std::uint64_t seed, bool with_reverse = false) {
    const auto lines = testing::grid_translation_triples(5, 4, with_reverse);  // 20 entities
    KnowledgeGraph kg = KnowledgeGraph::ingest(lines);
    const Split split = holdout_split(kg, {0.8, 0.1, 0.1}, seed);
    TranslationFixture f{std::move(kg), {}, split.train, split.test};
    f.test.insert(f.test.end(), split.valid.begin(), split.valid.end());
    f.constraints = infer_type_constraints(f.kg);
    return f;
}

/// Standard filtered protocol: candidates from the full entity set.
double filtered_mrr(const LatentModel& model, const TranslationFixture& f) {
    const TripleScorer scorer = [&](const Triple& t) { return score(model, t); };
    const RankingReport report =
        evaluate_ranking(scorer, f.kg, open_type_constraints(f.kg), f.test, /*filtered=*/true);
    return report.mrr;
}

}  // namespace

TEST_CASE("translation training beats the untrained baseline fivefold") {
    const TranslationFixture f = translation_fixture(3, /*with_reverse=*/true);

    ModelConfig cfg;
    cfg.kind = ModelKind::transe;
    cfg.h_entity = 4;
    const LatentModel untrained = init_model(cfg, f.kg.num_entities(), f.kg.num_relations(), 12);
    const double baseline = filtered_mrr(untrained, f);

    TrainConfig tc;
    tc.loss = LossKind::margin_ranking;
    tc.learning_rate = 0.05;
    tc.epochs = 1000;
    tc.margin = 1.0;
    tc.seed = 12;
    const TrainResult trained = sgd_train(untrained, f.kg, f.train, f.constraints, tc);
    CHECK(!trained.aborted_non_finite);
    const double mrr_trained = filtered_mrr(trained.model, f);

    CHECK(baseline < 0.4);  // sanity: the untrained model is near chance
    CHECK(mrr_trained >= 5.0 * baseline);
    CHECK(trained.epoch_loss.back() <= trained.epoch_loss.front());
}

TEST_CASE("zero learning rate leaves parameters bit-identical") {
    const TranslationFixture f = translation_fixture(5);
    ModelConfig cfg;
    cfg.kind = ModelKind::transe;
    cfg.h_entity = 3;
    const LatentModel init = init_model(cfg, f.kg.num_entities(), f.kg.num_relations(), 7);
    TrainConfig tc;
    tc.learning_rate = 0.0;
    tc.epochs = 3;
    tc.seed = 7;
    const TrainResult result = sgd_train(init, f.kg, f.train, f.constraints, tc);
    CHECK(flatten_parameters(result.model) == flatten_parameters(init));
}

TEST_CASE("dominant regularization shrinks parameter norms monotonically") {
    const TranslationFixture f = translation_fixture(6);
    ModelConfig cfg;
    cfg.kind = ModelKind::transe;
    cfg.h_entity = 3;
    LatentModel model = init_model(cfg, f.kg.num_entities(), f.kg.num_relations(), 8);
    TrainConfig tc;
    tc.loss = LossKind::log_loss;
    tc.learning_rate = 5e-7;
    tc.lambda = 1e6;  // lr * lambda = 0.5 per touch
    tc.epochs = 1;
    tc.seed = 8;
    double previous = flatten_parameters(model).norm();
    for (int round = 0; round < 12; ++round) {
        tc.seed = 8 + static_cast<std::uint64_t>(round);
        model = sgd_train(model, f.kg, f.train, f.constraints, tc).model;
        const double now = flatten_parameters(model).norm();
        CHECK(now < previous);
        previous = now;
    }
    CHECK(previous < 0.2);
}

TEST_CASE("identical seeds give identical trajectories") {
    const TranslationFixture f = translation_fixture(9);
    ModelConfig cfg;
    cfg.kind = ModelKind::transe;
    cfg.h_entity = 4;
    const LatentModel init = init_model(cfg, f.kg.num_entities(), f.kg.num_relations(), 4);
    TrainConfig tc;
    tc.learning_rate = 0.03;
    tc.epochs = 20;
    tc.seed = 99;
    const TrainResult a = sgd_train(init, f.kg, f.train, f.constraints, tc);
    const TrainResult b = sgd_train(init, f.kg, f.train, f.constraints, tc);
    CHECK(flatten_parameters(a.model) == flatten_parameters(b.model));
    CHECK(a.epoch_loss == b.epoch_loss);
}

TEST_CASE("non-finite loss aborts with the last finite checkpoint") {
    const TranslationFixture f = translation_fixture(15);
    ModelConfig cfg;
    cfg.kind = ModelKind::transe;
    cfg.h_entity = 3;
    const LatentModel init = init_model(cfg, f.kg.num_entities(), f.kg.num_relations(), 6);
    TrainConfig tc;
    tc.loss = LossKind::margin_ranking;
    tc.learning_rate = 1e300;  // guaranteed overflow
    tc.epochs = 4;
    tc.seed = 6;
    const TrainResult result = sgd_train(init, f.kg, f.train, f.constraints, tc);
    CHECK(result.aborted_non_finite);
    // the returned model is the epoch-start checkpoint, here the initializer
    CHECK(flatten_parameters(result.model) == flatten_parameters(init));
}

TEST_CASE("other regimes and losses run end to end") {
    const TranslationFixture f = translation_fixture(11);
    ModelConfig cfg;
    cfg.kind = ModelKind::rescal;
    cfg.h_entity = 3;
    const LatentModel init = init_model(cfg, f.kg.num_entities(), f.kg.num_relations(), 2);
    for (const NegativeRegime regime :
         {NegativeRegime::perturbation, NegativeRegime::lcwa, NegativeRegime::cwa}) {
        TrainConfig tc;
        tc.loss = LossKind::log_loss;
        tc.learning_rate = 0.05;
        tc.epochs = 5;
        tc.regime = regime;
        tc.seed = 31;
        const TrainResult result = sgd_train(init, f.kg, f.train, f.constraints, tc);
        CHECK(!result.aborted_non_finite);
        CHECK(result.epoch_loss.size() == 5);
    }
}

TEST_CASE("entity ranking: top rank, mid-rank ties, filtering") {
    const KnowledgeGraph kg = testing::movie_graph();
    const TypeConstraints open = open_type_constraints(kg);
    const Triple t = kg.positives().front();

    SUBCASE("a scorer that puts the truth strictly highest gives rank 1") {
        const TripleScorer scorer = [&](const Triple& q) { return q == t ? 10.0 : 0.0; };
        CHECK(rank_entities(scorer, kg, open, t, CorruptSide::object, false) == 1.0);
        CHECK(rank_entities(scorer, kg, open, t, CorruptSide::subject, false) == 1.0);
    }

    SUBCASE("all-equal scores take the mid-rank") {
        const TripleScorer flat = [](const Triple&) { return 1.0; };
        const double m = static_cast<double>(kg.num_entities());
        CHECK(rank_entities(flat, kg, open, t, CorruptSide::object, false) == (m + 1.0) / 2.0);
    }

    SUBCASE("filtered rank never exceeds the raw rank") {
        for (std::uint64_t seed = 0; seed < 6; ++seed) {
            const auto lines = testing::random_triples(8, 2, 0.25, 500 + seed);
            const KnowledgeGraph rkg = KnowledgeGraph::ingest(lines);
            const TypeConstraints ropen = open_type_constraints(rkg);
            Rng rng(seed);
            const TripleScorer scorer = [&](const Triple& q) {
                return std::sin(static_cast<double>(q.subject * 31 + q.relation * 7 + q.object));
            };
            for (const Triple& pt : rkg.positives()) {
                for (const CorruptSide side : {CorruptSide::object, CorruptSide::subject}) {
                    CHECK(rank_entities(scorer, rkg, ropen, pt, side, true) <=
                          rank_entities(scorer, rkg, ropen, pt, side, false));
                }
            }
        }
    }
}

TEST_CASE("threshold metrics") {
    SUBCASE("perfect separation gives AUC-ROC 1") {
        const std::vector<double> scores = {3.0, 2.5, 1.0, 0.5};
        const std::vector<int> labels = {1, 1, 0, 0};
        CHECK(auc_roc(scores, labels) == 1.0);
    }

    SUBCASE("mrr of {1,2,4}") {
        const std::vector<double> ranks = {1, 2, 4};
        CHECK(mrr(ranks) == doctest::Approx(0.5833333333333333).epsilon(1e-12));
    }

    SUBCASE("mrr of an oracle that always ranks the truth first is 1") {
        const std::vector<double> ranks = {1, 1, 1, 1};
        CHECK(mrr(ranks) == 1.0);
    }

    SUBCASE("rank-sum AUC equals the pairwise oracle, ties counted half") {
        Rng rng(2024);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t n = 2 + rng.uniform_index(99);
            std::vector<double> scores(n);
            std::vector<int> labels(n);
            bool pos = false, neg = false;
            for (std::size_t i = 0; i < n; ++i) {
                // quantized scores so ties actually occur
                scores[i] = std::floor(rng.uniform() * 8.0) / 4.0;
                labels[i] = rng.uniform() < 0.4 ? 1 : 0;
                (labels[i] ? pos : neg) = true;
            }
            if (!pos || !neg) continue;
            double wins = 0.0;
            for (std::size_t a = 0; a < n; ++a) {
                if (labels[a] != 1) continue;
                for (std::size_t b = 0; b < n; ++b) {
                    if (labels[b] != 0) continue;
                    if (scores[a] > scores[b]) {
                        wins += 1.0;
                    } else if (scores[a] == scores[b]) {
                        wins += 0.5;
                    }
                }
            }
            const auto n_pos = std::count(labels.begin(), labels.end(), 1);
            const double oracle =
                wins / (static_cast<double>(n_pos) * static_cast<double>(n - n_pos));
            CHECK(auc_roc(scores, labels) == oracle);
        }
    }

    SUBCASE("AUC-ROC is invariant under strictly increasing transforms") {
        Rng rng(77);
        std::vector<double> scores(60);
        std::vector<int> labels(60);
        for (std::size_t i = 0; i < scores.size(); ++i) {
            scores[i] = rng.normal();
            labels[i] = i % 3 == 0 ? 1 : 0;
        }
        const double base = auc_roc(scores, labels);
        std::vector<double> exp_scores = scores, affine_scores = scores;
        for (auto& s : exp_scores) s = std::exp(s);
        for (auto& s : affine_scores) s = 3.0 * s + 11.0;
        CHECK(auc_roc(exp_scores, labels) == base);
        CHECK(auc_roc(affine_scores, labels) == base);
    }

    SUBCASE("single-class input is rejected") {
        const std::vector<double> scores = {1.0, 2.0};
        const std::vector<int> ones = {1, 1};
        CHECK_THROWS_AS(auc_roc(scores, ones), DataError);
        CHECK_THROWS_AS(auc_pr(scores, ones), DataError);
    }

    SUBCASE("heavy negative imbalance: AUC-PR below AUC-ROC for a mediocre scorer") {
        Rng rng(31337);
        std::vector<double> scores;
        std::vector<int> labels;
        for (int i = 0; i < 10; ++i) {
            scores.push_back(1.0 + rng.normal());
            labels.push_back(1);
        }
        for (int i = 0; i < 1000; ++i) {
            scores.push_back(rng.normal());
            labels.push_back(0);
        }
        const double roc = auc_roc(scores, labels);
        const double pr = auc_pr(scores, labels);
        CHECK(roc > 0.6);  // mediocre but informative
        CHECK(pr < roc);
    }

    SUBCASE("AUC-PR is 1 for perfect separation") {
        const std::vector<double> scores = {3.0, 2.5, 1.0, 0.5};
        const std::vector<int> labels = {1, 1, 0, 0};
        CHECK(auc_pr(scores, labels) == 1.0);
    }
}

TEST_CASE("ranking report aggregates both corruption sides") {
    const TranslationFixture f = translation_fixture(13);
    const TripleScorer scorer = [&](const Triple& q) {
        return f.kg.contains(q) ? 1.0 : -1.0;  // membership oracle
    };
    const RankingReport report = evaluate_ranking(scorer, f.kg, f.constraints, f.test, true);
    CHECK(report.ranks.size() == f.test.size());
    CHECK(report.mrr == 1.0);  // truth is the only known positive among candidates
    CHECK(report.auc_roc == 1.0);

    // threaded evaluation is identical
    const RankingReport threaded = evaluate_ranking(scorer, f.kg, f.constraints, f.test, true, 2);
    CHECK(threaded.mrr == report.mrr);
    CHECK(threaded.auc_pr == report.auc_pr);
}

TEST_CASE("cross-validation selects the dominant config deterministically") {
    const auto lines = testing::random_triples(10, 2, 0.2, 7);
    const KnowledgeGraph kg = KnowledgeGraph::ingest(lines);

    SUBCASE("single config is returned") {
        const auto report = cross_validate(1, kg.positives(), 3, 5,
                                           [](std::size_t, auto, auto) { return 0.5; });
        CHECK(report.best_config == 0);
    }

    SUBCASE("strict domination wins on every fold") {
        const auto report = cross_validate(
            2, kg.positives(), 4, 5, [](std::size_t config, auto train, auto valid) {
                // config 1 dominates: higher on every fold
                return (config == 1 ? 0.9 : 0.4) +
                       0.01 * static_cast<double>(valid.size()) /
                           static_cast<double>(train.size() + 1);
            });
        CHECK(report.best_config == 1);
        for (std::size_t f = 0; f < report.fold_metrics[0].size(); ++f) {
            CHECK(report.fold_metrics[1][f] > report.fold_metrics[0][f]);
        }
    }

    SUBCASE("fold partitions are reproducible from the seed") {
        std::vector<std::vector<Triple>> first_run;
        cross_validate(1, kg.positives(), 3, 9, [&](std::size_t, auto train, auto) {
            first_run.emplace_back(train.begin(), train.end());
            return 0.0;
        });
        std::size_t at = 0;
        cross_validate(1, kg.positives(), 3, 9, [&](std::size_t, auto train, auto) {
            CHECK(std::vector<Triple>(train.begin(), train.end()) == first_run[at++]);
            return 0.0;
        });
    }

    SUBCASE("degenerate inputs are rejected") {
        CHECK_THROWS_AS(
            cross_validate(0, kg.positives(), 3, 1, [](std::size_t, auto, auto) { return 0.0; }),
            DataError);
        CHECK_THROWS_AS(
            cross_validate(1, kg.positives(), 1, 1, [](std::size_t, auto, auto) { return 0.0; }),
            DataError);
    }

    SUBCASE("report writers emit one row per config and fold") {
        const auto report = cross_validate(
            2, kg.positives(), 3, 5,
            [](std::size_t config, auto, auto) { return config == 0 ? 0.7 : 0.2; });
        const std::vector<std::string> names = {"small", "large"};
        const auto dir = std::filesystem::temp_directory_path();
        write_cross_validation_tsv(report, names, dir / "kglp_cv.tsv");
        write_cross_validation_json(report, names, dir / "kglp_cv.json");

        std::ifstream tsv(dir / "kglp_cv.tsv");
        std::string line;
        std::size_t rows = 0;
        while (std::getline(tsv, line)) ++rows;
        CHECK(rows == 1 + 2 * (3 + 1));  // header + per-fold rows + mean rows

        std::ifstream json_in(dir / "kglp_cv.json");
        std::stringstream ss;
        ss << json_in.rdbuf();
        CHECK(ss.str().find("\"best_config\": \"small\"") != std::string::npos);
        std::filesystem::remove(dir / "kglp_cv.tsv");
        std::filesystem::remove(dir / "kglp_cv.json");
    }
}
