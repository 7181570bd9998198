// kglp: knowledge-graph link prediction experiments.
//
// Subcommands: import, split, train, evaluate, predict, rules,
// export-embeddings. Every artifact-producing run stages its outputs in a
// temporary directory, writes a replayable manifest, and renames the directory
// into place, so an output directory either holds a complete run or nothing.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "kglp/eval.hpp"
#include "kglp/fusion.hpp"
#include "kglp/graph.hpp"
#include "kglp/graphfeat.hpp"
#include "kglp/latent.hpp"
#include "kglp/rescal_als.hpp"
#include "kglp/rng.hpp"
#include "kglp/sampling.hpp"
#include "kglp/train.hpp"

namespace fs = std::filesystem;
using namespace kglp;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

// --- staged output directories ---------------------------------------------------

/// Writes everything into `<out>.staging`, then renames to `<out>` on commit.
class StagedDir {
public:
    StagedDir(fs::path target, bool force) : target_(std::move(target)) {
        if (fs::exists(target_)) {
            if (!force) throw DataError("output directory exists: " + target_.string());
            fs::remove_all(target_);
        }
        staging_ = target_;
        staging_ += ".staging";
        fs::remove_all(staging_);
        fs::create_directories(staging_);
    }

    ~StagedDir() {
        if (!committed_) {
            std::error_code ec;
            fs::remove_all(staging_, ec);
        }
    }

    const fs::path& path() const { return staging_; }

    void commit() {
        fs::rename(staging_, target_);
        committed_ = true;
    }

private:
    fs::path target_;
    fs::path staging_;
    bool committed_ = false;
};

void write_manifest(CLI::App* cmd, const fs::path& dir) {
    std::ofstream out(dir / "manifest");
    if (!out) throw DataError("cannot write manifest");
    const CLI::App* root = cmd;
    while (root->get_parent() != nullptr) root = root->get_parent();
    out << "# kglp manifest v1\n";
    out << "# kglp-version: " << kVersion << "\n";
    out << "# command: " << cmd->get_name() << "\n";
    // keep only the invoked subcommand's keys
    std::istringstream config(root->config_to_str(true, false));
    const std::string prefix = cmd->get_name() + ".";
    std::string line;
    while (std::getline(config, line)) {
        if (line.rfind(prefix, 0) == 0) out << line << '\n';
    }
}

// --- shared option blocks ----------------------------------------------------------

struct CommonOpts {
    std::string kg_path;
    std::string out;
    std::uint64_t seed = 0;
    int threads = 1;
    bool deterministic = false;
    bool force = false;

    int worker_threads() const { return deterministic ? 1 : threads; }
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_out = true) {
    cmd->add_option("--kg", o.kg_path, "Binary knowledge-graph file")->required();
    if (with_out) cmd->add_option("--out", o.out, "Output directory")->required();
    cmd->add_option("--seed", o.seed, "Global seed; all randomness derives from it");
    cmd->add_option("--threads", o.threads, "Worker thread cap")->check(CLI::PositiveNumber);
    cmd->add_flag("--deterministic", o.deterministic, "Force sequential execution");
    cmd->add_flag("--force", o.force, "Replace an existing output directory");
}

std::vector<Triple> load_split_triples(const KnowledgeGraph& kg, const std::string& path) {
    const auto lines = read_triple_file(path);
    return resolve_triples(kg, lines);
}

// --- model loading for evaluate/predict/rules --------------------------------------

struct LoadedModel {
    TripleScorer scorer;
    std::optional<LatentModel> latent;     // set for plain latent models
    std::optional<AreModel> are;           // set for combination models
    std::vector<PraModel> pra_models;      // set for path-feature bundles
};

LoadedModel load_any_model(const KnowledgeGraph& kg, const fs::path& path);

TripleScorer pra_bundle_scorer(const KnowledgeGraph& kg, std::vector<PraModel> models) {
    auto by_relation = std::make_shared<std::vector<std::optional<PraModel>>>(
        static_cast<std::size_t>(kg.num_relations()), std::nullopt);
    for (auto& m : models) (*by_relation)[static_cast<std::size_t>(m.relation)] = std::move(m);
    return [&kg, by_relation](const Triple& t) {
        const auto& m = (*by_relation)[static_cast<std::size_t>(t.relation)];
        return m.has_value() ? pra_score(kg, *m, t.subject, t.object) : 0.0;
    };
}

LoadedModel load_stacked_model(const KnowledgeGraph& kg, const fs::path& path) {
    std::vector<std::string> base_files;
    const StackedModel stacked = load_stacked(path, &base_files);
    auto bases = std::make_shared<std::vector<TripleScorer>>();
    for (const auto& file : base_files) {
        fs::path base_path(file);
        if (base_path.is_relative()) base_path = path.parent_path() / base_path;
        bases->push_back(load_any_model(kg, base_path).scorer);
    }
    LoadedModel out;
    auto model = std::make_shared<StackedModel>(stacked);
    out.scorer = [bases, model](const Triple& t) {
        Eigen::VectorXd scores(static_cast<Eigen::Index>(bases->size()));
        for (std::size_t b = 0; b < bases->size(); ++b) {
            scores[static_cast<Eigen::Index>(b)] = (*bases)[b](t);
        }
        return stacked_score(*model, scores);
    };
    return out;
}

LoadedModel load_any_model(const KnowledgeGraph& kg, const fs::path& path) {
    LoadedModel out;
    if (fs::is_directory(path)) {
        if (fs::exists(path / "are.json")) {
            auto model = std::make_shared<AreModel>(load_are(kg, path));
            out.are = *model;
            out.scorer = [&kg, model](const Triple& t) { return are_score(kg, *model, t); };
            return out;
        }
        if (fs::exists(path / "pra.json")) {
            std::ifstream in(path / "pra.json");
            nlohmann::json j;
            in >> j;
            std::vector<PraModel> models;
            for (const auto& entry : j.at("files")) {
                models.push_back(load_pra_model(kg, path / entry.get<std::string>()));
            }
            out.pra_models = models;
            out.scorer = pra_bundle_scorer(kg, std::move(models));
            return out;
        }
        if (fs::exists(path / "stacked.json")) return load_stacked_model(kg, path / "stacked.json");
        if (fs::exists(path / "model.kgm")) {
            auto model = std::make_shared<LatentModel>(load_model(path / "model.kgm"));
            out.latent = *model;
            out.scorer = [model](const Triple& t) { return score(*model, t); };
            return out;
        }
        throw DataError("no recognizable model in directory: " + path.string());
    }
    if (path.extension() == ".kgm") {
        auto model = std::make_shared<LatentModel>(load_model(path));
        out.latent = *model;
        out.scorer = [model](const Triple& t) { return score(*model, t); };
        return out;
    }
    if (path.extension() == ".json") {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open model: " + path.string());
        nlohmann::json j;
        in >> j;
        const std::string format = j.value("format", "");
        if (format == "kglp-pra") {
            std::vector<PraModel> models = {load_pra_model(kg, path)};
            out.pra_models = models;
            out.scorer = pra_bundle_scorer(kg, std::move(models));
            return out;
        }
        if (format == "kglp-stacked") return load_stacked_model(kg, path);
        throw DataError("unrecognized model format: " + format);
    }
    throw DataError("unrecognized model file: " + path.string());
}

// --- negative generation for labeled training sets ---------------------------------

LabeledTripleSet build_labeled_set(const KnowledgeGraph& kg, std::span<const Triple> positives,
                                   const TypeConstraints& constraints, int per_side,
                                   std::uint64_t seed) {
    std::vector<LabeledTriple> negatives;
    for (const Triple& t : positives) {
        const auto negs = perturb_negatives(kg, t, per_side, constraints, seed);
        negatives.insert(negatives.end(), negs.begin(), negs.end());
    }
    return LabeledTripleSet::build(kg, positives, negatives);
}

// --- train subcommand ---------------------------------------------------------------

struct TrainOpts {
    CommonOpts common;
    std::string model = "transe";
    std::string train_path;
    // latent dims
    int rank = 16;
    int h_relation = 8;
    int h_additive = 8;
    int h_bilinear = 2;
    int h_combined = 16;
    std::string nonlinearity = "tanh";
    std::string distance = "squared-euclidean";
    // sgd
    std::string loss = "margin-ranking";
    std::string regime = "perturbation";
    double learning_rate = 0.01;
    int epochs = 200;
    double lambda = 1e-4;
    double margin = 1.0;
    // als
    double lambda_e = 1e-2;
    double lambda_w = 1e-2;
    int iters = 50;
    // pra / are
    double l1 = 1e-3;
    double tol = 1e-6;
    int path_length = 2;
    std::size_t budget = 2000;
    int rounds = 50;
    // stacking
    std::vector<std::string> base_files;
    std::string valid_path;
};

LossKind loss_from_name(const std::string& name) {
    if (name == "log") return LossKind::log_loss;
    if (name == "squared") return LossKind::squared_loss;
    if (name == "margin-ranking" || name == "ranking") return LossKind::margin_ranking;
    throw DataError("unknown loss: " + name);
}

int run_train(TrainOpts& o, CLI::App* cmd) {
    const KnowledgeGraph kg = load_kg(o.common.kg_path);
    const TypeConstraints constraints = infer_type_constraints(kg);
    const std::vector<Triple> train =
        o.train_path.empty() ? kg.positives() : load_split_triples(kg, o.train_path);
    if (train.empty()) throw DataError("empty training split");

    StagedDir staged(o.common.out, o.common.force);
    const fs::path dir = staged.path();
    bool numerical_failure = false;

    if (o.model == "rescal-als") {
        AlsOptions als;
        als.rank = o.rank;
        als.lambda_entities = o.lambda_e;
        als.lambda_relations = o.lambda_w;
        als.max_iters = o.iters;
        als.seed = o.common.seed;
        als.threads = o.common.worker_threads();
        als.trace_half_updates = true;
        std::vector<SparseSlice> slices;
        if (o.train_path.empty()) {
            for (RelationId k = 0; k < kg.num_relations(); ++k) slices.push_back(kg.slice(k));
        } else {
            // closed-world fit on the training subset only
            std::vector<std::vector<Eigen::Triplet<double>>> entries(
                static_cast<std::size_t>(kg.num_relations()));
            for (const Triple& t : train) {
                entries[static_cast<std::size_t>(t.relation)].emplace_back(t.subject, t.object, 1.0);
            }
            for (auto& e : entries) {
                SparseSlice s(kg.num_entities(), kg.num_entities());
                s.setFromTriplets(e.begin(), e.end());
                slices.push_back(std::move(s));
            }
        }
        const AlsResult result = fit_rescal_als(slices, als);
        save_model(result.model, dir / "model.kgm", o.common.seed);
        std::ofstream trace(dir / "loss_trace.csv");
        trace << "iteration,stage,loss\n";
        for (const auto& p : result.trace) {
            trace << p.iteration << ',' << p.stage << ',' << p.loss << '\n';
        }
        nlohmann::json info;
        info["final_loss"] = result.final_loss;
        info["used_pseudo_inverse"] = result.used_pseudo_inverse;
        std::ofstream(dir / "train.json") << info.dump(2) << '\n';
    } else if (o.model == "pra") {
        std::vector<std::vector<Triple>> by_relation(static_cast<std::size_t>(kg.num_relations()));
        for (const Triple& t : train) by_relation[static_cast<std::size_t>(t.relation)].push_back(t);
        nlohmann::json bundle;
        bundle["format"] = "kglp-pra-bundle";
        bundle["version"] = 1;
        nlohmann::json files = nlohmann::json::array();
        nlohmann::json skipped = nlohmann::json::array();
        for (RelationId k = 0; k < kg.num_relations(); ++k) {
            const auto& pos = by_relation[static_cast<std::size_t>(k)];
            if (pos.empty()) {
                skipped.push_back(kg.relations().name(k));
                continue;
            }
            std::vector<LabeledTriple> negs;
            for (const Triple& t : pos) {
                const auto n =
                    perturb_negatives(kg, t, 1, constraints, derive_seed(o.common.seed, "pra-neg"));
                negs.insert(negs.end(), n.begin(), n.end());
            }
            if (negs.empty()) {
                skipped.push_back(kg.relations().name(k));
                continue;
            }
            std::vector<Triple> neg_triples;
            for (const auto& n : negs) neg_triples.push_back(n.triple);
            FitPraOptions popts;
            popts.l1_strength = o.l1;
            popts.tol = o.tol;
            popts.max_path_length = o.path_length;
            popts.budget = o.budget;
            popts.seed = derive_seed(o.common.seed, "pra-paths", static_cast<std::uint64_t>(k));
            const PraFit fit = fit_pra(kg, k, pos, neg_triples, popts);
            const std::string file = "pra_" + std::to_string(k) + ".json";
            save_pra_model(fit.model, kg, dir / file);
            files.push_back(file);
        }
        bundle["files"] = files;
        bundle["skipped_relations"] = skipped;
        std::ofstream(dir / "pra.json") << bundle.dump(2) << '\n';
    } else if (o.model == "are") {
        const LabeledTripleSet data = build_labeled_set(kg, train, constraints, 1,
                                                        derive_seed(o.common.seed, "are-neg"));
        AreFitOptions aopts;
        aopts.rank = o.rank;
        aopts.learning_rate = o.learning_rate;
        aopts.lambda = o.lambda;
        aopts.max_rounds = o.rounds;
        aopts.tol = o.tol;
        aopts.l1_strength = o.l1;
        aopts.max_path_length = o.path_length;
        aopts.budget = o.budget;
        aopts.seed = o.common.seed;
        const AreFit fit = fit_are(kg, data, aopts);
        save_are(fit.model, kg, dir);
        write_loss_trace_csv(fit.loss, dir / "loss_trace.csv");
        if (fit.diverged) numerical_failure = true;
    } else if (o.model == "stacked") {
        if (o.base_files.size() < 2) throw DataError("stacking needs --base with >= 2 model files");
        if (o.valid_path.empty()) throw DataError("stacking needs --valid, disjoint from base training");
        std::vector<TripleScorer> bases;
        for (const auto& f : o.base_files) bases.push_back(load_any_model(kg, f).scorer);
        const std::vector<Triple> valid = load_split_triples(kg, o.valid_path);
        const LabeledTripleSet data = build_labeled_set(kg, valid, constraints, 1,
                                                        derive_seed(o.common.seed, "stack-neg"));
        Eigen::MatrixXd scores(static_cast<Eigen::Index>(data.items.size()),
                               static_cast<Eigen::Index>(bases.size()));
        Eigen::VectorXi labels(static_cast<Eigen::Index>(data.items.size()));
        for (std::size_t i = 0; i < data.items.size(); ++i) {
            for (std::size_t b = 0; b < bases.size(); ++b) {
                scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) =
                    bases[b](data.items[i].triple);
            }
            labels[static_cast<Eigen::Index>(i)] = data.items[i].label;
        }
        const StackedModel model = fit_stacker(scores, labels);
        std::vector<std::string> base_abs;
        for (const auto& f : o.base_files) base_abs.push_back(fs::absolute(f).string());
        save_stacked(model, base_abs, dir / "stacked.json");
    } else {
        // sgd-trained latent model
        ModelConfig cfg;
        cfg.kind = model_kind_from_name(o.model);
        cfg.h_entity = o.rank;
        cfg.h_relation = o.h_relation;
        cfg.h_additive = o.h_additive;
        cfg.h_bilinear = o.h_bilinear;
        cfg.h_combined = o.h_combined;
        cfg.g = o.nonlinearity == "identity" ? Nonlinearity::identity : Nonlinearity::tanh;
        cfg.distance =
            o.distance == "l1" ? TranseDistance::l1 : TranseDistance::squared_euclidean;
        const LatentModel init =
            init_model(cfg, kg.num_entities(), kg.num_relations(), o.common.seed);
        TrainConfig tc;
        tc.loss = loss_from_name(o.loss);
        tc.learning_rate = o.learning_rate;
        tc.epochs = o.epochs;
        tc.lambda = o.lambda;
        tc.regime = negative_regime_from_name(o.regime);
        tc.margin = o.margin;
        tc.seed = o.common.seed;
        const TrainResult result = sgd_train(init, kg, train, constraints, tc);
        save_model(result.model, dir / "model.kgm", o.common.seed);
        write_loss_trace_csv(result.epoch_loss, dir / "loss_trace.csv");
        if (result.aborted_non_finite) numerical_failure = true;
    }

    write_manifest(cmd, dir);
    staged.commit();
    if (numerical_failure) {
        std::cerr << "kglp: training aborted on numerical failure; last checkpoint written\n";
        return kExitNumerical;
    }
    std::cout << "trained " << o.model << " -> " << o.common.out << "\n";
    return 0;
}

// --- evaluate subcommand -------------------------------------------------------------

struct EvalOpts {
    CommonOpts common;
    std::string model_path;
    std::string test_path;
    bool raw = false;
    bool no_type_filter = false;
};

int run_evaluate(EvalOpts& o, CLI::App* cmd) {
    const KnowledgeGraph kg = load_kg(o.common.kg_path);
    const TypeConstraints constraints =
        o.no_type_filter ? open_type_constraints(kg) : infer_type_constraints(kg);
    const LoadedModel model = load_any_model(kg, o.model_path);
    const std::vector<Triple> test = load_split_triples(kg, o.test_path);
    if (test.empty()) throw DataError("empty test split");

    const RankingReport report = evaluate_ranking(model.scorer, kg, constraints, test, !o.raw,
                                                  o.common.worker_threads());

    StagedDir staged(o.common.out, o.common.force);
    write_ranking_report_json(report, staged.path() / "metrics.json");
    write_ranking_report_tsv(report, kg, staged.path() / "ranks.tsv");
    write_manifest(cmd, staged.path());
    staged.commit();
    std::cout << "mrr " << report.mrr << "  auc-roc " << report.auc_roc << "  auc-pr "
              << report.auc_pr << "\n";
    return 0;
}

// --- predict subcommand ---------------------------------------------------------------

struct PredictOpts {
    CommonOpts common;
    std::string model_path;
    std::string subject;
    std::string object;
    std::string relation;
    int top = 10;
    bool raw = false;
    bool no_type_filter = false;
};

int run_predict(PredictOpts& o, CLI::App* cmd) {
    const KnowledgeGraph kg = load_kg(o.common.kg_path);
    if (o.subject.empty() == o.object.empty()) {
        throw DataError("give exactly one of --subject (s, r, ?) or --object (?, r, o)");
    }
    const TypeConstraints constraints =
        o.no_type_filter ? open_type_constraints(kg) : infer_type_constraints(kg);
    const LoadedModel model = load_any_model(kg, o.model_path);

    const auto rel = kg.relations().lookup(o.relation);
    if (!rel) throw DataError("unknown relation: " + o.relation);
    const bool complete_object = !o.subject.empty();
    const auto anchor = kg.entities().lookup(complete_object ? o.subject : o.object);
    if (!anchor) throw DataError("unknown entity");

    const auto& pool = complete_object ? constraints.objects[static_cast<std::size_t>(*rel)]
                                       : constraints.subjects[static_cast<std::size_t>(*rel)];
    std::vector<std::pair<double, EntityId>> scored;
    for (const EntityId e : pool) {
        const Triple t = complete_object ? Triple{*anchor, *rel, e} : Triple{e, *rel, *anchor};
        if (!o.raw && kg.contains(t)) continue;  // filtered: skip known positives
        scored.emplace_back(model.scorer(t), e);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    if (scored.size() > static_cast<std::size_t>(o.top)) {
        scored.resize(static_cast<std::size_t>(o.top));
    }

    std::ostringstream body;
    for (const auto& [s, e] : scored) {
        body << kg.entities().name(e) << '\t' << s << '\n';
    }
    std::cout << body.str();
    if (!o.common.out.empty()) {
        StagedDir staged(o.common.out, o.common.force);
        std::ofstream(staged.path() / "predictions.tsv") << body.str();
        write_manifest(cmd, staged.path());
        staged.commit();
    }
    return 0;
}

// --- rules subcommand -------------------------------------------------------------------

struct RulesOpts {
    CommonOpts common;
    std::string model_path;
};

int run_rules(RulesOpts& o, CLI::App* cmd) {
    const KnowledgeGraph kg = load_kg(o.common.kg_path);
    const LoadedModel model = load_any_model(kg, o.model_path);

    std::vector<PraModel> models = model.pra_models;
    if (model.are.has_value()) {
        for (const auto& m : model.are->pra) {
            if (m.has_value()) models.push_back(*m);
        }
    }
    if (models.empty()) throw DataError("model carries no path-feature component");

    std::vector<PraRule> all;
    for (const auto& m : models) {
        const auto rules = pra_rules(m, kg);
        all.insert(all.end(), rules.begin(), rules.end());
    }
    std::stable_sort(all.begin(), all.end(),
                     [](const PraRule& a, const PraRule& b) { return a.weight > b.weight; });
    for (const PraRule& r : all) {
        std::cout << r.weight << '\t' << r.text << '\n';
    }
    if (!o.common.out.empty()) {
        StagedDir staged(o.common.out, o.common.force);
        write_rules(all, staged.path() / "rules.txt");
        write_manifest(cmd, staged.path());
        staged.commit();
    }
    return 0;
}

// --- export subcommand ---------------------------------------------------------------------

struct ExportOpts {
    CommonOpts common;
    std::string model_path;
};

void export_matrix_tsv(const Eigen::MatrixXd& m, const std::vector<std::string>& names,
                       const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out.precision(17);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        out << names[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << '\t' << m(r, c);
        out << '\n';
    }
}

int run_export(ExportOpts& o, CLI::App* cmd) {
    const KnowledgeGraph kg = load_kg(o.common.kg_path);
    const LoadedModel loaded = load_any_model(kg, o.model_path);
    if (!loaded.latent.has_value()) throw DataError("embedding export needs a latent model");
    const LatentModel& model = *loaded.latent;

    const Eigen::MatrixXd entities =
        std::visit([](const auto& p) { return p.entities; }, model.params);

    // per-relation parameters flattened row-wise, one row per relation
    const int n_r = model.num_relations();
    LatentModel probe = model;
    const Eigen::VectorXd theta = flatten_parameters(model);
    const Eigen::Index entity_size = entities.size();
    const Eigen::Index per_relation = (theta.size() - entity_size) / n_r;
    Eigen::MatrixXd relations(n_r, per_relation);
    if (model.config.kind == ModelKind::er_mlp) {
        // global blocks do not split evenly; export the embedding rows instead
        relations = std::get<ErmlpParams>(model.params).relations;
    } else {
        for (int k = 0; k < n_r; ++k) {
            relations.row(k) =
                theta.segment(entity_size + k * per_relation, per_relation).transpose();
        }
    }

    StagedDir staged(o.common.out, o.common.force);
    export_matrix_tsv(entities, kg.entities().names(), staged.path() / "entities.tsv");
    export_matrix_tsv(relations, kg.relations().names(), staged.path() / "relations.tsv");
    write_manifest(cmd, staged.path());
    staged.commit();
    std::cout << "exported " << entities.rows() << " entity rows, " << relations.rows()
              << " relation rows\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"knowledge-graph link prediction workbench"};
    app.option_defaults()->always_capture_default(true);  // manifests echo every value
    app.set_version_flag("--version", kVersion);
    app.set_config("--config", "", "Replay manifest or flat key=value config; flags win");
    app.require_subcommand(1);

    // import
    std::string import_input, import_output;
    CLI::App* import_cmd = app.add_subcommand("import", "TSV or N-Triples file to binary graph");
    import_cmd->fallthrough();
    import_cmd->add_option("--input", import_input, "Triple file (TSV or N-Triples subset)")
        ->required();
    import_cmd->add_option("--output", import_output, "Binary graph file to write")->required();

    // split
    std::string split_kg, split_out, split_ratios = "0.8,0.1,0.1";
    std::uint64_t split_seed = 0;
    bool split_force = false;
    CLI::App* split_cmd = app.add_subcommand("split", "Seeded train/valid/test partition");
    split_cmd->fallthrough();
    split_cmd->add_option("--kg", split_kg, "Binary knowledge-graph file")->required();
    split_cmd->add_option("--out", split_out, "Output directory")->required();
    split_cmd->add_option("--ratios", split_ratios, "train,valid,test ratios summing to 1");
    split_cmd->add_option("--seed", split_seed, "Split seed");
    split_cmd->add_flag("--force", split_force, "Replace an existing output directory");

    // train
    TrainOpts train_opts;
    CLI::App* train_cmd = app.add_subcommand("train", "Fit a model");
    train_cmd->fallthrough();
    add_common(train_cmd, train_opts.common);
    train_cmd->add_option("--model", train_opts.model,
                          "rescal-als|rescal|e-mlp|er-mlp|ntn|se|transe|pra|are|stacked");
    train_cmd->add_option("--train", train_opts.train_path, "Training triples (default: whole graph)");
    train_cmd->add_option("--rank", train_opts.rank, "Entity embedding size");
    train_cmd->add_option("--h-relation", train_opts.h_relation, "Relation embedding size");
    train_cmd->add_option("--h-additive", train_opts.h_additive, "Additive hidden layer size");
    train_cmd->add_option("--h-bilinear", train_opts.h_bilinear, "Bilinear slice count");
    train_cmd->add_option("--h-combined", train_opts.h_combined, "Combined hidden layer size");
    train_cmd->add_option("--nonlinearity", train_opts.nonlinearity, "tanh|identity");
    train_cmd->add_option("--distance", train_opts.distance, "squared-euclidean|l1");
    train_cmd->add_option("--loss", train_opts.loss, "log|squared|margin-ranking");
    train_cmd->add_option("--regime", train_opts.regime, "perturbation|lcwa|cwa");
    train_cmd->add_option("--lr", train_opts.learning_rate, "SGD learning rate");
    train_cmd->add_option("--epochs", train_opts.epochs, "SGD epochs");
    train_cmd->add_option("--lambda", train_opts.lambda, "L2 strength");
    train_cmd->add_option("--margin", train_opts.margin, "Ranking margin");
    train_cmd->add_option("--lambda-e", train_opts.lambda_e, "ALS entity ridge");
    train_cmd->add_option("--lambda-w", train_opts.lambda_w, "ALS relation ridge");
    train_cmd->add_option("--iters", train_opts.iters, "ALS iterations");
    train_cmd->add_option("--l1", train_opts.l1, "Path-weight L1 strength");
    train_cmd->add_option("--tol", train_opts.tol, "Convergence tolerance");
    train_cmd->add_option("--path-length", train_opts.path_length, "Maximum path length");
    train_cmd->add_option("--budget", train_opts.budget, "Path-type budget");
    train_cmd->add_option("--rounds", train_opts.rounds, "Alternation rounds");
    train_cmd->add_option("--base", train_opts.base_files, "Base model files for stacking")
        ->delimiter(',');
    train_cmd->add_option("--valid", train_opts.valid_path, "Held-out triples for stacking");

    // evaluate
    EvalOpts eval_opts;
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "Filtered entity-ranking report");
    eval_cmd->fallthrough();
    add_common(eval_cmd, eval_opts.common);
    eval_cmd->add_option("--model", eval_opts.model_path, "Model file or directory")->required();
    eval_cmd->add_option("--test", eval_opts.test_path, "Test triples")->required();
    eval_cmd->add_flag("--raw", eval_opts.raw, "Disable filtered ranking");
    eval_cmd->add_flag("--no-type-filter", eval_opts.no_type_filter,
                       "Rank over all entities instead of observed types");

    // predict
    PredictOpts predict_opts;
    CLI::App* predict_cmd = app.add_subcommand("predict", "Top-n completions for a partial triple");
    predict_cmd->fallthrough();
    predict_cmd->add_option("--kg", predict_opts.common.kg_path, "Binary knowledge-graph file")
        ->required();
    predict_cmd->add_option("--out", predict_opts.common.out, "Optional output directory");
    predict_cmd->add_option("--seed", predict_opts.common.seed, "Unused; accepted for replay");
    predict_cmd->add_flag("--force", predict_opts.common.force, "Replace an existing output dir");
    predict_cmd->add_option("--model", predict_opts.model_path, "Model file or directory")
        ->required();
    predict_cmd->add_option("--subject", predict_opts.subject, "Subject for (s, r, ?)");
    predict_cmd->add_option("--object", predict_opts.object, "Object for (?, r, o)");
    predict_cmd->add_option("--relation", predict_opts.relation, "Relation name")->required();
    predict_cmd->add_option("--top", predict_opts.top, "Completions to return");
    predict_cmd->add_flag("--raw", predict_opts.raw, "Keep known positives in the candidates");
    predict_cmd->add_flag("--no-type-filter", predict_opts.no_type_filter,
                          "Candidates from all entities");

    // rules
    RulesOpts rules_opts;
    CLI::App* rules_cmd = app.add_subcommand("rules", "Dump weighted Horn clauses of a path model");
    rules_cmd->fallthrough();
    rules_cmd->add_option("--kg", rules_opts.common.kg_path, "Binary knowledge-graph file")
        ->required();
    rules_cmd->add_option("--model", rules_opts.model_path, "Path-feature or combination model")
        ->required();
    rules_cmd->add_option("--out", rules_opts.common.out, "Optional output directory");
    rules_cmd->add_flag("--force", rules_opts.common.force, "Replace an existing output dir");

    // export-embeddings
    ExportOpts export_opts;
    CLI::App* export_cmd = app.add_subcommand("export-embeddings", "Entity/relation matrices as TSV");
    export_cmd->fallthrough();
    add_common(export_cmd, export_opts.common);
    export_cmd->add_option("--model", export_opts.model_path, "Latent model file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (import_cmd->parsed()) {
            const auto lines = read_triple_file(import_input);
            const KnowledgeGraph kg = KnowledgeGraph::ingest(lines);
            save_kg(kg, import_output);
            std::cout << "imported " << kg.positives().size() << " triples, "
                      << kg.num_entities() << " entities, " << kg.num_relations()
                      << " relations\n";
            return 0;
        }
        if (split_cmd->parsed()) {
            const KnowledgeGraph kg = load_kg(split_kg);
            SplitRatios ratios;
            if (std::sscanf(split_ratios.c_str(), "%lf,%lf,%lf", &ratios.train, &ratios.valid,
                            &ratios.test) != 3) {
                throw DataError("ratios must be three comma-separated numbers");
            }
            const Split split = holdout_split(kg, ratios, split_seed);
            StagedDir staged(split_out, split_force);
            write_split(kg, split, ratios, split_seed, staged.path());
            write_manifest(split_cmd, staged.path());
            staged.commit();
            std::cout << "split " << split.train.size() << "/" << split.valid.size() << "/"
                      << split.test.size() << "\n";
            return 0;
        }
        if (train_cmd->parsed()) return run_train(train_opts, train_cmd);
        if (eval_cmd->parsed()) return run_evaluate(eval_opts, eval_cmd);
        if (predict_cmd->parsed()) return run_predict(predict_opts, predict_cmd);
        if (rules_cmd->parsed()) return run_rules(rules_opts, rules_cmd);
        if (export_cmd->parsed()) return run_export(export_opts, export_cmd);
    } catch (const NumericalError& e) {
        std::cerr << "kglp: numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "kglp: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}
