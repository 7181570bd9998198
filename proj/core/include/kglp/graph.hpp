#pragma once

#include <Eigen/SparseCore>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kglp/types.hpp"

namespace kglp {

/// Bijective string <-> dense-id mapping; ids assigned in first-appearance order.
class Dictionary {
public:
    Dictionary() = default;
    explicit Dictionary(std::vector<std::string> names) : names_(std::move(names)) {
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (!index_.try_emplace(names_[i], static_cast<std::int32_t>(i)).second) {
                throw DataError("duplicate dictionary name: " + names_[i]);
            }
        }
    }

    std::int32_t add_or_get(const std::string& name) {
        auto [it, inserted] = index_.try_emplace(name, static_cast<std::int32_t>(names_.size()));
        if (inserted) names_.push_back(name);
        return it->second;
    }

    std::optional<std::int32_t> lookup(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    const std::string& name(std::int32_t id) const { return names_.at(static_cast<std::size_t>(id)); }
    std::int32_t size() const { return static_cast<std::int32_t>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::int32_t> index_;
};

using StringTriple = std::array<std::string, 3>;
using SparseSlice = Eigen::SparseMatrix<double>;

/// Immutable in-memory knowledge graph: dictionaries, deduplicated positive
/// triples, and one sparse boolean adjacency slice per relation.
class KnowledgeGraph {
public:
    static KnowledgeGraph ingest(std::span<const StringTriple> lines);

    /// Builds a graph over fixed dictionaries (entities may go unreferenced).
    /// Triples are deduplicated in order; ids must be in range.
    static KnowledgeGraph build(std::vector<std::string> entity_names,
                                std::vector<std::string> relation_names,
                                std::span<const Triple> triples);

    EntityId num_entities() const { return entities_.size(); }
    RelationId num_relations() const { return relations_.size(); }

    const Dictionary& entities() const { return entities_; }
    const Dictionary& relations() const { return relations_; }

    const std::vector<Triple>& positives() const { return positives_; }
    bool contains(const Triple& t) const { return positive_set_.contains(t); }

    /// Adjacency slice for relation k: boolean N_e x N_e, nonzeros are exactly
    /// the relation-k positives.
    const SparseSlice& slice(RelationId k) const;

    /// forward: {j : (i, k, j)}  inverse: {j : (j, k, i)}. Sorted ascending.
    const std::vector<EntityId>& out_neighbors(EntityId i, RelationId k, Direction d) const;

    void check_entity(EntityId e) const;
    void check_relation(RelationId k) const;

private:
    Dictionary entities_;
    Dictionary relations_;
    std::vector<Triple> positives_;
    std::unordered_set<Triple, TripleHash> positive_set_;
    std::vector<SparseSlice> slices_;
    // adjacency_[k][e]: sorted neighbor lists, one pair of tables per relation
    std::vector<std::vector<std::vector<EntityId>>> forward_;
    std::vector<std::vector<std::vector<EntityId>>> inverse_;
    std::vector<EntityId> empty_;

    void finalize();
};

/// Observed-type constraints: per relation, the entities seen as subjects and
/// as objects of that relation. Sorted ascending.
struct TypeConstraints {
    std::vector<std::vector<EntityId>> subjects;
    std::vector<std::vector<EntityId>> objects;

    bool subject_admissible(RelationId k, EntityId e) const;
    bool object_admissible(RelationId k, EntityId e) const;
};

TypeConstraints infer_type_constraints(const KnowledgeGraph& kg);

/// Unconstrained admissibility: every entity allowed in both slots of every
/// relation. Used when type filtering is switched off.
TypeConstraints open_type_constraints(const KnowledgeGraph& kg);

struct SplitRatios {
    double train = 0.8;
    double valid = 0.1;
    double test = 0.1;
};

struct Split {
    std::vector<Triple> train;
    std::vector<Triple> valid;
    std::vector<Triple> test;
};

/// Seeded disjoint partition of the positive set. Valid/test sizes are the
/// floors of their ratios, the remainder goes to train. Throws DataError when
/// the ratios are invalid or a partition would be empty with >= 3 positives.
Split holdout_split(const KnowledgeGraph& kg, const SplitRatios& ratios, std::uint64_t seed);

// --- file formats ------------------------------------------------------------

/// Reads a triple file: UTF-8, one triple per line. Tab-separated
/// `subject<TAB>predicate<TAB>object`, or the N-Triples subset
/// `<s> <p> <o> .` with the IRI text used verbatim as the string.
/// `#`-prefixed lines and blank lines are ignored.
std::vector<StringTriple> read_triple_file(const std::filesystem::path& path);

std::vector<StringTriple> parse_triple_lines(std::span<const std::string> lines);

void write_triples_tsv(const KnowledgeGraph& kg, std::span<const Triple> triples,
                       const std::filesystem::path& path);

/// Writes train/valid/test triple files plus a `split.json` sidecar recording
/// seed and ratios into `dir`.
void write_split(const KnowledgeGraph& kg, const Split& split, const SplitRatios& ratios,
                 std::uint64_t seed, const std::filesystem::path& dir);

/// Binary knowledge-graph container (versioned header + dictionaries + triples).
void save_kg(const KnowledgeGraph& kg, const std::filesystem::path& path);
KnowledgeGraph load_kg(const std::filesystem::path& path);

/// Resolves string triples against an existing graph's dictionaries.
/// Throws DataError on names missing from the dictionaries.
std::vector<Triple> resolve_triples(const KnowledgeGraph& kg, std::span<const StringTriple> lines);

}  // namespace kglp
