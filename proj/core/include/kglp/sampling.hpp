#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kglp/graph.hpp"
#include "kglp/types.hpp"

namespace kglp {

enum class Provenance { observed, cwa, perturbed_subject, perturbed_object, lcwa };

std::string provenance_name(Provenance p);

struct LabeledTriple {
    Triple triple;
    int label = 0;  // 1 iff provenance == observed
    Provenance provenance = Provenance::observed;
};

/// D+ / D-. Construction rejects label/provenance mismatches and negatives
/// that collide with the positive set.
struct LabeledTripleSet {
    std::vector<LabeledTriple> items;

    static LabeledTripleSet build(const KnowledgeGraph& kg, std::span<const Triple> positives,
                                  std::span<const LabeledTriple> negatives);

    std::size_t num_positives() const;
    std::size_t num_negatives() const;
};

/// Corrupted copies of a true triple: up to `per_side` subject replacements and
/// `per_side` object replacements, type-admissible, absent from the positive
/// set, never equal to the source. Returns fewer items when no admissible
/// corruption exists. Deterministic given (seed, t).
std::vector<LabeledTriple> perturb_negatives(const KnowledgeGraph& kg, const Triple& t,
                                             int per_side, const TypeConstraints& constraints,
                                             std::uint64_t seed);

/// Local closed-world negatives for a (subject, relation) pair: all
/// type-admissible unobserved objects if any (i, k, .) triple is observed,
/// otherwise the empty sequence.
std::vector<Triple> lcwa_negatives(const KnowledgeGraph& kg, EntityId i, RelationId k,
                                   const TypeConstraints& constraints);

/// Closed-world negatives: a seeded uniform sample without replacement of at
/// most `cap` type-admissible triples absent from the positive set.
std::vector<Triple> cwa_negatives(const KnowledgeGraph& kg, const TypeConstraints& constraints,
                                  std::size_t cap, std::uint64_t seed);

/// TSV export with `label` and `provenance` as 4th/5th columns.
void write_labeled_tsv(const KnowledgeGraph& kg, std::span<const LabeledTriple> items,
                       const std::filesystem::path& path);

}  // namespace kglp
