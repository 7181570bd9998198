#include "kglp/sampling.hpp"

#include <algorithm>
#include <fstream>

#include "kglp/rng.hpp"

namespace kglp {

std::string provenance_name(Provenance p) {
    switch (p) {
        case Provenance::observed: return "observed";
        case Provenance::cwa: return "cwa";
        case Provenance::perturbed_subject: return "perturbed-subject";
        case Provenance::perturbed_object: return "perturbed-object";
        case Provenance::lcwa: return "lcwa";
    }
    return "unknown";
}

LabeledTripleSet LabeledTripleSet::build(const KnowledgeGraph& kg, std::span<const Triple> positives,
                                         std::span<const LabeledTriple> negatives) {
    LabeledTripleSet set;
    set.items.reserve(positives.size() + negatives.size());
    for (const Triple& t : positives) {
        set.items.push_back({t, 1, Provenance::observed});
    }
    for (const LabeledTriple& n : negatives) {
        if (n.label != 0 || n.provenance == Provenance::observed) {
            throw DataError("negative with positive label or observed provenance");
        }
        if (kg.contains(n.triple)) {
            throw DataError("negative triple collides with the positive set");
        }
        set.items.push_back(n);
    }
    return set;
}

std::size_t LabeledTripleSet::num_positives() const {
    return static_cast<std::size_t>(
        std::count_if(items.begin(), items.end(), [](const auto& x) { return x.label == 1; }));
}

std::size_t LabeledTripleSet::num_negatives() const { return items.size() - num_positives(); }

namespace {

constexpr int kMaxRejectionTries = 64;

// Seeded corruption of one slot. Rejection-samples from the admissible pool
// and falls back to exhaustive enumeration when the pool is nearly covered by
// positives, so small graphs still terminate deterministically.
void corrupt_slot(const KnowledgeGraph& kg, const Triple& t, bool corrupt_subject, int count,
                  const std::vector<EntityId>& pool, Rng& rng, std::vector<LabeledTriple>& out) {
    if (pool.empty() || count <= 0) return;
    const EntityId original = corrupt_subject ? t.subject : t.object;
    auto make = [&](EntityId e) {
        Triple c = t;
        (corrupt_subject ? c.subject : c.object) = e;
        return c;
    };
    const Provenance prov =
        corrupt_subject ? Provenance::perturbed_subject : Provenance::perturbed_object;

    std::vector<EntityId> chosen;
    int produced = 0;
    for (int i = 0; i < count; ++i) {
        bool found = false;
        for (int tries = 0; tries < kMaxRejectionTries; ++tries) {
            const EntityId e = pool[rng.uniform_index(pool.size())];
            if (e == original || kg.contains(make(e))) continue;
            if (std::find(chosen.begin(), chosen.end(), e) != chosen.end()) continue;
            chosen.push_back(e);
            out.push_back({make(e), 0, prov});
            ++produced;
            found = true;
            break;
        }
        if (!found) break;
    }
    if (produced == count) return;

    // Exhaustive fallback: collect every admissible corruption not yet chosen,
    // then take a seeded draw of the remainder.
    std::vector<EntityId> remaining;
    for (const EntityId e : pool) {
        if (e == original || kg.contains(make(e))) continue;
        if (std::find(chosen.begin(), chosen.end(), e) != chosen.end()) continue;
        remaining.push_back(e);
    }
    rng.shuffle(remaining);
    for (const EntityId e : remaining) {
        if (produced == count) break;
        out.push_back({make(e), 0, prov});
        ++produced;
    }
}

}  // namespace

std::vector<LabeledTriple> perturb_negatives(const KnowledgeGraph& kg, const Triple& t,
                                             int per_side, const TypeConstraints& constraints,
                                             std::uint64_t seed) {
    if (!kg.contains(t)) throw DataError("perturb_negatives requires a positive source triple");
    std::vector<LabeledTriple> out;
    const std::uint64_t stream = derive_seed(
        seed, "perturb",
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.subject)) << 40) ^
            (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.relation)) << 20) ^
            static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.object)));
    Rng rng(stream);
    corrupt_slot(kg, t, true, per_side, constraints.subjects.at(static_cast<std::size_t>(t.relation)),
                 rng, out);
    corrupt_slot(kg, t, false, per_side, constraints.objects.at(static_cast<std::size_t>(t.relation)),
                 rng, out);
    return out;
}

std::vector<Triple> lcwa_negatives(const KnowledgeGraph& kg, EntityId i, RelationId k,
                                   const TypeConstraints& constraints) {
    kg.check_entity(i);
    kg.check_relation(k);
    // Abstain unless some (i, k, .) triple is observed.
    if (kg.out_neighbors(i, k, Direction::forward).empty()) return {};
    std::vector<Triple> out;
    for (const EntityId j : constraints.objects.at(static_cast<std::size_t>(k))) {
        const Triple c{i, k, j};
        if (!kg.contains(c)) out.push_back(c);
    }
    return out;
}

std::vector<Triple> cwa_negatives(const KnowledgeGraph& kg, const TypeConstraints& constraints,
                                  std::size_t cap, std::uint64_t seed) {
    std::vector<Triple> out;
    if (cap == 0) return out;

    const auto n_r = static_cast<std::size_t>(kg.num_relations());
    std::vector<std::uint64_t> complement_sizes(n_r, 0);
    std::uint64_t total = 0;
    for (std::size_t k = 0; k < n_r; ++k) {
        const auto cells = static_cast<std::uint64_t>(constraints.subjects[k].size()) *
                           static_cast<std::uint64_t>(constraints.objects[k].size());
        const auto nnz = static_cast<std::uint64_t>(kg.slice(static_cast<RelationId>(k)).nonZeros());
        complement_sizes[k] = cells > nnz ? cells - nnz : 0;
        total += complement_sizes[k];
    }
    if (total == 0) return out;

    Rng rng(derive_seed(seed, "cwa"));

    // Small complements are enumerated and shuffled; otherwise rejection-sample
    // cells proportionally to each relation's complement size.
    if (total <= 4 * static_cast<std::uint64_t>(cap) || total <= 1024) {
        for (std::size_t k = 0; k < n_r; ++k) {
            for (const EntityId s : constraints.subjects[k]) {
                for (const EntityId o : constraints.objects[k]) {
                    const Triple t{s, static_cast<RelationId>(k), o};
                    if (!kg.contains(t)) out.push_back(t);
                }
            }
        }
        rng.shuffle(out);
        if (out.size() > cap) out.resize(cap);
        return out;
    }

    std::unordered_set<Triple, TripleHash> seen;
    const std::size_t want = std::min<std::size_t>(cap, static_cast<std::size_t>(total));
    while (out.size() < want) {
        std::uint64_t pick = rng.uniform_index(total);
        std::size_t k = 0;
        while (pick >= complement_sizes[k]) {
            pick -= complement_sizes[k];
            ++k;
        }
        const auto& subs = constraints.subjects[k];
        const auto& objs = constraints.objects[k];
        const Triple t{subs[rng.uniform_index(subs.size())], static_cast<RelationId>(k),
                       objs[rng.uniform_index(objs.size())]};
        if (kg.contains(t) || !seen.insert(t).second) continue;
        out.push_back(t);
    }
    return out;
}

void write_labeled_tsv(const KnowledgeGraph& kg, std::span<const LabeledTriple> items,
                       const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write labeled triple file: " + path.string());
    for (const LabeledTriple& x : items) {
        out << kg.entities().name(x.triple.subject) << '\t' << kg.relations().name(x.triple.relation)
            << '\t' << kg.entities().name(x.triple.object) << '\t' << x.label << '\t'
            << provenance_name(x.provenance) << '\n';
    }
}

}  // namespace kglp
