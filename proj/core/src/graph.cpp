#include "kglp/graph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kglp/rng.hpp"

namespace kglp {

KnowledgeGraph KnowledgeGraph::ingest(std::span<const StringTriple> lines) {
    KnowledgeGraph kg;
    for (std::size_t n = 0; n < lines.size(); ++n) {
        const auto& [s, p, o] = lines[n];
        if (s.empty() || p.empty() || o.empty()) {
            throw ParseError("empty field in triple", n + 1);
        }
        Triple t;
        t.subject = kg.entities_.add_or_get(s);
        t.relation = kg.relations_.add_or_get(p);
        t.object = kg.entities_.add_or_get(o);
        if (kg.positive_set_.insert(t).second) {
            kg.positives_.push_back(t);
        }
    }
    kg.finalize();
    return kg;
}

KnowledgeGraph KnowledgeGraph::build(std::vector<std::string> entity_names,
                                     std::vector<std::string> relation_names,
                                     std::span<const Triple> triples) {
    KnowledgeGraph kg;
    kg.entities_ = Dictionary(std::move(entity_names));
    kg.relations_ = Dictionary(std::move(relation_names));
    for (const Triple& t : triples) {
        kg.check_entity(t.subject);
        kg.check_entity(t.object);
        kg.check_relation(t.relation);
        if (kg.positive_set_.insert(t).second) {
            kg.positives_.push_back(t);
        }
    }
    kg.finalize();
    return kg;
}

void KnowledgeGraph::finalize() {
    const auto n_e = entities_.size();
    const auto n_r = relations_.size();
    forward_.assign(n_r, std::vector<std::vector<EntityId>>(n_e));
    inverse_.assign(n_r, std::vector<std::vector<EntityId>>(n_e));
    std::vector<std::vector<Eigen::Triplet<double>>> entries(n_r);
    for (const Triple& t : positives_) {
        entries[t.relation].emplace_back(t.subject, t.object, 1.0);
        forward_[t.relation][t.subject].push_back(t.object);
        inverse_[t.relation][t.object].push_back(t.subject);
    }
    slices_.assign(n_r, SparseSlice(n_e, n_e));
    for (RelationId k = 0; k < n_r; ++k) {
        slices_[k].setFromTriplets(entries[k].begin(), entries[k].end());
        slices_[k].makeCompressed();
        for (auto& lst : forward_[k]) std::sort(lst.begin(), lst.end());
        for (auto& lst : inverse_[k]) std::sort(lst.begin(), lst.end());
    }
}

void KnowledgeGraph::check_entity(EntityId e) const {
    if (e < 0 || e >= num_entities()) throw DataError("entity id out of range");
}

void KnowledgeGraph::check_relation(RelationId k) const {
    if (k < 0 || k >= num_relations()) throw DataError("relation id out of range");
}

const SparseSlice& KnowledgeGraph::slice(RelationId k) const {
    check_relation(k);
    return slices_[static_cast<std::size_t>(k)];
}

const std::vector<EntityId>& KnowledgeGraph::out_neighbors(EntityId i, RelationId k, Direction d) const {
    check_entity(i);
    check_relation(k);
    const auto& table = (d == Direction::forward) ? forward_ : inverse_;
    return table[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
}

bool TypeConstraints::subject_admissible(RelationId k, EntityId e) const {
    const auto& v = subjects.at(static_cast<std::size_t>(k));
    return std::binary_search(v.begin(), v.end(), e);
}

bool TypeConstraints::object_admissible(RelationId k, EntityId e) const {
    const auto& v = objects.at(static_cast<std::size_t>(k));
    return std::binary_search(v.begin(), v.end(), e);
}

TypeConstraints infer_type_constraints(const KnowledgeGraph& kg) {
    TypeConstraints tc;
    const auto n_r = static_cast<std::size_t>(kg.num_relations());
    tc.subjects.assign(n_r, {});
    tc.objects.assign(n_r, {});
    for (const Triple& t : kg.positives()) {
        tc.subjects[t.relation].push_back(t.subject);
        tc.objects[t.relation].push_back(t.object);
    }
    for (std::size_t k = 0; k < n_r; ++k) {
        auto& s = tc.subjects[k];
        auto& o = tc.objects[k];
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
        std::sort(o.begin(), o.end());
        o.erase(std::unique(o.begin(), o.end()), o.end());
    }
    return tc;
}

TypeConstraints open_type_constraints(const KnowledgeGraph& kg) {
    TypeConstraints tc;
    std::vector<EntityId> all(static_cast<std::size_t>(kg.num_entities()));
    for (EntityId e = 0; e < kg.num_entities(); ++e) all[static_cast<std::size_t>(e)] = e;
    tc.subjects.assign(static_cast<std::size_t>(kg.num_relations()), all);
    tc.objects.assign(static_cast<std::size_t>(kg.num_relations()), all);
    return tc;
}

Split holdout_split(const KnowledgeGraph& kg, const SplitRatios& ratios, std::uint64_t seed) {
    const double sum = ratios.train + ratios.valid + ratios.test;
    if (ratios.train <= 0 || ratios.valid <= 0 || ratios.test <= 0 || std::abs(sum - 1.0) > 1e-9) {
        throw DataError("split ratios must be positive and sum to 1");
    }
    const std::size_t n = kg.positives().size();
    const auto n_valid = static_cast<std::size_t>(ratios.valid * static_cast<double>(n));
    const auto n_test = static_cast<std::size_t>(ratios.test * static_cast<double>(n));
    const std::size_t n_train = n - n_valid - n_test;
    if (n >= 3 && (n_train == 0 || n_valid == 0 || n_test == 0)) {
        throw DataError("split ratios leave a partition empty");
    }

    Rng rng(derive_seed(seed, "holdout-split"));
    const auto perm = rng.permutation(n);
    Split split;
    split.train.reserve(n_train);
    split.valid.reserve(n_valid);
    split.test.reserve(n_test);
    for (std::size_t idx = 0; idx < n; ++idx) {
        const Triple& t = kg.positives()[perm[idx]];
        if (idx < n_train) {
            split.train.push_back(t);
        } else if (idx < n_train + n_valid) {
            split.valid.push_back(t);
        } else {
            split.test.push_back(t);
        }
    }
    return split;
}

namespace {

bool looks_like_ntriples(const std::string& line) {
    return !line.empty() && line.front() == '<';
}

// `<s> <p> <o> .` with IRIs used verbatim as strings.
StringTriple parse_ntriple(const std::string& line, std::size_t line_no) {
    StringTriple out;
    std::size_t pos = 0;
    for (int field = 0; field < 3; ++field) {
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
        if (pos >= line.size() || line[pos] != '<') {
            throw ParseError("expected IRI", line_no);
        }
        const std::size_t close = line.find('>', pos);
        if (close == std::string::npos) throw ParseError("unterminated IRI", line_no);
        out[static_cast<std::size_t>(field)] = line.substr(pos + 1, close - pos - 1);
        pos = close + 1;
    }
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    if (pos >= line.size() || line[pos] != '.') {
        throw ParseError("expected terminating '.'", line_no);
    }
    return out;
}

StringTriple parse_tsv_triple(const std::string& line, std::size_t line_no) {
    StringTriple out;
    std::size_t start = 0;
    int field = 0;
    for (; field < 3; ++field) {
        const std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            if (field != 2) throw ParseError("expected 3 tab-separated fields", line_no);
            out[2] = line.substr(start);
            break;
        }
        if (field == 2) throw ParseError("expected 3 tab-separated fields", line_no);
        out[static_cast<std::size_t>(field)] = line.substr(start, tab - start);
        start = tab + 1;
    }
    return out;
}

}  // namespace

std::vector<StringTriple> parse_triple_lines(std::span<const std::string> lines) {
    std::vector<StringTriple> out;
    for (std::size_t n = 0; n < lines.size(); ++n) {
        std::string line = lines[n];
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const std::size_t line_no = n + 1;
        StringTriple t = looks_like_ntriples(line) ? parse_ntriple(line, line_no)
                                                   : parse_tsv_triple(line, line_no);
        if (t[0].empty() || t[1].empty() || t[2].empty()) {
            throw ParseError("empty field in triple", line_no);
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<StringTriple> read_triple_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open triple file: " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return parse_triple_lines(lines);
}

void write_triples_tsv(const KnowledgeGraph& kg, std::span<const Triple> triples,
                       const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write triple file: " + path.string());
    for (const Triple& t : triples) {
        out << kg.entities().name(t.subject) << '\t' << kg.relations().name(t.relation) << '\t'
            << kg.entities().name(t.object) << '\n';
    }
}

void write_split(const KnowledgeGraph& kg, const Split& split, const SplitRatios& ratios,
                 std::uint64_t seed, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_triples_tsv(kg, split.train, dir / "train.tsv");
    write_triples_tsv(kg, split.valid, dir / "valid.tsv");
    write_triples_tsv(kg, split.test, dir / "test.tsv");
    nlohmann::json j;
    j["format"] = "kglp-split";
    j["version"] = 1;
    j["seed"] = seed;
    j["ratios"] = {ratios.train, ratios.valid, ratios.test};
    j["counts"] = {split.train.size(), split.valid.size(), split.test.size()};
    std::ofstream out(dir / "split.json");
    if (!out) throw DataError("cannot write split sidecar");
    out << j.dump(2) << '\n';
}

namespace {

constexpr char kKgMagic[8] = {'K', 'G', 'L', 'P', 'K', 'G', '0', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw ParseError("truncated knowledge-graph file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const std::uint32_t n = read_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw ParseError("truncated knowledge-graph file");
    return s;
}

}  // namespace

void save_kg(const KnowledgeGraph& kg, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write knowledge-graph file: " + path.string());
    out.write(kKgMagic, sizeof(kKgMagic));
    write_u32(out, static_cast<std::uint32_t>(kg.num_entities()));
    write_u32(out, static_cast<std::uint32_t>(kg.num_relations()));
    write_u32(out, static_cast<std::uint32_t>(kg.positives().size()));
    for (const auto& name : kg.entities().names()) write_string(out, name);
    for (const auto& name : kg.relations().names()) write_string(out, name);
    for (const Triple& t : kg.positives()) {
        write_u32(out, static_cast<std::uint32_t>(t.subject));
        write_u32(out, static_cast<std::uint32_t>(t.relation));
        write_u32(out, static_cast<std::uint32_t>(t.object));
    }
}

KnowledgeGraph load_kg(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open knowledge-graph file: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || !std::equal(magic, magic + 8, kKgMagic)) {
        throw ParseError("not a kglp knowledge-graph file: " + path.string());
    }
    const std::uint32_t n_e = read_u32(in);
    const std::uint32_t n_r = read_u32(in);
    const std::uint32_t n_t = read_u32(in);
    std::vector<std::string> entity_names(n_e), relation_names(n_r);
    for (auto& s : entity_names) s = read_string(in);
    for (auto& s : relation_names) s = read_string(in);
    std::vector<Triple> triples;
    triples.reserve(n_t);
    for (std::uint32_t i = 0; i < n_t; ++i) {
        const std::uint32_t s = read_u32(in);
        const std::uint32_t r = read_u32(in);
        const std::uint32_t o = read_u32(in);
        if (s >= n_e || o >= n_e || r >= n_r) throw ParseError("triple id out of range");
        triples.push_back({static_cast<EntityId>(s), static_cast<RelationId>(r),
                           static_cast<EntityId>(o)});
    }
    return KnowledgeGraph::build(std::move(entity_names), std::move(relation_names), triples);
}

std::vector<Triple> resolve_triples(const KnowledgeGraph& kg, std::span<const StringTriple> lines) {
    std::vector<Triple> out;
    out.reserve(lines.size());
    for (const auto& [s, p, o] : lines) {
        const auto si = kg.entities().lookup(s);
        const auto pi = kg.relations().lookup(p);
        const auto oi = kg.entities().lookup(o);
        if (!si || !pi || !oi) {
            throw DataError("triple references names missing from the graph: " + s + " " + p + " " + o);
        }
        out.push_back({*si, *pi, *oi});
    }
    return out;
}

}  // namespace kglp
