#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace kglp {

// Dense, contiguous ids assigned in first-appearance order by the
// entity/relation dictionaries.
using EntityId = std::int32_t;
using RelationId = std::int32_t;

struct Triple {
    EntityId subject = 0;
    RelationId relation = 0;
    EntityId object = 0;

    auto operator<=>(const Triple&) const = default;
};

struct TripleHash {
    std::size_t operator()(const Triple& t) const noexcept {
        std::uint64_t h = static_cast<std::uint32_t>(t.subject);
        h = (h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.relation)) << 20)) * 0x9e3779b97f4a7c15ULL;
        h = (h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.object)) << 40)) * 0xbf58476d1ce4e5b9ULL;
        return static_cast<std::size_t>(h ^ (h >> 29));
    }
};

enum class Direction { forward, inverse };

/// Malformed input file contents (wrong field count, empty field, bad header).
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    explicit ParseError(const std::string& what) : std::runtime_error(what), line_(0) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Structurally valid input that violates a contract (bad ids, bad ratios,
/// dimension mismatch, degenerate labels).
class DataError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Optimization failure (divergence, non-finite loss).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace kglp
