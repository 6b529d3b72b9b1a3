#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ncenter {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Potential or force evaluated exactly at a center.
struct SingularityError : Error {
    std::size_t center;
    SingularityError(std::size_t c, const std::string& what) : Error(what), center(c) {}
};

/// A node or segment of a discrete curve hits a center.
struct CollisionError : Error {
    std::size_t index;   // node or segment index in the offending curve
    std::size_t center;
    CollisionError(std::size_t i, std::size_t c, const std::string& what)
        : Error(what), index(i), center(c) {}
};

/// Loop is not in general position (tangential or near-vertex crossings).
struct NonGenericError : Error {
    std::vector<std::pair<std::size_t, std::size_t>> segment_pairs;
    NonGenericError(std::vector<std::pair<std::size_t, std::size_t>> pairs, const std::string& what)
        : Error(what), segment_pairs(std::move(pairs)) {}
};

struct TopologyError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

}  // namespace ncenter
