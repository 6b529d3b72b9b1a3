#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ncenter/model.hpp"

namespace ncenter::topology {

struct WindingVector {
    std::vector<int> entries;
    bool operator==(const WindingVector&) const = default;
};

/// Generator of the free group: a small loop around `center` (0-based),
/// counter-clockwise for sign +1.
struct Letter {
    std::size_t center;
    int sign;
    bool operator==(const Letter&) const = default;
};

/// Conjugacy class in the free group, stored as a cyclically reduced word.
/// Equality compares classes, i.e. words up to cyclic rotation.
class HomotopyWord {
public:
    HomotopyWord() = default;
    /// Reduces the raw letters (free then cyclic reduction).
    explicit HomotopyWord(const std::vector<Letter>& raw);

    const std::vector<Letter>& letters() const { return letters_; }
    std::size_t size() const { return letters_.size(); }
    bool empty() const { return letters_.empty(); }

    /// Signed letter counts per center.
    std::vector<int> abelianization(std::size_t n_centers) const;
    /// Lexicographically least rotation; a canonical class representative.
    std::vector<Letter> canonical() const;
    /// Token form, e.g. "a1 A2"; centers printed 1-based.
    std::string str() const;

    friend bool operator==(const HomotopyWord& a, const HomotopyWord& b);
    friend HomotopyWord reduce_word(const std::vector<Letter>& raw);

private:
    std::vector<Letter> letters_;
};

HomotopyWord reduce_word(const std::vector<Letter>& raw);

/// Parses whitespace-separated tokens "a3" / "A3" (center 3, positive / inverse).
/// Throws std::invalid_argument on bad tokens or indices outside 1..n_centers.
std::vector<Letter> parse_letters(std::string_view text, std::size_t n_centers);
HomotopyWord parse_word(std::string_view text, std::size_t n_centers);

WindingVector winding_vector(const PeriodicLoop& loop, const CenterSystem& sys);
/// Winding of a closed polygon about a point (nodes closed cyclically).
int polygon_winding(const std::vector<Vec2>& polygon, Vec2 p);

HomotopyWord homotopy_word(const PeriodicLoop& loop, const CenterSystem& sys);
/// Word of an arbitrary closed polygon (need not be a valid PeriodicLoop).
HomotopyWord polygon_word(const std::vector<Vec2>& polygon, const CenterSystem& sys);

/// Direction shared by all word-reading rays for this center layout.
/// Straight down unless two centers are nearly aligned along it.
Vec2 ray_direction(const CenterSystem& sys);

struct Crossing {
    std::size_t seg_a;   // seg_a < seg_b
    std::size_t seg_b;
    Vec2 point;
    double param_a;      // position along seg_a in (0, 1)
    double param_b;
};

struct IntersectionReport {
    std::vector<Crossing> crossings;
    std::size_t count() const { return crossings.size(); }
};

/// Transverse crossings between non-adjacent segments. Throws
/// NonGenericError for tangencies, overlaps and near-vertex crossings.
IntersectionReport self_intersections(const PeriodicLoop& loop);
IntersectionReport polygon_self_intersections(const std::vector<Vec2>& polygon);

struct SubLoop {
    // The sub-loop runs from the crossing point on `first_segment` through
    // nodes first_segment+1 .. last_segment (cyclic) back to the crossing on
    // `last_segment`.
    std::size_t first_segment = 0;
    std::size_t last_segment = 0;
    Vec2 crossing_point;
    std::vector<Vec2> polygon;
    bool is_innermost = false;
    std::vector<std::size_t> enclosed_centers;  // 0-based
};

/// Jordan sub-loops obtained by splitting at single crossings; a simple loop
/// yields itself.
std::vector<SubLoop> innermost_subloops(const PeriodicLoop& loop, const CenterSystem& sys);

struct TautOptions {
    std::size_t max_surgeries = 10000;
    /// Allowed relative action increase over the input; exceeded => TopologyError.
    double action_budget = std::numeric_limits<double>::infinity();
};

PeriodicLoop remove_monogon(const PeriodicLoop& loop, const CenterSystem& sys);
PeriodicLoop remove_bigon(const PeriodicLoop& loop, const CenterSystem& sys);
PeriodicLoop make_taut(const PeriodicLoop& loop, const CenterSystem& sys, const TautOptions& opts = {});

/// Polygon following the ray corridors: for every letter the loop drops
/// from a lane above all centers, turns half way around the center so that
/// it crosses that center's ray once with the letter's sign, and climbs to
/// the next lane. Resampled to n nodes at equal arclength.
PeriodicLoop corridor_loop(const HomotopyWord& w, const CenterSystem& sys, double T, std::size_t n);

struct Admissibility {
    bool admissible = false;
    std::optional<SubLoop> witness;
    PeriodicLoop representative;
    std::optional<bool> cross_check_agrees;
};

/// Checks the innermost sub-loops of a taut representative built from the
/// corridor polygon. With `cross_check` a second representative is built
/// from a rotated spelling of the word and the verdicts are compared.
Admissibility is_admissible(const HomotopyWord& w, const CenterSystem& sys, bool cross_check = false);

}  // namespace ncenter::topology
