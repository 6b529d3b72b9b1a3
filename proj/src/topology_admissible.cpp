#include <algorithm>
#include <cmath>
#include <numbers>

#include "ncenter/topology.hpp"

namespace ncenter::topology {

namespace {

std::vector<Vec2> resample(const std::vector<Vec2>& path, std::size_t n) {
    // `path` is closed implicitly (last point joins the first).
    const std::size_t m = path.size();
    std::vector<double> cum(m + 1, 0.0);
    for (std::size_t i = 0; i < m; ++i) cum[i + 1] = cum[i] + std::abs(path[(i + 1) % m] - path[i]);
    const double L = cum[m];
    std::vector<Vec2> out(n);
    std::size_t seg = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double s = L * static_cast<double>(k) / static_cast<double>(n);
        while (seg + 1 < m && cum[seg + 1] <= s) ++seg;
        const double len = cum[seg + 1] - cum[seg];
        const double u = len > 0.0 ? (s - cum[seg]) / len : 0.0;
        out[k] = path[seg] + u * (path[(seg + 1) % m] - path[seg]);
    }
    return out;
}

struct Corridor {
    std::vector<Vec2> path;  // dense closed path in world coordinates
    double spacing;          // node spacing that resolves the smallest turn
};

Corridor corridor_path(const HomotopyWord& w, const CenterSystem& sys) {
    if (w.empty()) throw TopologyError("trivial class has no corridor representative");
    const std::size_t N = sys.size();
    const auto& letters = w.letters();
    const std::size_t m = letters.size();
    constexpr int arc_points = 32;

    if (m == 1) {
        const Letter l = letters[0];
        const double rho = N >= 2 ? 0.3 * sys.min_spacing() : 1.0;
        Corridor c;
        for (int k = 0; k < 4 * arc_points; ++k) {
            const double th = 0.5 * std::numbers::pi + l.sign * 2.0 * std::numbers::pi * k / (4.0 * arc_points);
            c.path.push_back(sys.position(l.center) + std::polar(rho, th));
        }
        c.spacing = rho / 8.0;
        return c;
    }

    // Local frame in which every ray points straight down.
    const Vec2 rot = Vec2(0.0, -1.0) / ray_direction(sys);
    Vec2 origin = 0.0;
    for (const Vec2& p : sys.positions()) origin += p;
    origin /= static_cast<double>(N);
    std::vector<Vec2> cu(N);
    for (std::size_t j = 0; j < N; ++j) cu[j] = rot * (sys.position(j) - origin);

    double sep = N >= 2 ? sys.min_spacing() : 1.0;
    for (std::size_t j = 0; j < N; ++j)
        for (std::size_t k = j + 1; k < N; ++k) sep = std::min(sep, std::abs(cu[j].real() - cu[k].real()));
    if (!(sep > 1e-6 * (N >= 2 ? sys.diameter() : 1.0)))
        throw TopologyError("corridor construction failed: centers nearly aligned along the rays");
    const double r0 = 0.25 * sep;

    double top = -std::numeric_limits<double>::infinity();
    for (const Vec2& c : cu) top = std::max(top, c.imag());
    top += r0;
    const double lane_gap = 0.5 * r0;
    auto lane = [&](std::size_t k) { return top + static_cast<double>(k + 1) * lane_gap; };
    auto radius = [&](std::size_t i) { return r0 * (0.5 + 0.5 * static_cast<double>(i + 1) / static_cast<double>(m)); };
    auto entry_x = [&](std::size_t i) { return cu[letters[i].center].real() - letters[i].sign * radius(i); };

    std::vector<Vec2> local;
    for (std::size_t i = 0; i < m; ++i) {
        const Letter l = letters[i];
        const Vec2 c = cu[l.center];
        const double r = radius(i);
        const double xin = entry_x(i), xout = c.real() + l.sign * r;
        local.emplace_back(xin, lane(i == 0 ? m : i));
        const double th0 = l.sign > 0 ? std::numbers::pi : 0.0;
        for (int k = 0; k <= arc_points; ++k)
            local.push_back(c + std::polar(r, th0 + l.sign * std::numbers::pi * k / arc_points));
        local.emplace_back(xout, lane(i + 1));
        local.emplace_back(i + 1 < m ? entry_x(i + 1) : entry_x(0), lane(i + 1));
    }
    // The last point duplicates the first lane corner of letter 0 only when
    // it is at the same height; drop exact repeats so segments stay non-degenerate.
    std::vector<Vec2> path;
    for (const Vec2& p : local)
        if (path.empty() || std::abs(p - path.back()) > 0.0) path.push_back(p / rot + origin);
    if (std::abs(path.back() - path.front()) == 0.0) path.pop_back();
    return {path, radius(0) / 8.0};
}

PeriodicLoop relax(const PeriodicLoop& loop, const CenterSystem& sys, const HomotopyWord& w) {
    // Short spring-plus-repulsion smoothing; every step keeps the word.
    PeriodicLoop cur = loop;
    const double step = 0.2;
    const double scale = sys.length_scale();
    const double clearance0 = loop_clearance(loop, sys).distance;
    for (int it = 0; it < 20; ++it) {
        PeriodicLoop next = cur;
        const double h = cur.length() / static_cast<double>(cur.size());
        for (std::size_t k = 0; k < cur.size(); ++k) {
            const auto i = static_cast<std::ptrdiff_t>(k);
            Vec2 f = cur.node(i + 1) - 2.0 * cur.node(i) + cur.node(i - 1);
            for (std::size_t j = 0; j < sys.size(); ++j) {
                const Vec2 d = cur.nodes[k] - sys.position(j);
                f += 0.05 * h * scale * scale * d / std::pow(std::abs(d), 3.0);
            }
            next.nodes[k] += step * f;
        }
        try {
            if (loop_clearance(next, sys).distance < 0.5 * clearance0) break;
            if (!(homotopy_word(next, sys) == w)) break;
            self_intersections(next);
        } catch (const Error&) {
            break;
        }
        cur = std::move(next);
    }
    return cur;
}

struct Verdict {
    bool admissible;
    std::optional<SubLoop> witness;
    PeriodicLoop representative;
};

Verdict judge(const HomotopyWord& spelled, const HomotopyWord& w, const CenterSystem& sys) {
    const PeriodicLoop seed = corridor_loop(spelled, sys, 2.0 * std::numbers::pi, 0);
    const PeriodicLoop taut = make_taut(relax(seed, sys, w), sys);
    Verdict v{true, std::nullopt, taut};
    for (SubLoop& s : innermost_subloops(taut, sys)) {
        if (s.enclosed_centers.size() < 2) {
            v.admissible = false;
            v.witness = std::move(s);
            break;
        }
    }
    return v;
}

}  // namespace

PeriodicLoop corridor_loop(const HomotopyWord& w, const CenterSystem& sys, double T, std::size_t n) {
    const Corridor c = corridor_path(w, sys);
    if (n == 0) {
        double L = 0.0;
        for (std::size_t i = 0; i < c.path.size(); ++i) L += std::abs(c.path[(i + 1) % c.path.size()] - c.path[i]);
        n = std::max<std::size_t>(64, static_cast<std::size_t>(std::ceil(L / c.spacing)));
    }
    PeriodicLoop loop(T, resample(c.path, n));
    if (!(homotopy_word(loop, sys) == w))
        throw TopologyError("corridor polygon does not resolve the word; use more nodes");
    return loop;
}

Admissibility is_admissible(const HomotopyWord& w, const CenterSystem& sys, bool cross_check) {
    if (w.empty()) throw TopologyError("trivial class");
    Verdict v = judge(w, w, sys);
    Admissibility out;
    out.admissible = v.admissible;
    out.witness = std::move(v.witness);
    out.representative = std::move(v.representative);
    if (cross_check) {
        std::vector<Letter> rotated = w.letters();
        std::rotate(rotated.begin(), rotated.begin() + 1, rotated.end());
        std::reverse(rotated.begin(), rotated.end());
        for (Letter& l : rotated) l.sign = -l.sign;
        // The inverse word traverses the same loops backwards; reverse the
        // resulting representative so it again lies in the class of w.
        const HomotopyWord inv(rotated);
        PeriodicLoop seed = corridor_loop(inv, sys, 2.0 * std::numbers::pi, 0);
        std::reverse(seed.nodes.begin(), seed.nodes.end());
        const PeriodicLoop taut = make_taut(relax(seed, sys, w), sys);
        bool second = true;
        for (const SubLoop& s : innermost_subloops(taut, sys))
            if (s.enclosed_centers.size() < 2) second = false;
        out.cross_check_agrees = second == out.admissible;
    }
    return out;
}

}  // namespace ncenter::topology
