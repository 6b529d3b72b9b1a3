#include <algorithm>
#include <cmath>
#include <optional>

#include "ncenter/topology.hpp"

namespace ncenter::topology {

namespace {

double polygon_area(const std::vector<Vec2>& poly) {
    double a = 0.0;
    for (std::size_t k = 0; k < poly.size(); ++k) a += cross(poly[k], poly[(k + 1) % poly.size()]);
    return 0.5 * std::abs(a);
}

struct Visit {
    double pos;        // segment index + parameter
    std::size_t seg;
};

// Node indices passed when running forward from visit p to visit q.
std::vector<std::size_t> arc_nodes(const Visit& p, const Visit& q, std::size_t n) {
    std::size_t count = (q.seg + n - p.seg) % n;
    if (p.seg == q.seg && q.pos < p.pos) count = n;
    std::vector<std::size_t> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = (p.seg + 1 + i) % n;
    return out;
}

double forward_length(double from, double to, double N) {
    double d = std::fmod(to - from, N);
    if (d < 0.0) d += N;
    return d;
}

struct Candidate {
    int kind = 0;      // 1: monogon, 2: bigon
    double area = 0.0;
    // Monogon: arc a (reversed). Bigon: arcs a and b; `swap_reverse` selects
    // the surgery for arcs running to opposite crossings.
    Visit a0, a1, b0, b1;
    bool reversed_pair = false;
};

std::vector<Vec2> gather(const std::vector<Vec2>& nodes, const std::vector<std::size_t>& idx) {
    std::vector<Vec2> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(nodes[i]);
    return out;
}

std::vector<Candidate> find_candidates(const PeriodicLoop& loop, const CenterSystem& sys,
                                       const IntersectionReport& rep, bool monogons, bool bigons) {
    const std::size_t n = loop.size();
    const double N = static_cast<double>(n);
    std::vector<Candidate> out;
    std::vector<std::pair<Visit, Visit>> visits;
    for (const Crossing& c : rep.crossings)
        visits.push_back({{static_cast<double>(c.seg_a) + c.param_a, c.seg_a},
                          {static_cast<double>(c.seg_b) + c.param_b, c.seg_b}});

    if (monogons) {
        for (std::size_t ci = 0; ci < rep.count(); ++ci) {
            const auto& [va, vb] = visits[ci];
            for (int side = 0; side < 2; ++side) {
                const Visit& p = side == 0 ? va : vb;
                const Visit& q = side == 0 ? vb : va;
                std::vector<Vec2> poly{rep.crossings[ci].point};
                const auto body = gather(loop.nodes, arc_nodes(p, q, n));
                poly.insert(poly.end(), body.begin(), body.end());
                if (!polygon_word(poly, sys).empty()) continue;
                Candidate c;
                c.kind = 1;
                c.area = polygon_area(poly);
                c.a0 = p;
                c.a1 = q;
                out.push_back(c);
            }
        }
    }

    if (bigons) {
        for (std::size_t ci = 0; ci < rep.count(); ++ci)
            for (std::size_t cj = 0; cj < rep.count(); ++cj) {
                if (ci == cj) continue;
                const Vec2 P = rep.crossings[ci].point, Q = rep.crossings[cj].point;
                for (int xi = 0; xi < 2; ++xi)
                    for (int yi = 0; yi < 2; ++yi) {
                        const Visit x = xi == 0 ? visits[ci].first : visits[ci].second;
                        const Visit x2 = xi == 0 ? visits[ci].second : visits[ci].first;
                        const Visit y = yi == 0 ? visits[cj].first : visits[cj].second;
                        const Visit y2 = yi == 0 ? visits[cj].second : visits[cj].first;
                        const double lenA = forward_length(x.pos, y.pos, N);
                        for (int reversed = 0; reversed < 2; ++reversed) {
                            // Same direction: second arc also runs P -> Q; otherwise Q -> P.
                            const Visit bs = reversed ? y2 : x2;
                            const Visit be = reversed ? x2 : y2;
                            const double off = forward_length(x.pos, bs.pos, N);
                            const double lenB = forward_length(bs.pos, be.pos, N);
                            if (!(off > lenA && off + lenB < N)) continue;
                            std::vector<Vec2> poly{P};
                            const auto arcA = gather(loop.nodes, arc_nodes(x, y, n));
                            poly.insert(poly.end(), arcA.begin(), arcA.end());
                            poly.push_back(Q);
                            auto arcB = gather(loop.nodes, arc_nodes(bs, be, n));
                            if (!reversed) std::reverse(arcB.begin(), arcB.end());
                            poly.insert(poly.end(), arcB.begin(), arcB.end());
                            if (!polygon_word(poly, sys).empty()) continue;
                            Candidate c;
                            c.kind = 2;
                            c.area = polygon_area(poly);
                            c.a0 = x;
                            c.a1 = y;
                            c.b0 = bs;
                            c.b1 = be;
                            c.reversed_pair = reversed;
                            out.push_back(c);
                        }
                    }
            }
    }
    std::stable_sort(out.begin(), out.end(), [](const Candidate& p, const Candidate& q) {
        return p.area < q.area || (p.area == q.area && p.kind < q.kind);
    });
    return out;
}

// Splits the segments carrying the candidate's crossing visits so that the
// reconnecting segments stay close to the crossings.
PeriodicLoop refine_near(const PeriodicLoop& loop, const Candidate& c) {
    std::vector<std::size_t> segs{c.a0.seg, c.a1.seg};
    if (c.kind == 2) {
        segs.push_back(c.b0.seg);
        segs.push_back(c.b1.seg);
    }
    constexpr int pieces = 4;
    std::vector<Vec2> nodes;
    nodes.reserve(loop.size() + pieces * segs.size());
    for (std::size_t k = 0; k < loop.size(); ++k) {
        nodes.push_back(loop.nodes[k]);
        if (std::find(segs.begin(), segs.end(), k) == segs.end()) continue;
        const Vec2 a = loop.nodes[k], b = loop.node(static_cast<std::ptrdiff_t>(k) + 1);
        for (int i = 1; i < pieces; ++i) nodes.push_back(a + (b - a) * (static_cast<double>(i) / pieces));
    }
    return PeriodicLoop(loop.period, std::move(nodes));
}

// Reconnects node blocks. Returns nothing when a block is empty, i.e. two
// crossing visits share a segment and the surgery cannot be done at node level.
std::optional<PeriodicLoop> rewire(const PeriodicLoop& loop, const Candidate& c) {
    const std::size_t n = loop.size();
    std::vector<std::size_t> order;
    if (c.kind == 1) {
        auto block = arc_nodes(c.a0, c.a1, n);
        auto rest = arc_nodes(c.a1, c.a0, n);
        if (block.empty() || rest.empty()) return std::nullopt;
        std::reverse(block.begin(), block.end());
        order = block;
        order.insert(order.end(), rest.begin(), rest.end());
    } else {
        auto A = arc_nodes(c.a0, c.a1, n);
        auto G1 = arc_nodes(c.a1, c.b0, n);
        auto B = arc_nodes(c.b0, c.b1, n);
        auto G2 = arc_nodes(c.b1, c.a0, n);
        if (A.empty() || G1.empty() || B.empty() || G2.empty()) return std::nullopt;
        if (c.reversed_pair) {
            std::reverse(A.begin(), A.end());
            std::reverse(B.begin(), B.end());
        }
        order = B;
        order.insert(order.end(), G1.begin(), G1.end());
        order.insert(order.end(), A.begin(), A.end());
        order.insert(order.end(), G2.begin(), G2.end());
    }
    if (order.size() != n) return std::nullopt;
    std::vector<Vec2> nodes;
    nodes.reserve(n);
    for (std::size_t i : order) nodes.push_back(loop.nodes[i]);
    return PeriodicLoop(loop.period, std::move(nodes));
}

std::optional<PeriodicLoop> checked_surgery(const PeriodicLoop& loop, const CenterSystem& sys,
                                            const Candidate& c, std::size_t count_before,
                                            const HomotopyWord& word_before) {
    auto out = rewire(loop, c);
    if (!out) return std::nullopt;
    try {
        if (self_intersections(*out).count() + static_cast<std::size_t>(c.kind) != count_before)
            return std::nullopt;
        if (!(homotopy_word(*out, sys) == word_before)) return std::nullopt;
    } catch (const Error&) {
        return std::nullopt;
    }
    return out;
}

// One surgery of the requested kinds; refines the loop when the chosen
// reconnection is not local enough. Returns nothing when no candidate exists.
std::optional<PeriodicLoop> one_surgery(const PeriodicLoop& input, const CenterSystem& sys, bool monogons,
                                        bool bigons) {
    PeriodicLoop loop = input;
    const HomotopyWord word = homotopy_word(loop, sys);
    for (int refinements = 0; refinements <= 8; ++refinements) {
        const IntersectionReport rep = self_intersections(loop);
        const auto cands = find_candidates(loop, sys, rep, monogons, bigons);
        if (cands.empty()) return std::nullopt;
        if (auto done = checked_surgery(loop, sys, cands.front(), rep.count(), word)) return done;
        loop = refine_near(loop, cands.front());
    }
    throw TopologyError("surgery failed to stay local after repeated refinement");
}

}  // namespace

PeriodicLoop remove_monogon(const PeriodicLoop& loop, const CenterSystem& sys) {
    auto out = one_surgery(loop, sys, true, false);
    if (!out) throw TopologyError("no singular 1-gon found");
    return *out;
}

PeriodicLoop remove_bigon(const PeriodicLoop& loop, const CenterSystem& sys) {
    auto out = one_surgery(loop, sys, false, true);
    if (!out) throw TopologyError("no singular 2-gon found");
    return *out;
}

PeriodicLoop make_taut(const PeriodicLoop& loop, const CenterSystem& sys, const TautOptions& opts) {
    PeriodicLoop cur = loop;
    std::size_t surgeries = 0;
    while (auto next = one_surgery(cur, sys, true, true)) {
        cur = std::move(*next);
        if (++surgeries > opts.max_surgeries) throw TopologyError("make_taut: surgery cap exceeded");
    }
    if (std::isfinite(opts.action_budget)) {
        const double a0 = action(loop, sys), a1 = action(cur, sys);
        if (a1 - a0 > opts.action_budget * std::abs(a0))
            throw TopologyError("make_taut: action increase exceeds the budget");
    }
    return cur;
}

}  // namespace ncenter::topology
