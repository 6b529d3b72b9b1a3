#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ncenter/topology.hpp"

namespace ncenter::topology {

namespace {

double bbox_diagonal(const std::vector<Vec2>& pts) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const Vec2& p : pts) {
        x0 = std::min(x0, p.real());
        x1 = std::max(x1, p.real());
        y0 = std::min(y0, p.imag());
        y1 = std::max(y1, p.imag());
    }
    return std::hypot(x1 - x0, y1 - y0);
}

}  // namespace

IntersectionReport polygon_self_intersections(const std::vector<Vec2>& poly) {
    const std::size_t n = poly.size();
    IntersectionReport report;
    if (n < 4) return report;
    const double eps = 1e-9 * bbox_diagonal(poly);
    std::vector<std::pair<std::size_t, std::size_t>> bad;

    auto seg = [&](std::size_t k) { return std::pair{poly[k], poly[(k + 1) % n]}; };

    // Consecutive segments only meet at their shared node unless they fold back.
    for (std::size_t k = 0; k < n; ++k) {
        const auto [a, b] = seg(k);
        const Vec2 c = poly[(k + 2) % n];
        const Vec2 e1 = b - a, e2 = c - b;
        if (dot(e1, e2) < 0.0 && std::abs(cross(e1, e2)) <= eps * std::max(std::abs(e1), std::abs(e2)))
            bad.emplace_back(k, (k + 1) % n);
    }

    struct Box {
        double xmin, xmax, ymin, ymax;
        std::size_t k;
    };
    std::vector<Box> boxes(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto [a, b] = seg(k);
        boxes[k] = {std::min(a.real(), b.real()), std::max(a.real(), b.real()),
                    std::min(a.imag(), b.imag()), std::max(a.imag(), b.imag()), k};
    }
    std::sort(boxes.begin(), boxes.end(), [](const Box& p, const Box& q) {
        return p.xmin < q.xmin || (p.xmin == q.xmin && p.k < q.k);
    });

    auto test_pair = [&](std::size_t k, std::size_t l) {
        if (k > l) std::swap(k, l);
        const auto [a, b] = seg(k);
        const auto [c, d] = seg(l);
        if (point_segment_distance(a, c, d) < eps || point_segment_distance(b, c, d) < eps ||
            point_segment_distance(c, a, b) < eps || point_segment_distance(d, a, b) < eps) {
            bad.emplace_back(k, l);
            return;
        }
        const double o1 = cross(b - a, c - a), o2 = cross(b - a, d - a);
        const double o3 = cross(d - c, a - c), o4 = cross(d - c, b - c);
        if ((o1 > 0.0) == (o2 > 0.0) || (o3 > 0.0) == (o4 > 0.0)) return;
        const double ta = o3 / (o3 - o4);
        const double tb = o1 / (o1 - o2);
        report.crossings.push_back({k, l, a + ta * (b - a), ta, tb});
    };

    // Sort-and-sweep along x: only segments whose x-extents overlap are tested.
    std::vector<const Box*> active;
    for (const Box& box : boxes) {
        std::erase_if(active, [&](const Box* q) { return q->xmax < box.xmin - eps; });
        for (const Box* q : active) {
            const std::size_t k = box.k, l = q->k;
            if ((k + 1) % n == l || (l + 1) % n == k) continue;
            if (q->ymax < box.ymin - eps || box.ymax < q->ymin - eps) continue;
            test_pair(k, l);
        }
        active.push_back(&box);
    }

    if (!bad.empty()) {
        std::sort(bad.begin(), bad.end());
        std::ostringstream os;
        os << "non-generic configuration at segment pairs:";
        for (const auto& [k, l] : bad) os << " (" << k << "," << l << ")";
        throw NonGenericError(bad, os.str());
    }
    std::sort(report.crossings.begin(), report.crossings.end(), [](const Crossing& p, const Crossing& q) {
        return p.seg_a != q.seg_a ? p.seg_a < q.seg_a
                                  : (p.param_a != q.param_a ? p.param_a < q.param_a : p.seg_b < q.seg_b);
    });
    return report;
}

IntersectionReport self_intersections(const PeriodicLoop& loop) { return polygon_self_intersections(loop.nodes); }

std::vector<SubLoop> innermost_subloops(const PeriodicLoop& loop, const CenterSystem& sys) {
    const std::size_t n = loop.size();
    const IntersectionReport rep = self_intersections(loop);
    std::vector<SubLoop> out;

    auto enclose = [&](SubLoop& s) {
        for (std::size_t j = 0; j < sys.size(); ++j)
            if (polygon_winding(s.polygon, sys.position(j)) != 0) s.enclosed_centers.push_back(j);
    };

    if (rep.count() == 0) {
        SubLoop s;
        s.first_segment = n - 1;
        s.last_segment = n - 1;
        s.crossing_point = loop.nodes[0];
        s.polygon = loop.nodes;
        s.is_innermost = true;
        enclose(s);
        out.push_back(std::move(s));
        return out;
    }

    const double N = static_cast<double>(n);
    std::vector<std::pair<double, double>> visits;
    for (const Crossing& c : rep.crossings)
        visits.emplace_back(static_cast<double>(c.seg_a) + c.param_a, static_cast<double>(c.seg_b) + c.param_b);

    auto inside = [&](double x, double lo, double hi) { return (x > lo && x < hi) || (x + N > lo && x + N < hi); };

    for (std::size_t ci = 0; ci < rep.count(); ++ci) {
        const Crossing& c = rep.crossings[ci];
        const auto [pa, pb] = visits[ci];
        for (int side = 0; side < 2; ++side) {
            const double lo = side == 0 ? pa : pb;
            const double hi = side == 0 ? pb : pa + N;
            bool simple = true;
            for (std::size_t cj = 0; cj < rep.count() && simple; ++cj) {
                if (cj == ci) continue;
                if (inside(visits[cj].first, lo, hi) && inside(visits[cj].second, lo, hi)) simple = false;
            }
            if (!simple) continue;
            SubLoop s;
            s.first_segment = side == 0 ? c.seg_a : c.seg_b;
            s.last_segment = side == 0 ? c.seg_b : c.seg_a;
            s.crossing_point = c.point;
            s.is_innermost = true;
            s.polygon.push_back(c.point);
            for (std::size_t k = s.first_segment + 1;; ++k) {
                s.polygon.push_back(loop.nodes[k % n]);
                if (k % n == s.last_segment) break;
            }
            enclose(s);
            out.push_back(std::move(s));
        }
    }
    return out;
}

}  // namespace ncenter::topology
