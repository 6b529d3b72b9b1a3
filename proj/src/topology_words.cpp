#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "ncenter/topology.hpp"

namespace ncenter::topology {

namespace {

bool cancels(const Letter& a, const Letter& b) { return a.center == b.center && a.sign == -b.sign; }

bool letter_less(const Letter& a, const Letter& b) {
    if (a.center != b.center) return a.center < b.center;
    return a.sign > b.sign;  // positive generator before its inverse
}

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

HomotopyWord reduce_word(const std::vector<Letter>& raw) {
    std::vector<Letter> st;
    st.reserve(raw.size());
    for (const Letter& l : raw) {
        if (l.sign != 1 && l.sign != -1) throw std::invalid_argument("letter sign must be +1 or -1");
        if (!st.empty() && cancels(st.back(), l))
            st.pop_back();
        else
            st.push_back(l);
    }
    std::size_t lo = 0, hi = st.size();
    while (hi - lo >= 2 && cancels(st[lo], st[hi - 1])) {
        ++lo;
        --hi;
    }
    HomotopyWord w;
    w.letters_.assign(st.begin() + static_cast<std::ptrdiff_t>(lo), st.begin() + static_cast<std::ptrdiff_t>(hi));
    return w;
}

HomotopyWord::HomotopyWord(const std::vector<Letter>& raw) { *this = reduce_word(raw); }

std::vector<int> HomotopyWord::abelianization(std::size_t n_centers) const {
    std::vector<int> h(n_centers, 0);
    for (const Letter& l : letters_) {
        if (l.center >= n_centers) throw std::out_of_range("letter refers to a missing center");
        h[l.center] += l.sign;
    }
    return h;
}

std::vector<Letter> HomotopyWord::canonical() const {
    const std::size_t m = letters_.size();
    std::vector<Letter> best = letters_;
    std::vector<Letter> rot(m);
    for (std::size_t r = 1; r < m; ++r) {
        for (std::size_t i = 0; i < m; ++i) rot[i] = letters_[(i + r) % m];
        if (std::lexicographical_compare(rot.begin(), rot.end(), best.begin(), best.end(), letter_less))
            best = rot;
    }
    return best;
}

std::string HomotopyWord::str() const {
    std::string s;
    for (const Letter& l : letters_) {
        if (!s.empty()) s += ' ';
        s += (l.sign > 0 ? 'a' : 'A');
        s += std::to_string(l.center + 1);
    }
    return s;
}

bool operator==(const HomotopyWord& a, const HomotopyWord& b) {
    return a.size() == b.size() && a.canonical() == b.canonical();
}

std::vector<Letter> parse_letters(std::string_view text, std::size_t n_centers) {
    std::vector<Letter> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i == text.size()) break;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        const std::string_view tok = text.substr(i, j - i);
        i = j;
        if (tok.size() < 2 || (tok[0] != 'a' && tok[0] != 'A'))
            throw std::invalid_argument("bad word token '" + std::string(tok) + "'");
        std::size_t idx = 0;
        const auto digits = tok.substr(1);
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
        if (ec != std::errc() || ptr != digits.data() + digits.size())
            throw std::invalid_argument("bad word token '" + std::string(tok) + "'");
        if (idx < 1 || idx > n_centers)
            throw std::invalid_argument("word token '" + std::string(tok) + "' names a missing center");
        out.push_back({idx - 1, tok[0] == 'a' ? 1 : -1});
    }
    return out;
}

HomotopyWord parse_word(std::string_view text, std::size_t n_centers) {
    return reduce_word(parse_letters(text, n_centers));
}

int polygon_winding(const std::vector<Vec2>& polygon, Vec2 p) {
    double total = 0.0;
    for (std::size_t k = 0; k < polygon.size(); ++k) {
        const Vec2 a = polygon[k] - p, b = polygon[(k + 1) % polygon.size()] - p;
        total += std::arg(b / a);
    }
    return static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));
}

WindingVector winding_vector(const PeriodicLoop& loop, const CenterSystem& sys) {
    const double eps = sys.collision_tolerance();
    WindingVector w;
    w.entries.resize(sys.size());
    for (std::size_t j = 0; j < sys.size(); ++j) {
        const Vec2 c = sys.position(j);
        double total = 0.0;
        for (std::size_t k = 0; k < loop.size(); ++k) {
            const Vec2 a = loop.nodes[k], b = loop.node(k + 1);
            if (point_segment_distance(c, a, b) < eps) {
                std::ostringstream os;
                os << "winding ill-defined: segment " << k << " passes through center " << j;
                throw CollisionError(k, j, os.str());
            }
            total += std::arg((b - c) / (a - c));
        }
        w.entries[j] = static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));
    }
    return w;
}

Vec2 ray_direction(const CenterSystem& sys) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    Vec2 best = Vec2(0.0, -1.0);
    double best_score = -1.0;
    for (int attempt = 0; attempt < 16; ++attempt) {
        const Vec2 d = std::polar(1.0, -0.5 * std::numbers::pi + attempt * golden);
        // Sine of the smallest angle between a ray and another center seen from its origin.
        double score = 1.0;
        for (std::size_t j = 0; j < sys.size(); ++j)
            for (std::size_t k = 0; k < sys.size(); ++k) {
                if (j == k) continue;
                const Vec2 e = sys.position(k) - sys.position(j);
                if (dot(e, d) <= 0.0) continue;
                score = std::min(score, std::abs(cross(e, d)) / std::abs(e));
            }
        if (score >= 0.1) return d;
        if (score > best_score) {
            best_score = score;
            best = d;
        }
    }
    if (!(best_score > 0.0)) throw TopologyError("no ray direction separates the centers");
    return best;
}

HomotopyWord polygon_word(const std::vector<Vec2>& poly, const CenterSystem& sys) {
    const std::size_t n = poly.size();
    if (n < 2) return {};
    const double eps = 1e-9 * std::max(bbox_diagonal(poly), sys.size() >= 2 ? sys.diameter() : 1.0);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < sys.size(); ++j)
            if (point_segment_distance(sys.position(j), poly[k], poly[(k + 1) % n]) < eps)
                throw CollisionError(k, j, "word reading: segment passes through a center");

    const Vec2 d0 = ray_direction(sys);
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    struct Event {
        double pos;
        Letter letter;
    };
    for (int attempt = 0; attempt <= 16; ++attempt) {
        // Small rotations only, so every retry reads the word in the same basis.
        const double frac = attempt * phi - std::floor(attempt * phi);
        const Vec2 d = d0 * std::polar(1.0, attempt == 0 ? 0.0 : 1e-4 * (frac - 0.5));
        bool degenerate = false;
        for (std::size_t k = 0; k < n && !degenerate; ++k)
            for (std::size_t j = 0; j < sys.size(); ++j) {
                const Vec2 rel = poly[k] - sys.position(j);
                if (dot(rel, d) > 0.0 && std::abs(cross(rel, d)) < eps) {
                    degenerate = true;
                    break;
                }
            }
        if (degenerate) continue;

        std::vector<Event> events;
        for (std::size_t k = 0; k < n; ++k) {
            const Vec2 a = poly[k], e = poly[(k + 1) % n] - a;
            const double denom = cross(e, d);
            if (denom == 0.0) continue;
            for (std::size_t j = 0; j < sys.size(); ++j) {
                const Vec2 ca = sys.position(j) - a;
                const double u = cross(ca, d) / denom;
                const double s = cross(ca, e) / denom;
                if (u >= 0.0 && u < 1.0 && s > 0.0)
                    events.push_back({static_cast<double>(k) + u, Letter{j, denom < 0.0 ? 1 : -1}});
            }
        }
        std::stable_sort(events.begin(), events.end(),
                         [](const Event& x, const Event& y) { return x.pos < y.pos; });
        std::vector<Letter> raw;
        raw.reserve(events.size());
        for (const Event& ev : events) raw.push_back(ev.letter);
        return reduce_word(raw);
    }
    throw TopologyError("degenerate ray incidence persists after perturbation retries");
}

HomotopyWord homotopy_word(const PeriodicLoop& loop, const CenterSystem& sys) {
    return polygon_word(loop.nodes, sys);
}

}  // namespace ncenter::topology
