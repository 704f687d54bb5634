#include "modalform/delaunay.hpp"

#include <algorithm>
#include <map>
#include <utility>

#include "modalform/error.hpp"

namespace modalform {
namespace {

using Real = long double;

struct Pt {
    Real x, y;
};

Real orient(const Pt& a, const Pt& b, const Pt& c) {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

// > 0 when d lies strictly inside the circumcircle of the ccw triangle abc.
Real incircle(const Pt& a, const Pt& b, const Pt& c, const Pt& d) {
    const Real adx = a.x - d.x, ady = a.y - d.y;
    const Real bdx = b.x - d.x, bdy = b.y - d.y;
    const Real cdx = c.x - d.x, cdy = c.y - d.y;
    const Real alift = adx * adx + ady * ady;
    const Real blift = bdx * bdx + bdy * bdy;
    const Real clift = cdx * cdx + cdy * cdy;
    return adx * (bdy * clift - cdy * blift) - ady * (bdx * clift - cdx * blift) +
           alift * (bdx * cdy - cdx * bdy);
}

struct Tri {
    std::array<int, 3> v;
    bool alive = true;
};

}  // namespace

std::vector<std::array<int, 3>> delaunay_triangulate(std::span<const Eigen::Vector2d> points) {
    const int n = static_cast<int>(points.size());
    if (n < 3) {
        throw InvalidInput("delaunay_triangulate: need at least 3 points");
    }

    std::vector<Pt> pts;
    pts.reserve(n + 3);
    Real minx = points[0].x(), maxx = minx, miny = points[0].y(), maxy = miny;
    for (const auto& p : points) {
        pts.push_back({p.x(), p.y()});
        minx = std::min<Real>(minx, p.x());
        maxx = std::max<Real>(maxx, p.x());
        miny = std::min<Real>(miny, p.y());
        maxy = std::max<Real>(maxy, p.y());
    }
    const Real cx = (minx + maxx) / 2, cy = (miny + maxy) / 2;
    const Real d = std::max<Real>({maxx - minx, maxy - miny, Real(1e-12)});
    const Real big = 1000 * d;
    pts.push_back({cx - big, cy - big});
    pts.push_back({cx + big, cy - big});
    pts.push_back({cx, cy + big});

    std::vector<Tri> tris;
    tris.push_back({{n, n + 1, n + 2}});

    std::vector<int> bad;
    std::map<std::pair<int, int>, int> edge_count;
    for (int i = 0; i < n; ++i) {
        bad.clear();
        for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
            if (!tris[t].alive) continue;
            const auto& v = tris[t].v;
            if (incircle(pts[v[0]], pts[v[1]], pts[v[2]], pts[i]) > 0) bad.push_back(t);
        }
        // Cavity boundary: directed edges of bad triangles whose twin is not in the cavity.
        edge_count.clear();
        for (int t : bad) {
            const auto& v = tris[t].v;
            for (int k = 0; k < 3; ++k) {
                const int a = v[k], b = v[(k + 1) % 3];
                ++edge_count[{std::min(a, b), std::max(a, b)}];
            }
        }
        for (int t : bad) {
            const auto v = tris[t].v;
            tris[t].alive = false;
            for (int k = 0; k < 3; ++k) {
                const int a = v[k], b = v[(k + 1) % 3];
                if (edge_count[{std::min(a, b), std::max(a, b)}] == 1) {
                    tris.push_back({{a, b, i}});
                }
            }
        }
        if (tris.size() > 8 * static_cast<std::size_t>(n) + 64) {
            std::erase_if(tris, [](const Tri& t) { return !t.alive; });
        }
    }

    std::vector<std::array<int, 3>> out;
    for (const auto& t : tris) {
        if (!t.alive) continue;
        if (t.v[0] >= n || t.v[1] >= n || t.v[2] >= n) continue;
        auto v = t.v;
        if (orient(pts[v[0]], pts[v[1]], pts[v[2]]) < 0) std::swap(v[1], v[2]);
        std::rotate(v.begin(), std::min_element(v.begin(), v.end()), v.end());
        out.push_back(v);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace modalform
