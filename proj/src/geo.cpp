#include "geofusion/geo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace geofusion {

void validate_geopoint(const GeoPoint& p) {
    if (!std::isfinite(p.lon) || !std::isfinite(p.lat))
        throw std::invalid_argument("GeoPoint: non-finite coordinate");
    if (p.lon < -180.0 || p.lon > 180.0)
        throw std::invalid_argument("GeoPoint: longitude out of [-180, 180]");
    if (p.lat <= -90.0 || p.lat >= 90.0)
        throw std::invalid_argument("GeoPoint: latitude out of (-90, 90)");
}

std::array<double, 2> location_offset(const GeoPoint& p, const GeoPoint& ref) {
    validate_geopoint(p);
    validate_geopoint(ref);
    const double c = std::cos(ref.lat * M_PI / 180.0);
    return {p.lat - ref.lat, (p.lon - ref.lon) * c};
}

Vec2 local_km(const GeoPoint& p, const GeoPoint& ref) {
    auto off = location_offset(p, ref);
    return {kKmPerDegree * off[1], kKmPerDegree * off[0]};
}

GeoPoint from_local_km(const Vec2& v, const GeoPoint& ref) {
    const double c = std::cos(ref.lat * M_PI / 180.0);
    GeoPoint p;
    p.lat = ref.lat + v.y / kKmPerDegree;
    p.lon = ref.lon + v.x / (kKmPerDegree * c);
    return p;
}

double distance_km(const GeoPoint& a, const GeoPoint& b, double ref_lat_deg) {
    const double c = std::cos(ref_lat_deg * M_PI / 180.0);
    const double dlat = a.lat - b.lat;
    const double dlon = (a.lon - b.lon) * c;
    return kKmPerDegree * std::sqrt(dlat * dlat + dlon * dlon);
}

Tensor pairwise_distance_km(const std::vector<GeoPoint>& a, const std::vector<GeoPoint>& b,
                            double ref_lat_deg) {
    Tensor out({static_cast<int>(a.size()), static_cast<int>(b.size())});
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < b.size(); ++j)
            out.at(static_cast<int>(i), static_cast<int>(j)) = distance_km(a[i], b[j], ref_lat_deg);
    return out;
}

// ---- planar helpers -----------------------------------------------------

namespace {

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// proper or endpoint-touching intersection of segments ab and cd
bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
        double v = cross(p, q, r);
        if (v > 1e-15) return 1;
        if (v < -1e-15) return -1;
        return 0;
    };
    auto on_segment = [](const Vec2& p, const Vec2& q, const Vec2& r) {
        return std::min(p.x, q.x) - 1e-15 <= r.x && r.x <= std::max(p.x, q.x) + 1e-15 &&
               std::min(p.y, q.y) - 1e-15 <= r.y && r.y <= std::max(p.y, q.y) + 1e-15;
    };
    int o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(a, b, c)) return true;
    if (o2 == 0 && on_segment(a, b, d)) return true;
    if (o3 == 0 && on_segment(c, d, a)) return true;
    if (o4 == 0 && on_segment(c, d, b)) return true;
    return false;
}

}  // namespace

double shoelace_area(const std::vector<Vec2>& ring) {
    const size_t n = ring.size();
    double s = 0.0;
    for (size_t i = 0; i + 1 < n; ++i) s += ring[i].x * ring[i + 1].y - ring[i + 1].x * ring[i].y;
    return 0.5 * s;
}

double ring_perimeter(const std::vector<Vec2>& ring) {
    double p = 0.0;
    for (size_t i = 0; i + 1 < ring.size(); ++i)
        p += std::hypot(ring[i + 1].x - ring[i].x, ring[i + 1].y - ring[i].y);
    return p;
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Vec2& a, const Vec2& b) { return a.x == b.x && a.y == b.y; }),
              pts.end());
    const size_t n = pts.size();
    if (n < 3) return pts;
    std::vector<Vec2> hull(2 * n);
    size_t k = 0;
    for (size_t i = 0; i < n; ++i) {  // lower
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    for (size_t i = n - 1, t = k + 1; i-- > 0;) {  // upper
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

Vec2 ring_centroid(const std::vector<Vec2>& ring) {
    double a = 0.0, cx = 0.0, cy = 0.0;
    for (size_t i = 0; i + 1 < ring.size(); ++i) {
        const double w = ring[i].x * ring[i + 1].y - ring[i + 1].x * ring[i].y;
        a += w;
        cx += (ring[i].x + ring[i + 1].x) * w;
        cy += (ring[i].y + ring[i + 1].y) * w;
    }
    if (std::abs(a) < 1e-18) throw std::invalid_argument("ring_centroid: degenerate ring");
    return {cx / (3.0 * a), cy / (3.0 * a)};
}

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& ring) {
    bool inside = false;
    for (size_t i = 0; i + 1 < ring.size(); ++i) {
        const Vec2& a = ring[i];
        const Vec2& b = ring[i + 1];
        if ((a.y > p.y) != (b.y > p.y)) {
            double xit = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if (p.x < xit) inside = !inside;
        }
    }
    return inside;
}

bool ring_is_simple(const std::vector<Vec2>& ring) {
    const size_t n = ring.size() - 1;  // edges
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            // skip adjacent edges (shared endpoint) including the wrap pair
            if (j == i + 1 || (i == 0 && j == n - 1)) continue;
            if (segments_intersect(ring[i], ring[i + 1], ring[j], ring[j + 1])) return false;
        }
    }
    return true;
}

bool polygon_intersects_box(const std::vector<Vec2>& ring, double x0, double y0, double x1,
                            double y1) {
    for (size_t i = 0; i + 1 < ring.size(); ++i) {
        const Vec2& v = ring[i];
        if (v.x >= x0 && v.x <= x1 && v.y >= y0 && v.y <= y1) return true;
    }
    const std::array<Vec2, 5> box = {{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}}};
    for (const Vec2& c : box)
        if (point_in_polygon(c, ring)) return true;
    for (size_t i = 0; i + 1 < ring.size(); ++i)
        for (size_t j = 0; j < 4; ++j)
            if (segments_intersect(ring[i], ring[i + 1], box[j], box[j + 1])) return true;
    return false;
}

// ---- tract geometry -----------------------------------------------------

TractPolygon TractPolygon::from_vertices(std::vector<GeoPoint> vertices) {
    if (!vertices.empty() && vertices.front().lon == vertices.back().lon &&
        vertices.front().lat == vertices.back().lat)
        vertices.pop_back();
    if (vertices.size() < 3)
        throw std::invalid_argument("TractPolygon: need at least 3 distinct vertices");
    for (const auto& v : vertices) validate_geopoint(v);
    TractPolygon poly;
    poly.ring = std::move(vertices);
    poly.ring.push_back(poly.ring.front());
    return poly;
}

GeometrySummary geometry_summary(const TractPolygon& poly, const GeoPoint& ref) {
    std::vector<Vec2> km;
    km.reserve(poly.ring.size());
    for (const auto& gp : poly.ring) km.push_back(local_km(gp, ref));
    if (!ring_is_simple(km)) throw std::invalid_argument("geometry_summary: self-intersecting ring");

    GeometrySummary s;
    s.area_km2 = std::abs(shoelace_area(km));
    if (s.area_km2 <= 0.0) throw std::invalid_argument("geometry_summary: degenerate polygon");
    s.perimeter_km = ring_perimeter(km);

    std::vector<Vec2> hull = convex_hull(std::vector<Vec2>(km.begin(), km.end() - 1));
    hull.push_back(hull.front());
    s.hull_area_km2 = std::abs(shoelace_area(hull));

    s.log_area = std::log1p(s.area_km2);
    s.compactness = 4.0 * M_PI * s.area_km2 / (s.perimeter_km * s.perimeter_km);
    s.hull_ratio = s.area_km2 / s.hull_area_km2;
    return s;
}

TractSummary tract_summary(const TractPolygon& poly, const GeoPoint& rep, const GeoPoint& ref) {
    GeometrySummary g = geometry_summary(poly, ref);
    auto off = location_offset(rep, ref);
    TractSummary s;
    s.u = {off[0], off[1], g.log_area, g.compactness, g.hull_ratio};
    return s;
}

double distance_bias(double d_km, const DistanceBiasConfig& cfg) {
    if (cfg.tau_km <= 0.0) throw std::invalid_argument("distance_bias: tau must be positive");
    if (d_km < 0.0) throw std::invalid_argument("distance_bias: negative distance");
    return std::tanh((cfg.d0_km - d_km) / cfg.tau_km);
}

// ---- positional encodings -----------------------------------------------

PositionalEncoder::PositionalEncoder(const std::string& name, int dim_vis, int dim_tab, Rng& rng)
    : f_vis(name + ".f_vis", 2, 4 * dim_vis, dim_vis, rng),
      f_tab(name + ".f_tab", 5, 4 * dim_tab, dim_tab, rng) {}

Var PositionalEncoder::encode_vision(Tape& t,
                                     const std::vector<std::array<double, 2>>& offsets) const {
    Tensor in({static_cast<int>(offsets.size()), 2});
    for (size_t i = 0; i < offsets.size(); ++i) {
        in.at(static_cast<int>(i), 0) = offsets[i][0];
        in.at(static_cast<int>(i), 1) = offsets[i][1];
    }
    return f_vis.forward(t, t.constant(std::move(in)));
}

Var PositionalEncoder::encode_tract(Tape& t, const std::vector<TractSummary>& summaries) const {
    Tensor in({static_cast<int>(summaries.size()), 5});
    for (size_t i = 0; i < summaries.size(); ++i)
        for (int j = 0; j < 5; ++j) in.at(static_cast<int>(i), j) = summaries[i].u[j];
    return f_tab.forward(t, t.constant(std::move(in)));
}

void PositionalEncoder::collect(ParamList& out) {
    f_vis.collect(out);
    f_tab.collect(out);
}

}  // namespace geofusion
