#pragma once

#include <array>
#include <vector>

#include "geofusion/nn.hpp"
#include "geofusion/tensor.hpp"

namespace geofusion {

constexpr double kEarthRadiusKm = 6371.0;
// km per degree of latitude under the local equirectangular approximation
constexpr double kKmPerDegree = kEarthRadiusKm * M_PI / 180.0;

struct GeoPoint {
    double lon = 0.0;  // degrees in [-180, 180]
    double lat = 0.0;  // degrees in (-90, 90)
};

void validate_geopoint(const GeoPoint& p);

// Point in the local tangent plane, km. x is east, y is north.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

// [lat offset, cos(ref.lat)-scaled lon offset] in degrees. Zero when p == ref.
std::array<double, 2> location_offset(const GeoPoint& p, const GeoPoint& ref);

Vec2 local_km(const GeoPoint& p, const GeoPoint& ref);
GeoPoint from_local_km(const Vec2& v, const GeoPoint& ref);

// Equirectangular distance with the shared reference latitude (ref_lat_deg is
// applied to every pair, keeping distances consistent with location_offset).
double distance_km(const GeoPoint& a, const GeoPoint& b, double ref_lat_deg);
Tensor pairwise_distance_km(const std::vector<GeoPoint>& a, const std::vector<GeoPoint>& b,
                            double ref_lat_deg);

// ---- planar polygon helpers (km plane) --------------------------------

double shoelace_area(const std::vector<Vec2>& ring);          // signed
double ring_perimeter(const std::vector<Vec2>& ring);
std::vector<Vec2> convex_hull(std::vector<Vec2> pts);         // CCW, collinear dropped
Vec2 ring_centroid(const std::vector<Vec2>& ring);
bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& ring);
bool ring_is_simple(const std::vector<Vec2>& ring);           // O(n^2) segment test
bool polygon_intersects_box(const std::vector<Vec2>& ring, double x0, double y0, double x1,
                            double y1);

// ---- tract geometry ----------------------------------------------------

// Exterior ring, stored closed (front == back). At least 3 distinct vertices.
struct TractPolygon {
    std::vector<GeoPoint> ring;

    static TractPolygon from_vertices(std::vector<GeoPoint> vertices);
    int distinct_vertices() const { return static_cast<int>(ring.size()) - 1; }
};

struct GeometrySummary {
    double area_km2 = 0.0;
    double perimeter_km = 0.0;
    double hull_area_km2 = 0.0;
    double log_area = 0.0;    // mu = log(1 + A)
    double compactness = 0.0; // kappa = 4*pi*A / P^2
    double hull_ratio = 0.0;  // rho = A / H
};

GeometrySummary geometry_summary(const TractPolygon& poly, const GeoPoint& ref);

// u = [lat offset, scaled lon offset, mu, kappa, rho] of the representative point
struct TractSummary {
    std::array<double, 5> u{};
};

TractSummary tract_summary(const TractPolygon& poly, const GeoPoint& rep, const GeoPoint& ref);

// ---- distance bias ------------------------------------------------------

struct DistanceBiasConfig {
    double d0_km = 10.0;  // zero-crossing distance
    double tau_km = 25.0; // temperature
};

double distance_bias(double d_km, const DistanceBiasConfig& cfg);

// ---- learned positional encodings --------------------------------------

// f_vis: 2 -> dim_vis and f_tab: 5 -> dim_tab, each a one-hidden-layer MLP
// with GELU and hidden width 4x the output dimension.
class PositionalEncoder {
public:
    PositionalEncoder() = default;
    PositionalEncoder(const std::string& name, int dim_vis, int dim_tab, Rng& rng);

    Var encode_vision(Tape& t, const std::vector<std::array<double, 2>>& offsets) const;
    Var encode_tract(Tape& t, const std::vector<TractSummary>& summaries) const;
    void collect(ParamList& out);

    Mlp f_vis;
    Mlp f_tab;
};

}  // namespace geofusion
