#pragma once

#include <greenexp/geo/geometry.hpp>

#include <map>
#include <string>

namespace greenexp {

enum class AreaKind { ward, lsoa };

// Analysis unit: a ward or LSOA.
struct AreaUnit {
    std::string id;
    AreaKind kind = AreaKind::ward;
    MultiPolygon boundary;
    double population = 0.0;
    std::map<std::string, double> covariates;
};

enum class GreenSpaceKind { park, garden };
enum class Access { open, restricted };

struct GreenSpacePolygon {
    std::string id;
    GreenSpaceKind kind = GreenSpaceKind::park;
    Access access = Access::open;
    MultiPolygon boundary;

    double area_m2() const { return area(boundary); }
    bool is_public() const { return access == Access::open; }
};

} // namespace greenexp
