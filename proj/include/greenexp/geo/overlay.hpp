#pragma once

#include <greenexp/geo/geometry.hpp>

namespace greenexp {

enum class BooleanOp { intersect, subtract, unite };

// Boolean overlay of two valid (multi)polygons. The result may be empty.
inline MultiPolygon polygon_ops(const MultiPolygon& a, const MultiPolygon& b, BooleanOp op) {
    const MultiPolygon va = validated(a, "left operand");
    const MultiPolygon vb = validated(b, "right operand");
    MultiPolygon out;
    switch (op) {
    case BooleanOp::intersect: bg::intersection(va, vb, out); break;
    case BooleanOp::subtract: bg::difference(va, vb, out); break;
    case BooleanOp::unite: bg::union_(va, vb, out); break;
    }
    bg::correct(out);
    return out;
}

inline double intersection_area(const MultiPolygon& a, const MultiPolygon& b) {
    if (!boxes_intersect(envelope(a), envelope(b))) return 0.0;
    MultiPolygon out;
    bg::intersection(a, b, out);
    return bg::area(out);
}

} // namespace greenexp
