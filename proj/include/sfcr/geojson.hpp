#pragma once

#include <string>
#include <vector>

#include "sfcr/geometry.hpp"

namespace sfcr {

// Reads a GeoJSON FeatureCollection of Polygon / MultiPolygon features into
// regions (MultiPolygon parts become additional rings of one region).  Region
// ids come from the named feature property, falling back to the feature-level
// "id" member.  Missing ids, duplicate ids, or non-areal geometries raise
// InputError/GeometryError.
std::vector<Region> parse_geojson(const std::string& text, const std::string& id_property = "id");
std::vector<Region> load_geojson(const std::string& path, const std::string& id_property = "id");

// Serialization used by the synthetic-data writer.
std::string regions_to_geojson(const std::vector<Region>& regions,
                               const std::string& id_property = "id");

}  // namespace sfcr
