#include "sfcr/geojson.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace sfcr {
namespace {

using nlohmann::json;

Ring parse_ring(const json& coords, const std::string& id) {
  if (!coords.is_array() || coords.size() < 3)
    throw GeometryError("region '" + id + "': ring needs at least 3 coordinates");
  Ring ring;
  for (const auto& pt : coords) {
    if (!pt.is_array() || pt.size() < 2)
      throw GeometryError("region '" + id + "': malformed coordinate pair");
    ring.push_back({pt[0].get<double>(), pt[1].get<double>()});
  }
  // GeoJSON rings repeat the first vertex at the end; store unclosed.
  if (ring.size() > 1 && ring.front() == ring.back()) ring.pop_back();
  return ring;
}

std::string feature_id(const json& feature, const std::string& id_property, int index) {
  if (feature.contains("properties") && feature["properties"].is_object()) {
    const auto& props = feature["properties"];
    if (props.contains(id_property)) {
      const auto& v = props[id_property];
      if (v.is_string()) return v.get<std::string>();
      if (v.is_number_integer()) return std::to_string(v.get<long long>());
      if (v.is_number()) {
        std::ostringstream os;
        os << v.get<double>();
        return os.str();
      }
    }
  }
  if (feature.contains("id")) {
    const auto& v = feature["id"];
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
  }
  throw InputError("geojson-id", "feature #" + std::to_string(index) + " has no '" +
                                     id_property + "' property and no id");
}

}  // namespace

std::vector<Region> parse_geojson(const std::string& text, const std::string& id_property) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError("geojson-parse", std::string("invalid GeoJSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection")
    throw InputError("geojson-type", "expected a GeoJSON FeatureCollection");
  if (!doc.contains("features") || !doc["features"].is_array())
    throw InputError("geojson-features", "FeatureCollection has no features array");

  std::vector<Region> regions;
  std::set<std::string> seen;
  int index = 0;
  for (const auto& feature : doc["features"]) {
    Region region;
    region.id = feature_id(feature, id_property, index);
    if (!seen.insert(region.id).second)
      throw InputError("geojson-duplicate", "duplicate region id '" + region.id + "'");
    if (!feature.contains("geometry") || !feature["geometry"].is_object())
      throw GeometryError("region '" + region.id + "' has no geometry");
    const auto& geom = feature["geometry"];
    const std::string type = geom.value("type", "");
    const auto& coords = geom["coordinates"];
    if (type == "Polygon") {
      for (const auto& ring : coords) region.rings.push_back(parse_ring(ring, region.id));
    } else if (type == "MultiPolygon") {
      for (const auto& poly : coords)
        for (const auto& ring : poly) region.rings.push_back(parse_ring(ring, region.id));
    } else {
      throw GeometryError("region '" + region.id + "': unsupported geometry type '" + type +
                          "' (need Polygon or MultiPolygon)");
    }
    region.validate();
    regions.push_back(std::move(region));
    ++index;
  }
  if (regions.empty()) throw InputError("geojson-empty", "FeatureCollection has no features");
  return regions;
}

std::vector<Region> load_geojson(const std::string& path, const std::string& id_property) {
  std::ifstream in(path);
  if (!in) throw InputError("file", "cannot open GeoJSON file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_geojson(buf.str(), id_property);
}

std::string regions_to_geojson(const std::vector<Region>& regions,
                               const std::string& id_property) {
  json features = json::array();
  for (const auto& region : regions) {
    json rings = json::array();
    for (const auto& ring : region.rings) {
      json r = json::array();
      for (const auto& p : ring) r.push_back({p[0], p[1]});
      r.push_back({ring.front()[0], ring.front()[1]});  // close the ring
      rings.push_back(r);
    }
    features.push_back({{"type", "Feature"},
                        {"properties", {{id_property, region.id}}},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", rings}}}});
  }
  json doc = {{"type", "FeatureCollection"}, {"features", features}};
  return doc.dump(2);
}

}  // namespace sfcr
