//! The exact file contract of every input source, printable on demand so a
//! data provider can build a bundle without reading the loader.

/// Names accepted by `schema --source`.
pub const SOURCES: [&str; 14] = [
    "bundle_meta",
    "stations",
    "counts",
    "weather",
    "points_of_interest",
    "motorized",
    "holidays",
    "strava_segments",
    "strava_hexagons",
    "street_graph",
    "planning_areas",
    "snapshots",
    "trips",
    "table",
];

/// The contract text for one source, or `None` for an unknown name.
pub fn contract(source: &str) -> Option<&'static str> {
    let text = match source {
        "bundle_meta" => {
            "bundle_meta.json — bundle metadata (JSON object)\n\
             \n\
             {\n\
               \"study_periods\": [[\"YYYY-MM-DD\", \"YYYY-MM-DD\"], ...],  inclusive date ranges\n\
               \"hex_grid\": {\"origin\": {\"lat\": f, \"lon\": f}, \"cell_area_km2\": f},\n\
               \"city_center\": {\"lat\": f, \"lon\": f}\n\
             }\n\
             \n\
             Every dated observation in the bundle must fall inside one of the\n\
             study periods."
        }
        "stations" => {
            "stations.csv — counting stations\n\
             \n\
             columns: station_id,lat,lon,kind,installed_year\n\
             - station_id: unique string\n\
             - lat, lon: WGS84 decimal degrees\n\
             - kind: long_term | short_term\n\
             - installed_year: integer year, or empty when unknown"
        }
        "counts" => {
            "counts.csv — hourly bicycle counts\n\
             \n\
             columns: station_id,ts,count\n\
             - station_id: must exist in stations.csv\n\
             - ts: YYYY-MM-DDTHH:MM:SS, on a whole hour\n\
             - count: non-negative integer\n\
             \n\
             A station-day enters the daily table only when every hour of the\n\
             aggregation window is present (24 for full_day, 12 for daytime)."
        }
        "weather" => {
            "weather.csv — one row of city-wide weather per date\n\
             \n\
             columns: date,<variable...>\n\
             - date: YYYY-MM-DD, unique\n\
             - every other column is a numeric weather variable; all rows\n\
               carry the same variables\n\
             \n\
             Feature columns are emitted as weather_<variable>."
        }
        "points_of_interest" => {
            "points_of_interest.csv — point features of the city\n\
             \n\
             columns: kind,lat,lon\n\
             - kind: free-form category string (e.g. shop, school)\n\
             - lat, lon: WGS84 decimal degrees\n\
             \n\
             POI counts per category are aggregated over fixed radii around\n\
             each station."
        }
        "motorized" => {
            "motorized.csv — daily motorized-traffic detector readings\n\
             \n\
             columns: detector_id,lat,lon,date,<variable...>\n\
             - detector_id: string; (detector, date) must be unique\n\
             - lat, lon: WGS84 decimal degrees\n\
             - date: YYYY-MM-DD\n\
             - every other column is a numeric reading; all rows carry the\n\
               same variables"
        }
        "holidays" => {
            "holidays.csv — school and public holiday calendar\n\
             \n\
             columns: date,school,public\n\
             - date: YYYY-MM-DD, unique\n\
             - school, public: 0 or 1\n\
             \n\
             Dates absent from the file count as non-holidays."
        }
        "strava_segments" => {
            "strava_segments.csv — daily crowdsourced ride aggregates per street segment\n\
             \n\
             columns: segment_id,date,<variable...>\n\
             - segment_id: must match a feature id in street_graph.geojson;\n\
               (segment, date) must be unique\n\
             - date: YYYY-MM-DD\n\
             - every other column is a numeric aggregate; all rows carry the\n\
               same variables"
        }
        "strava_hexagons" => {
            "strava_hexagons.csv — daily crowdsourced ride aggregates per hexagon cell\n\
             \n\
             columns: q,r,date,<variable...>\n\
             - q, r: integer axial cell coordinates on the grid declared in\n\
               bundle_meta.json; (q, r, date) must be unique\n\
             - date: YYYY-MM-DD\n\
             - every other column is a numeric aggregate; all rows carry the\n\
               same variables"
        }
        "street_graph" => {
            "street_graph.geojson — the street network (GeoJSON FeatureCollection)\n\
             \n\
             one Feature per street segment between two intersections:\n\
             - geometry: LineString with at least two [lon, lat] positions\n\
             - properties.id: unique string\n\
             - properties.bicycle: boolean, whether bicycles may use it\n\
             - properties.maxspeed: posted speed limit in km/h, or null\n\
             \n\
             Segments sharing endpoint coordinates are connected for routing."
        }
        "planning_areas" => {
            "planning_areas.geojson — planning areas (GeoJSON FeatureCollection)\n\
             \n\
             one Feature per area:\n\
             - geometry: Polygon (first ring used) of [lon, lat] positions\n\
             - properties.id: unique string\n\
             - properties.land_use_km2: object mapping land-use kind to km2\n\
             - properties.socio: object mapping survey year to an object of\n\
               numeric socioeconomic indicators; all areas carry the same\n\
               years and indicators"
        }
        "snapshots" => {
            "snapshots.ndjson — bike-share availability snapshots (optional)\n\
             \n\
             one JSON object per line, minute resolution, strictly increasing:\n\
             {\"ts\": \"YYYY-MM-DDTHH:MM:SS\", \"bikes\": [{\"id\": s, \"lat\": f, \"lon\": f}, ...]}\n\
             \n\
             Trips are reconstructed from consecutive snapshots when trips.csv\n\
             is absent: a bike that disappears at one place and reappears at\n\
             another made a trip."
        }
        "trips" => {
            "trips.csv — bike-share trips (optional)\n\
             \n\
             columns: bike_id,origin_lat,origin_lon,destination_lat,destination_lon,\n\
             start,end,routed_distance_m,mean_speed_kmh\n\
             - start, end: YYYY-MM-DDTHH:MM:SS with start < end\n\
             - routed_distance_m, mean_speed_kmh: numeric, or empty when the\n\
               trip has not been routed yet\n\
             \n\
             Route geometry is derived, not stored; trips are re-routed on the\n\
             street graph whenever route shapes are needed."
        }
        "table" => {
            "table.csv + table.manifest.json — the station-day feature table\n\
             \n\
             table.csv columns: station_id,date,<feature...>,target\n\
             - one row per station-day with a valid daily count\n\
             - feature cells are shortest round-trip decimals; empty means\n\
               missing\n\
             - target: the daily bicycle count\n\
             \n\
             table.manifest.json: {\"format_version\": 1, \"window\": ...,\n\
             \"columns\": [{\"name\", \"group\"}...], \"station_kinds\": {id: kind},\n\
             \"n_rows\": n} — column order matches the CSV."
        }
        _ => return None,
    };
    Some(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_source_has_a_contract() {
        for name in SOURCES {
            let text = contract(name).unwrap();
            assert!(text.len() > 40, "{name} contract too thin");
        }
        assert!(contract("no_such_source").is_none());
    }
}
