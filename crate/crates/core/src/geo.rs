//! Spatial primitives: great-circle distance, polyline geometry, and a
//! flat-top hexagonal grid addressed by axial coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in metres.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A WGS84 coordinate in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        GeoPoint { lat, lon }
    }
}

/// Great-circle distance in metres on a sphere of radius [`EARTH_RADIUS_M`].
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let s = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * s.sqrt().min(1.0).asin()
}

/// Total length of a polyline in metres.
pub fn polyline_length_m(points: &[GeoPoint]) -> f64 {
    points.windows(2).map(|w| haversine_m(w[0], w[1])).sum()
}

/// The point at half the cumulative length of a polyline, interpolating
/// linearly in latitude/longitude inside the segment that contains it.
/// A single-point or zero-length polyline yields its first point.
pub fn polyline_midpoint(points: &[GeoPoint]) -> Result<GeoPoint> {
    if points.is_empty() {
        return Err(Error::data("polyline midpoint of empty geometry"));
    }
    let total = polyline_length_m(points);
    if total == 0.0 {
        return Ok(points[0]);
    }
    let half = total / 2.0;
    let mut acc = 0.0;
    for w in points.windows(2) {
        let seg = haversine_m(w[0], w[1]);
        if acc + seg >= half && seg > 0.0 {
            let t = (half - acc) / seg;
            return Ok(GeoPoint {
                lat: w[0].lat + t * (w[1].lat - w[0].lat),
                lon: w[0].lon + t * (w[1].lon - w[0].lon),
            });
        }
        acc += seg;
    }
    Ok(*points.last().unwrap())
}

/// Resample a polyline so consecutive points are at most `step_m` apart.
/// Original vertices are kept; intermediates interpolate linearly.
pub fn densify(points: &[GeoPoint], step_m: f64) -> Vec<GeoPoint> {
    if points.len() < 2 || step_m <= 0.0 {
        return points.to_vec();
    }
    let mut out = vec![points[0]];
    for w in points.windows(2) {
        let seg = haversine_m(w[0], w[1]);
        let n = (seg / step_m).ceil().max(1.0) as usize;
        for k in 1..=n {
            let t = k as f64 / n as f64;
            out.push(GeoPoint {
                lat: w[0].lat + t * (w[1].lat - w[0].lat),
                lon: w[0].lon + t * (w[1].lon - w[0].lon),
            });
        }
    }
    out
}

/// True if any densified point of the geometry lies within `radius_m` of
/// `center`. Step for densification is fixed at 25 m, fine enough relative to
/// the smallest radius used anywhere in the engine.
pub fn geometry_within_radius(points: &[GeoPoint], center: GeoPoint, radius_m: f64) -> bool {
    densify(points, 25.0)
        .iter()
        .any(|p| haversine_m(*p, center) <= radius_m)
}

/// Area of a simple polygon in km², via the shoelace formula on a local
/// equirectangular projection around the polygon's mean latitude. The ring
/// may be given open or closed.
pub fn polygon_area_km2(ring: &[GeoPoint]) -> Result<f64> {
    let mut pts = ring.to_vec();
    if pts.len() >= 2 && pts.first() == pts.last() {
        pts.pop();
    }
    if pts.len() < 3 {
        return Err(Error::data("polygon needs at least three distinct points"));
    }
    let lat0 = (pts.iter().map(|p| p.lat).sum::<f64>() / pts.len() as f64).to_radians();
    let proj = |p: &GeoPoint| {
        (
            EARTH_RADIUS_M * p.lon.to_radians() * lat0.cos(),
            EARTH_RADIUS_M * p.lat.to_radians(),
        )
    };
    let mut twice_area = 0.0;
    for i in 0..pts.len() {
        let (x1, y1) = proj(&pts[i]);
        let (x2, y2) = proj(&pts[(i + 1) % pts.len()]);
        twice_area += x1 * y2 - x2 * y1;
    }
    Ok(twice_area.abs() / 2.0 / 1e6)
}

/// Ray-casting point-in-polygon test in plain lat/lon coordinates. The ring
/// may be given open or closed; points exactly on an edge count as inside on
/// one side only, which is disambiguated downstream by the nearest-area
/// fallback.
pub fn point_in_polygon(p: GeoPoint, ring: &[GeoPoint]) -> bool {
    let mut pts = ring;
    if pts.len() >= 2 && pts.first() == pts.last() {
        pts = &pts[..pts.len() - 1];
    }
    if pts.len() < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = pts.len() - 1;
    for i in 0..pts.len() {
        let (a, b) = (pts[i], pts[j]);
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let lon_at = a.lon + (p.lat - a.lat) / (b.lat - a.lat) * (b.lon - a.lon);
            if p.lon < lon_at {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Distance from a point to the nearest vertex of a densified ring, used as
/// the nearest-area fallback when a point sits in no polygon.
pub fn distance_to_ring_m(p: GeoPoint, ring: &[GeoPoint]) -> f64 {
    densify(ring, 25.0)
        .iter()
        .map(|v| haversine_m(p, *v))
        .fold(f64::INFINITY, f64::min)
}

/// A piece of street between two intersections, with its geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreetSegment {
    pub id: String,
    pub polyline: Vec<GeoPoint>,
    pub length_m: f64,
}

impl StreetSegment {
    /// Build a segment, measuring its length from the polyline.
    pub fn new(id: impl Into<String>, polyline: Vec<GeoPoint>) -> Result<Self> {
        let id = id.into();
        if polyline.len() < 2 {
            return Err(Error::data(format!(
                "street segment {id} needs at least two points"
            )));
        }
        let length_m = polyline_length_m(&polyline);
        Ok(StreetSegment {
            id,
            polyline,
            length_m,
        })
    }

    /// Build a segment with a declared length, which must agree with the
    /// polyline within 1e-6 relative tolerance.
    pub fn with_length(id: impl Into<String>, polyline: Vec<GeoPoint>, length_m: f64) -> Result<Self> {
        let seg = StreetSegment::new(id, polyline)?;
        let measured = seg.length_m;
        let scale = measured.abs().max(1.0);
        if (length_m - measured).abs() > 1e-6 * scale {
            return Err(Error::data(format!(
                "street segment {}: declared length {length_m} m disagrees with geometry {measured} m",
                seg.id
            )));
        }
        Ok(StreetSegment { length_m, ..seg })
    }
}

/// The point at half a segment's cumulative length.
pub fn segment_midpoint(segment: &StreetSegment) -> GeoPoint {
    // A segment always has >= 2 points, so the midpoint exists.
    polyline_midpoint(&segment.polyline).expect("segment polyline is never empty")
}

/// Axial address of a flat-top hexagon cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HexCell {
    pub q: i32,
    pub r: i32,
}

/// A flat-top hexagonal grid laid over a local equirectangular projection
/// centred on `origin`. Cell size is fixed by area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HexGrid {
    pub origin: GeoPoint,
    pub cell_area_km2: f64,
}

impl HexGrid {
    pub fn new(origin: GeoPoint, cell_area_km2: f64) -> Result<Self> {
        if !(cell_area_km2 > 0.0) {
            return Err(Error::config("hex cell area must be positive"));
        }
        Ok(HexGrid {
            origin,
            cell_area_km2,
        })
    }

    /// Hexagon side length in metres: area = (3√3/2)·s².
    pub fn side_m(&self) -> f64 {
        (2.0 * self.cell_area_km2 * 1e6 / (3.0 * 3f64.sqrt())).sqrt()
    }

    fn to_local(&self, p: GeoPoint) -> (f64, f64) {
        let x =
            (p.lon - self.origin.lon).to_radians() * self.origin.lat.to_radians().cos()
                * EARTH_RADIUS_M;
        let y = (p.lat - self.origin.lat).to_radians() * EARTH_RADIUS_M;
        (x, y)
    }

    fn from_local(&self, x: f64, y: f64) -> GeoPoint {
        let lat = self.origin.lat + (y / EARTH_RADIUS_M).to_degrees();
        let lon = self.origin.lon
            + (x / (EARTH_RADIUS_M * self.origin.lat.to_radians().cos())).to_degrees();
        GeoPoint { lat, lon }
    }

    /// The cell containing a point, via fractional axial coordinates and cube
    /// rounding.
    pub fn cell_of(&self, p: GeoPoint) -> HexCell {
        let s = self.side_m();
        let (x, y) = self.to_local(p);
        let qf = (2.0 / 3.0) * x / s;
        let rf = (-x / 3.0 + 3f64.sqrt() / 3.0 * y) / s;
        cube_round(qf, rf)
    }

    /// Geographic centre of a cell.
    pub fn center(&self, c: HexCell) -> GeoPoint {
        let s = self.side_m();
        let x = s * 1.5 * f64::from(c.q);
        let y = s * 3f64.sqrt() * (f64::from(c.r) + f64::from(c.q) / 2.0);
        self.from_local(x, y)
    }

    /// The six axially adjacent cells, in a fixed order.
    pub fn neighbors(c: HexCell) -> [HexCell; 6] {
        const DIRS: [(i32, i32); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];
        DIRS.map(|(dq, dr)| HexCell {
            q: c.q + dq,
            r: c.r + dr,
        })
    }
}

fn cube_round(qf: f64, rf: f64) -> HexCell {
    let xf = qf;
    let zf = rf;
    let yf = -xf - zf;
    let mut x = xf.round();
    let mut z = zf.round();
    let y = yf.round();
    let dx = (x - xf).abs();
    let dy = (y - yf).abs();
    let dz = (z - zf).abs();
    if dx > dy && dx > dz {
        x = -y - z;
    } else if dy <= dz {
        z = -x - y;
    }
    HexCell {
        q: x as i32,
        r: z as i32,
    }
}
