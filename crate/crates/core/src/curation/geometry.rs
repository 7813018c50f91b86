use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};

pub type Point = (f64, f64);

/// Axis-aligned bounding box in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    pub fn intersects(&self, other: &BBox) -> bool {
        self.min.0 <= other.max.0
            && other.min.0 <= self.max.0
            && self.min.1 <= other.max.1
            && other.min.1 <= self.max.1
    }

    pub fn width(&self) -> f64 {
        self.max.0 - self.min.0
    }

    pub fn height(&self) -> f64 {
        self.max.1 - self.min.1
    }
}

/// Catchment boundary in lon/lat degrees.
///
/// Rings are stored closed (first point repeated at the end). After
/// construction the exterior runs counter-clockwise and holes clockwise, so
/// the interior is always on the left of every edge.
#[derive(Debug, Clone, PartialEq)]
pub struct BasinGeometry {
    pub station_id: String,
    rings: Vec<Vec<Point>>,
}

pub(crate) fn signed_ring_area(ring: &[Point]) -> f64 {
    ring.windows(2)
        .map(|w| w[0].0 * w[1].1 - w[1].0 * w[0].1)
        .sum::<f64>()
        / 2.0
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    fn orient(p: Point, q: Point, r: Point) -> f64 {
        (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0)
    }
    fn on_segment(p: Point, q: Point, r: Point) -> bool {
        r.0 >= p.0.min(q.0) && r.0 <= p.0.max(q.0) && r.1 >= p.1.min(q.1) && r.1 <= p.1.max(q.1)
    }
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

fn ring_self_intersects(ring: &[Point]) -> bool {
    let n = ring.len() - 1;
    for i in 0..n {
        for j in i + 1..n {
            // Adjacent edges share a vertex by construction.
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(ring[i], ring[i + 1], ring[j], ring[j + 1]) {
                return true;
            }
        }
    }
    false
}

impl BasinGeometry {
    /// Validates and normalizes the rings: open rings are closed, consecutive
    /// duplicate vertices dropped, and orientation fixed.
    pub fn new(station_id: impl Into<String>, rings: Vec<Vec<Point>>) -> Result<Self> {
        let station_id = station_id.into();
        let bad = |reason: String| Error::Geometry {
            station_id: station_id.clone(),
            reason,
        };
        if rings.is_empty() {
            return Err(bad("no rings".into()));
        }
        let mut out = Vec::with_capacity(rings.len());
        for (k, ring) in rings.into_iter().enumerate() {
            if let Some(p) = ring.iter().find(|p| !p.0.is_finite() || !p.1.is_finite()) {
                return Err(bad(format!("ring {k} has non-finite vertex {p:?}")));
            }
            let mut r: Vec<Point> = Vec::with_capacity(ring.len() + 1);
            for p in ring {
                if r.last() != Some(&p) {
                    r.push(p);
                }
            }
            if r.len() > 1 && r.first() == r.last() {
                r.pop();
            }
            if r.len() < 3 {
                return Err(bad(format!("ring {k} has fewer than 3 distinct points")));
            }
            r.push(r[0]);
            let area = signed_ring_area(&r);
            if area == 0.0 {
                return Err(bad(format!("ring {k} has zero area")));
            }
            let want_ccw = k == 0;
            if (area > 0.0) != want_ccw {
                r.reverse();
            }
            out.push(r);
        }
        if ring_self_intersects(&out[0]) {
            return Err(bad("exterior ring self-intersects".into()));
        }
        let g = BasinGeometry {
            station_id: station_id.clone(),
            rings: out,
        };
        if !(g.area() > 0.0) {
            return Err(bad("holes cover the exterior".into()));
        }
        Ok(g)
    }

    pub fn rings(&self) -> &[Vec<Point>] {
        &self.rings
    }

    pub fn exterior(&self) -> &[Point] {
        &self.rings[0]
    }

    /// Planar shoelace area of exterior minus holes, in squared degrees.
    pub fn area(&self) -> f64 {
        self.rings.iter().map(|r| signed_ring_area(r)).sum()
    }

    pub fn bbox(&self) -> BBox {
        let ext = self.exterior();
        let mut b = BBox {
            min: ext[0],
            max: ext[0],
        };
        for p in ext {
            b.min.0 = b.min.0.min(p.0);
            b.min.1 = b.min.1.min(p.1);
            b.max.0 = b.max.0.max(p.0);
            b.max.1 = b.max.1.max(p.1);
        }
        b
    }

    /// Even-odd containment over all rings. Points exactly on the boundary
    /// may go either way.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for ring in &self.rings {
            for w in ring.windows(2) {
                let (a, b) = (w[0], w[1]);
                if (a.1 > p.1) != (b.1 > p.1) {
                    let x = a.0 + (p.1 - a.1) * (b.0 - a.0) / (b.1 - a.1);
                    if p.0 < x {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }

    pub(crate) fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.rings
            .iter()
            .flat_map(|r| r.windows(2).map(|w| (w[0], w[1])))
    }
}

/// Planar area of a basin polygon in squared degrees.
pub fn polygon_area(g: &BasinGeometry) -> f64 {
    g.area()
}

fn parse_ring(v: &Value) -> Option<Vec<Point>> {
    v.as_array()?
        .iter()
        .map(|p| {
            let c = p.as_array()?;
            Some((c.first()?.as_f64()?, c.get(1)?.as_f64()?))
        })
        .collect()
}

/// Parses a GeoJSON FeatureCollection of `Polygon` features carrying a
/// `station_id` property.
pub fn parse_geojson(text: &str, path: &Path) -> Result<Vec<BasinGeometry>> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::parse(path, e.to_string()))?;
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::parse(path, "not a FeatureCollection"))?;
    let mut out = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        let id = f
            .pointer("/properties/station_id")
            .and_then(|v| v.as_str().map(str::to_string).or_else(|| v.as_i64().map(|n| n.to_string())))
            .ok_or_else(|| Error::parse(path, format!("feature {i} has no station_id")))?;
        let geom = f
            .get("geometry")
            .ok_or_else(|| Error::parse(path, format!("feature {id} has no geometry")))?;
        if geom.get("type").and_then(Value::as_str) != Some("Polygon") {
            return Err(Error::parse(path, format!("feature {id}: only Polygon geometries are supported")));
        }
        let rings = geom
            .get("coordinates")
            .and_then(Value::as_array)
            .and_then(|rs| rs.iter().map(parse_ring).collect::<Option<Vec<_>>>())
            .ok_or_else(|| Error::parse(path, format!("feature {id}: malformed coordinates")))?;
        out.push(BasinGeometry::new(id, rings)?);
    }
    Ok(out)
}

pub fn read_geojson(path: &Path) -> Result<Vec<BasinGeometry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_geojson(&text, path)
}

pub fn to_geojson(geoms: &[BasinGeometry]) -> Value {
    let features: Vec<Value> = geoms
        .iter()
        .map(|g| {
            let rings: Vec<Value> = g
                .rings()
                .iter()
                .map(|r| Value::from(r.iter().map(|p| Value::from(vec![p.0, p.1])).collect::<Vec<_>>()))
                .collect();
            serde_json::json!({
                "type": "Feature",
                "properties": { "station_id": g.station_id },
                "geometry": { "type": "Polygon", "coordinates": rings },
            })
        })
        .collect();
    serde_json::json!({ "type": "FeatureCollection", "features": features })
}
