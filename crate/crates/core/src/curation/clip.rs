//! Intersection area of two polygons with holes.
//!
//! Both boundaries are subdivided at every mutual intersection point. The
//! boundary of `A ∩ B` is then the set of sub-edges of `A` lying inside `B`,
//! the sub-edges of `B` lying inside `A`, and shared collinear sub-edges whose
//! two copies run in the same direction. Summing the shoelace terms of those
//! sub-edges gives the intersection area without building the clipped polygon.

use super::geometry::{BasinGeometry, Point};
use crate::error::Result;

fn sub(a: Point, b: Point) -> Point {
    (a.0 - b.0, a.1 - b.1)
}

fn cross(a: Point, b: Point) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

fn dot(a: Point, b: Point) -> f64 {
    a.0 * b.0 + a.1 * b.1
}

fn lerp(p: Point, q: Point, t: f64) -> Point {
    (p.0 + (q.0 - p.0) * t, p.1 + (q.1 - p.1) * t)
}

/// Where `p` sits relative to the boundary of a polygon.
enum BoundaryHit {
    Off,
    /// On an edge running the same way as the probe edge.
    Aligned,
    /// On an edge running the opposite way.
    Opposed,
}

struct Tolerance {
    eps: f64,
}

impl Tolerance {
    fn new(a: &BasinGeometry, b: &BasinGeometry) -> Self {
        let (ba, bb) = (a.bbox(), b.bbox());
        let scale = [ba.min.0, ba.min.1, ba.max.0, ba.max.1, bb.min.0, bb.min.1, bb.max.0, bb.max.1]
            .iter()
            .fold(1.0f64, |m, v| m.max(v.abs()));
        Tolerance { eps: 1e-11 * scale }
    }
}

/// Parameters in (0, 1) along `p -> q` where the boundary of `other` touches it.
fn split_params(p: Point, q: Point, other: &BasinGeometry, tol: &Tolerance) -> Vec<f64> {
    let r = sub(q, p);
    let rr = dot(r, r);
    let len = rr.sqrt();
    let mut ts = vec![0.0, 1.0];
    for (a, b) in other.edges() {
        let s = sub(b, a);
        let denom = cross(r, s);
        let qp = sub(a, p);
        let slen = dot(s, s).sqrt();
        if (denom / (len * slen)).abs() > 1e-12 {
            let t = cross(qp, s) / denom;
            let u = cross(qp, r) / denom;
            let tt = tol.eps / len;
            let ut = tol.eps / slen;
            if t > -tt && t < 1.0 + tt && u > -ut && u < 1.0 + ut {
                ts.push(t.clamp(0.0, 1.0));
            }
        } else if (cross(qp, r) / len).abs() <= tol.eps {
            // Collinear: split at the projections of the other edge's endpoints.
            for e in [a, b] {
                let t = dot(sub(e, p), r) / rr;
                if t > 0.0 && t < 1.0 {
                    ts.push(t);
                }
            }
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|x, y| (*x - *y).abs() * len <= tol.eps);
    ts
}

fn boundary_hit(m: Point, dir: Point, other: &BasinGeometry, tol: &Tolerance) -> BoundaryHit {
    for (a, b) in other.edges() {
        let s = sub(b, a);
        let ss = dot(s, s);
        let t = dot(sub(m, a), s) / ss;
        if !(0.0..=1.0).contains(&t) {
            continue;
        }
        let foot = lerp(a, b, t);
        let d = sub(m, foot);
        if dot(d, d).sqrt() > tol.eps {
            continue;
        }
        let dlen = dot(dir, dir).sqrt();
        let slen = ss.sqrt();
        // Only collinear edges count; a transversal crossing at the midpoint
        // cannot happen because edges are split at every crossing.
        if (cross(dir, s) / (dlen * slen)).abs() > 1e-9 {
            continue;
        }
        return if dot(dir, s) > 0.0 {
            BoundaryHit::Aligned
        } else {
            BoundaryHit::Opposed
        };
    }
    BoundaryHit::Off
}

/// Twice the signed area contributed by the boundary of `this` lying inside
/// `other`. Shared boundary is counted only when `count_shared` is set.
fn contribution(this: &BasinGeometry, other: &BasinGeometry, count_shared: bool, tol: &Tolerance) -> f64 {
    let ob = other.bbox();
    let mut acc = 0.0;
    for (p, q) in this.edges() {
        let eb_min = (p.0.min(q.0), p.1.min(q.1));
        let eb_max = (p.0.max(q.0), p.1.max(q.1));
        let touches = eb_min.0 <= ob.max.0 + tol.eps
            && eb_max.0 >= ob.min.0 - tol.eps
            && eb_min.1 <= ob.max.1 + tol.eps
            && eb_max.1 >= ob.min.1 - tol.eps;
        if !touches {
            continue;
        }
        let ts = split_params(p, q, other, tol);
        let dir = sub(q, p);
        for w in ts.windows(2) {
            let (s0, s1) = (lerp(p, q, w[0]), lerp(p, q, w[1]));
            let mid = lerp(p, q, 0.5 * (w[0] + w[1]));
            let keep = match boundary_hit(mid, dir, other, tol) {
                BoundaryHit::Aligned => count_shared,
                BoundaryHit::Opposed => false,
                BoundaryHit::Off => other.contains(mid),
            };
            if keep {
                acc += cross(s0, s1);
            }
        }
    }
    acc
}

/// Planar area of `a ∩ b` in squared degrees.
pub fn intersection_area(a: &BasinGeometry, b: &BasinGeometry) -> f64 {
    if !a.bbox().intersects(&b.bbox()) {
        return 0.0;
    }
    let tol = Tolerance::new(a, b);
    let twice = contribution(a, b, true, &tol) + contribution(b, a, false, &tol);
    (twice / 2.0).clamp(0.0, a.area().min(b.area()))
}

/// Intersection area normalized by the smaller of the two polygon areas.
pub fn overlap_fraction(a: &BasinGeometry, b: &BasinGeometry) -> Result<f64> {
    let min_area = a.area().min(b.area());
    Ok((intersection_area(a, b) / min_area).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(id: &str, x0: f64, y0: f64, w: f64, h: f64) -> BasinGeometry {
        BasinGeometry::new(id, vec![vec![(x0, y0), (x0 + w, y0), (x0 + w, y0 + h), (x0, y0 + h)]]).unwrap()
    }

    #[test]
    fn identical_and_disjoint() {
        let a = rect("a", 0.0, 0.0, 1.0, 1.0);
        assert!((overlap_fraction(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let far = rect("b", 5.0, 5.0, 1.0, 1.0);
        assert_eq!(overlap_fraction(&a, &far).unwrap(), 0.0);
        let touching = rect("c", 1.0, 0.0, 1.0, 1.0);
        assert!(overlap_fraction(&a, &touching).unwrap().abs() < 1e-12);
    }

    #[test]
    fn shifted_square() {
        let a = rect("a", 0.0, 0.0, 1.0, 1.0);
        let b = rect("b", 0.5, 0.0, 1.0, 1.0);
        assert!((intersection_area(&a, &b) - 0.5).abs() < 1e-12);
        assert!((overlap_fraction(&a, &b).unwrap() - 0.5).abs() < 1e-12);
        assert!((overlap_fraction(&b, &a).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn nested_and_holes() {
        let outer = rect("o", 0.0, 0.0, 4.0, 4.0);
        let inner = rect("i", 1.0, 1.0, 1.0, 1.0);
        assert!((overlap_fraction(&outer, &inner).unwrap() - 1.0).abs() < 1e-12);
        let holed = BasinGeometry::new(
            "h",
            vec![
                vec![(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)],
                vec![(1.0, 1.0), (3.0, 1.0), (3.0, 3.0), (1.0, 3.0)],
            ],
        )
        .unwrap();
        // Inner square sits inside the hole except for nothing: fully in the hole.
        let in_hole = rect("x", 1.5, 1.5, 1.0, 1.0);
        assert!(intersection_area(&holed, &in_hole).abs() < 1e-12);
        // Straddles the hole boundary: half inside the ring band.
        let straddle = rect("y", 0.5, 0.5, 1.0, 1.0);
        assert!((intersection_area(&holed, &straddle) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn concave_l_shape() {
        // L-shape: 2x2 square minus its upper-right unit square.
        let l = BasinGeometry::new(
            "l",
            vec![vec![(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)]],
        )
        .unwrap();
        let probe = rect("p", 0.5, 0.5, 1.0, 1.0);
        assert!((intersection_area(&l, &probe) - 0.75).abs() < 1e-12);
        let notch = rect("n", 1.0, 1.0, 1.0, 1.0);
        assert!(intersection_area(&l, &notch).abs() < 1e-12);
    }

    #[test]
    fn triangles() {
        let t1 = BasinGeometry::new("t1", vec![vec![(0.0, 0.0), (2.0, 0.0), (0.0, 2.0)]]).unwrap();
        let t2 = BasinGeometry::new("t2", vec![vec![(0.0, 0.0), (2.0, 0.0), (2.0, 2.0)]]).unwrap();
        // Shared region is the triangle (0,0),(2,0),(1,1): area 1.
        assert!((intersection_area(&t1, &t2) - 1.0).abs() < 1e-12);
        let sq = rect("s", 0.0, 0.0, 1.0, 1.0);
        // Unit square fully inside t1 (x + y <= 2).
        assert!((intersection_area(&t1, &sq) - 1.0).abs() < 1e-12);
    }
}
