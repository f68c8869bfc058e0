//! Candidate quadrilaterals from a binary image.
//!
//! Every 4-connected component of either polarity that stays clear of the
//! image border is a candidate. Its outer boundary is taken as the crack
//! points between the component and its exterior (pixel-center coordinates,
//! so boundary points sit on half-integers). A quad is fitted to that
//! boundary from four extreme hull points, each side is refined by a total
//! least-squares line fit, and the corners are the intersections of
//! neighbouring lines.

use nalgebra::{Matrix2, Vector2};

use crate::preprocess::BinaryImage;
use crate::projection::Pixel2D;

/// Corners ordered counter-clockwise as seen on screen (rows grow downward).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub corners: [Pixel2D; 4],
}

impl Quad {
    pub fn area(&self) -> f64 {
        signed_area(&self.corners).abs()
    }

    /// Largest `|cos|` over the four interior angles.
    pub fn max_abs_cos(&self) -> f64 {
        (0..4)
            .map(|k| {
                let p = v2(&self.corners[k]);
                let a = v2(&self.corners[(k + 3) % 4]) - p;
                let b = v2(&self.corners[(k + 1) % 4]) - p;
                (a.dot(&b) / (a.norm() * b.norm())).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_strictly_convex(&self) -> bool {
        let c = &self.corners;
        let signs: Vec<f64> = (0..4)
            .map(|k| {
                let a = v2(&c[(k + 1) % 4]) - v2(&c[k]);
                let b = v2(&c[(k + 2) % 4]) - v2(&c[(k + 1) % 4]);
                a.x * b.y - a.y * b.x
            })
            .collect();
        signs.iter().all(|&s| s > 0.0) || signs.iter().all(|&s| s < 0.0)
    }
}

fn v2(p: &Pixel2D) -> Vector2<f64> {
    Vector2::new(p.u, p.v)
}

/// Shoelace sum over (u, v). Negative for on-screen counter-clockwise order.
pub(crate) fn signed_area(c: &[Pixel2D; 4]) -> f64 {
    (0..4)
        .map(|k| {
            let (a, b) = (c[k], c[(k + 1) % 4]);
            a.u * b.v - b.u * a.v
        })
        .sum::<f64>()
        / 2.0
}

struct Component {
    bbox: [usize; 4], // u0, v0, u1, v1 inclusive
    pixels: usize,
    touches_border: bool,
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// Label 4-connected same-valued regions. Returns a dense label per pixel.
fn label_components(img: &BinaryImage) -> (Vec<u32>, Vec<Component>) {
    let (w, h) = (img.width(), img.height());
    let bits = img.bits();
    let mut parent: Vec<u32> = (0..(w * h) as u32).collect();
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            if u > 0 && bits[i - 1] == bits[i] {
                union(&mut parent, i as u32, (i - 1) as u32);
            }
            if v > 0 && bits[i - w] == bits[i] {
                union(&mut parent, i as u32, (i - w) as u32);
            }
        }
    }
    let mut dense = vec![u32::MAX; w * h];
    let mut labels = vec![0u32; w * h];
    let mut comps: Vec<Component> = Vec::new();
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            let root = find(&mut parent, i as u32) as usize;
            if dense[root] == u32::MAX {
                dense[root] = comps.len() as u32;
                comps.push(Component { bbox: [u, v, u, v], pixels: 0, touches_border: false });
            }
            let l = dense[root];
            labels[i] = l;
            let c = &mut comps[l as usize];
            c.bbox[0] = c.bbox[0].min(u);
            c.bbox[1] = c.bbox[1].min(v);
            c.bbox[2] = c.bbox[2].max(u);
            c.bbox[3] = c.bbox[3].max(v);
            c.pixels += 1;
            c.touches_border |= u == 0 || v == 0 || u == w - 1 || v == h - 1;
        }
    }
    (labels, comps)
}

/// Crack points between component `label` and its exterior.
fn outer_boundary(labels: &[u32], width: usize, label: u32, bbox: [usize; 4]) -> Vec<Vector2<f64>> {
    // Padded box; the caller guarantees the component does not touch the image border.
    let (u0, v0) = (bbox[0] - 1, bbox[1] - 1);
    let (bw, bh) = (bbox[2] - bbox[0] + 3, bbox[3] - bbox[1] + 3);
    let inside = |bu: usize, bv: usize| labels[(v0 + bv) * width + u0 + bu] == label;
    let mut exterior = vec![false; bw * bh];
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for bu in 0..bw {
        stack.push((bu, 0));
        stack.push((bu, bh - 1));
    }
    for bv in 0..bh {
        stack.push((0, bv));
        stack.push((bw - 1, bv));
    }
    // Exterior is 8-connected, dual to the 4-connected component.
    while let Some((bu, bv)) = stack.pop() {
        let k = bv * bw + bu;
        if exterior[k] || inside(bu, bv) {
            continue;
        }
        exterior[k] = true;
        for dv in -1i64..=1 {
            for du in -1i64..=1 {
                let (nu, nv) = (bu as i64 + du, bv as i64 + dv);
                if nu >= 0 && nv >= 0 && (nu as usize) < bw && (nv as usize) < bh {
                    let nk = nv as usize * bw + nu as usize;
                    if !exterior[nk] {
                        stack.push((nu as usize, nv as usize));
                    }
                }
            }
        }
    }
    let mut points = Vec::new();
    for bv in 1..bh - 1 {
        for bu in 1..bw - 1 {
            if !inside(bu, bv) {
                continue;
            }
            let (pu, pv) = ((u0 + bu) as f64, (v0 + bv) as f64);
            for (du, dv) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (nu, nv) = ((bu as i64 + du) as usize, (bv as i64 + dv) as usize);
                if exterior[nv * bw + nu] {
                    points.push(Vector2::new(pu + du as f64 * 0.5, pv + dv as f64 * 0.5));
                }
            }
        }
    }
    points
}

fn cross(o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Andrew's monotone chain; counter-clockwise in (u, v) math orientation.
fn convex_hull(points: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
    let mut pts: Vec<Vector2<f64>> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vector2<f64>> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vector2<f64>>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for p in iter {
            while hull.len() >= start + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

fn polygon_area(poly: &[Vector2<f64>]) -> f64 {
    let n = poly.len();
    (0..n).map(|k| poly[k].x * poly[(k + 1) % n].y - poly[(k + 1) % n].x * poly[k].y).sum::<f64>().abs()
        / 2.0
}

/// Four extreme hull points, in hull order.
fn extreme_corners(hull: &[Vector2<f64>]) -> Option<[Vector2<f64>; 4]> {
    let centroid = hull.iter().sum::<Vector2<f64>>() / hull.len() as f64;
    let far = |from: &Vector2<f64>| {
        hull.iter().enumerate().max_by(|a, b| (a.1 - from).norm_squared().total_cmp(&(b.1 - from).norm_squared()))
    };
    let (ia, a) = far(&centroid)?;
    let (ic, c) = far(a)?;
    let mut best_pos = (0.0, None);
    let mut best_neg = (0.0, None);
    for (k, p) in hull.iter().enumerate() {
        let s = cross(a, c, p);
        if s > best_pos.0 {
            best_pos = (s, Some(k));
        }
        if s < best_neg.0 {
            best_neg = (s, Some(k));
        }
    }
    let (ib, id) = (best_pos.1?, best_neg.1?);
    let mut idx = [ia, ib, ic, id];
    idx.sort_unstable();
    if idx.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    // Thin aliased quads can fool the diagonal test; move each corner to the
    // hull vertex between its neighbours that maximizes the enclosed area.
    let n = hull.len();
    let area = |idx: &[usize; 4]| polygon_area(&idx.map(|k| hull[k]));
    let mut best = area(&idx);
    let mut improved = true;
    while improved {
        improved = false;
        for j in 0..4 {
            let (prev, next) = (idx[(j + 3) % 4], idx[(j + 1) % 4]);
            let mut k = (prev + 1) % n;
            while k != next {
                let mut trial = idx;
                trial[j] = k;
                let a = area(&trial);
                if a > best + 1e-9 {
                    best = a;
                    idx = trial;
                    improved = true;
                }
                k = (k + 1) % n;
            }
        }
    }
    idx.sort_unstable();
    Some(idx.map(|k| hull[k]))
}

/// Total least-squares line: (point on line, unit normal).
fn fit_line(points: &[Vector2<f64>]) -> Option<(Vector2<f64>, Vector2<f64>)> {
    if points.len() < 2 {
        return None;
    }
    let mean = points.iter().sum::<Vector2<f64>>() / points.len() as f64;
    let mut cov = Matrix2::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let k = if eig.eigenvalues[0] < eig.eigenvalues[1] { 0 } else { 1 };
    let normal = eig.eigenvectors.column(k).into_owned();
    Some((mean, normal.normalize()))
}

fn intersect(l1: &(Vector2<f64>, Vector2<f64>), l2: &(Vector2<f64>, Vector2<f64>)) -> Option<Vector2<f64>> {
    // n1.x = n1.p1, n2.x = n2.p2
    let m = Matrix2::new(l1.1.x, l1.1.y, l2.1.x, l2.1.y);
    let rhs = Vector2::new(l1.1.dot(&l1.0), l2.1.dot(&l2.0));
    let det = m.determinant();
    if det.abs() < 1e-9 {
        return None;
    }
    m.try_inverse().map(|inv| inv * rhs)
}

fn segment_distance(p: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (a + ab * t - p).norm()
}

/// Fraction of boundary points that must sit on the fitted quad.
const MIN_INLIER_FRACTION: f64 = 0.85;
/// Boundary points farther than this from their side line are outliers.
const INLIER_DISTANCE: f64 = 1.0;

fn fit_quad(boundary: &[Vector2<f64>]) -> Option<[Vector2<f64>; 4]> {
    let hull = convex_hull(boundary);
    if hull.len() < 4 {
        return None;
    }
    let init = extreme_corners(&hull)?;
    let init_area = polygon_area(&init);
    if init_area <= 0.0 || polygon_area(&hull) > 1.15 * init_area + 2.0 {
        return None;
    }

    let mut sides: [Vec<Vector2<f64>>; 4] = Default::default();
    for p in boundary {
        let (k, _) = (0..4)
            .map(|k| (k, segment_distance(p, &init[k], &init[(k + 1) % 4])))
            .min_by(|a, b| a.1.total_cmp(&b.1))?;
        sides[k].push(*p);
    }
    let mut lines = Vec::with_capacity(4);
    for (k, pts) in sides.iter().enumerate() {
        let (a, b) = (init[k], init[(k + 1) % 4]);
        let margin = (0.1 * (b - a).norm()).max(1.0);
        let core: Vec<Vector2<f64>> = pts
            .iter()
            .filter(|p| (*p - a).norm() > margin && (*p - b).norm() > margin)
            .copied()
            .collect();
        let core = if core.len() >= 3 { core } else { pts.clone() };
        let line = fit_line(&core)?;
        let inliers: Vec<Vector2<f64>> = core
            .iter()
            .filter(|p| (*p - line.0).dot(&line.1).abs() <= INLIER_DISTANCE)
            .copied()
            .collect();
        let line = if inliers.len() >= 3 && inliers.len() < core.len() { fit_line(&inliers)? } else { line };
        lines.push(line);
    }
    let mut inliers = 0usize;
    for (k, pts) in sides.iter().enumerate() {
        let (c, n) = lines[k];
        inliers += pts.iter().filter(|p| (*p - c).dot(&n).abs() <= 1.5).count();
    }
    if (inliers as f64) < MIN_INLIER_FRACTION * boundary.len() as f64 {
        return None;
    }
    let mut corners = [Vector2::zeros(); 4];
    for k in 0..4 {
        corners[k] = intersect(&lines[(k + 3) % 4], &lines[k])?;
    }
    Some(corners)
}

pub fn find_quads(img: &BinaryImage, min_area: f64, max_cos: f64) -> Vec<Quad> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Vec::new();
    }
    let (labels, comps) = label_components(img);
    let mut quads = Vec::new();
    for (label, comp) in comps.iter().enumerate() {
        let [u0, v0, u1, v1] = comp.bbox;
        let (bw, bh) = ((u1 - u0 + 1) as f64, (v1 - v0 + 1) as f64);
        if comp.touches_border || comp.pixels < 8 || bw < 3.0 || bh < 3.0 || (bw + 1.0) * (bh + 1.0) < min_area {
            continue;
        }
        let boundary = outer_boundary(&labels, w, label as u32, comp.bbox);
        if boundary.len() < 12 {
            continue;
        }
        let Some(corners) = fit_quad(&boundary) else { continue };
        // Corners must stay near the component.
        let slack = 2.0;
        if corners.iter().any(|c| {
            c.x < u0 as f64 - slack || c.x > u1 as f64 + slack || c.y < v0 as f64 - slack || c.y > v1 as f64 + slack
        }) {
            continue;
        }
        let mut quad = Quad { corners: corners.map(|c| Pixel2D::new(c.x, c.y)) };
        if signed_area(&quad.corners) > 0.0 {
            quad.corners.reverse();
        }
        if quad.is_strictly_convex() && quad.area() >= min_area && quad.max_abs_cos() <= max_cos {
            quads.push(quad);
        }
    }
    quads
}
