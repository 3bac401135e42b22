use crate::error::{Error, Result};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

fn check(lat: f64, lon: f64) -> Result<()> {
    if (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon) {
        Ok(())
    } else {
        Err(Error::CoordinateOutOfRange { lat, lon })
    }
}

/// Great-circle distance in meters between two `(lat, lon)` points in degrees.
pub fn haversine(p1: (f64, f64), p2: (f64, f64)) -> Result<f64> {
    check(p1.0, p1.1)?;
    check(p2.0, p2.1)?;
    Ok(haversine_unchecked(p1, p2))
}

/// [`haversine`] without the range check, for inner loops over validated data.
#[inline]
pub fn haversine_unchecked(p1: (f64, f64), p2: (f64, f64)) -> f64 {
    let (phi1, phi2) = (p1.0.to_radians(), p2.0.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (p2.1 - p1.1).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
}

/// Straight-line (chord) length subtending a great-circle arc of `d` meters.
pub fn chord_for_distance(d: f64) -> f64 {
    if d >= std::f64::consts::PI * EARTH_RADIUS_M {
        2.0 * EARTH_RADIUS_M
    } else {
        2.0 * EARTH_RADIUS_M * (d / (2.0 * EARTH_RADIUS_M)).sin()
    }
}

fn to_xyz((lat, lon): (f64, f64)) -> [f64; 3] {
    let (phi, lambda) = (lat.to_radians(), lon.to_radians());
    [
        EARTH_RADIUS_M * phi.cos() * lambda.cos(),
        EARTH_RADIUS_M * phi.cos() * lambda.sin(),
        EARTH_RADIUS_M * phi.sin(),
    ]
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

const LEAF_SIZE: usize = 16;

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Static k-d tree over points on the sphere, embedded in 3-D so that chord
/// length orders pairs the same way great-circle distance does. Query
/// results are confirmed with [`haversine_unchecked`].
pub struct GeoIndex {
    coords: Vec<(f64, f64)>,
    xyz: Vec<[f64; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    root: usize,
}

impl GeoIndex {
    pub fn new(coords: &[(f64, f64)]) -> Result<Self> {
        for &(lat, lon) in coords {
            check(lat, lon)?;
        }
        let xyz: Vec<[f64; 3]> = coords.iter().copied().map(to_xyz).collect();
        let mut index = GeoIndex {
            coords: coords.to_vec(),
            xyz,
            order: (0..coords.len()).collect(),
            nodes: Vec::new(),
            root: 0,
        };
        index.root = index.build(0, coords.len());
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self, i: usize) -> (f64, f64) {
        self.coords[i]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return self.nodes.len() - 1;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(self.xyz[i][a]);
                hi[a] = hi[a].max(self.xyz[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        if hi[axis] - lo[axis] == 0.0 {
            // all coincident
            self.nodes.push(Node::Leaf { start, end });
            return self.nodes.len() - 1;
        }
        let mid = start + (end - start) / 2;
        let xyz = &self.xyz;
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&p, &q| xyz[p][axis].total_cmp(&xyz[q][axis]));
        let value = self.xyz[self.order[mid]][axis];
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes.push(Node::Split { axis, value, left, right });
        self.nodes.len() - 1
    }

    /// Indices of all points within `radius_m` (great-circle) of `center`,
    /// ascending.
    pub fn within(&self, center: (f64, f64), radius_m: f64, out: &mut Vec<usize>) {
        out.clear();
        if self.coords.is_empty() {
            return;
        }
        let q = to_xyz(center);
        let rc = chord_for_distance(radius_m) * (1.0 + 1e-9) + 1e-6;
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            match self.nodes[n] {
                Node::Leaf { start, end } => {
                    for &i in &self.order[start..end] {
                        if dist2(&q, &self.xyz[i]) <= rc * rc
                            && haversine_unchecked(center, self.coords[i]) <= radius_m
                        {
                            out.push(i);
                        }
                    }
                }
                Node::Split { axis, value, left, right } => {
                    let d = q[axis] - value;
                    if d - rc <= 0.0 {
                        stack.push(left);
                    }
                    if d + rc >= 0.0 {
                        stack.push(right);
                    }
                }
            }
        }
        out.sort_unstable();
    }

    /// Number of points other than `i` within `radius_m` of point `i`.
    pub fn count_within_excluding(&self, i: usize, radius_m: f64, buf: &mut Vec<usize>) -> usize {
        self.within(self.coords[i], radius_m, buf);
        buf.iter().filter(|&&j| j != i).count()
    }

    /// Nearest other point to point `i` and its great-circle distance.
    pub fn nearest_other(&self, i: usize) -> Option<(usize, f64)> {
        let q = self.xyz[i];
        let mut best: Option<(f64, usize)> = None;
        self.nearest_rec(self.root, &q, i, &mut best);
        best.map(|(_, j)| (j, haversine_unchecked(self.coords[i], self.coords[j])))
    }

    fn nearest_rec(&self, n: usize, q: &[f64; 3], skip: usize, best: &mut Option<(f64, usize)>) {
        match self.nodes[n] {
            Node::Leaf { start, end } => {
                for &j in &self.order[start..end] {
                    if j == skip {
                        continue;
                    }
                    let d = dist2(q, &self.xyz[j]);
                    let better = match *best {
                        None => true,
                        Some((bd, bj)) => d < bd || (d == bd && j < bj),
                    };
                    if better {
                        *best = Some((d, j));
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let d = q[axis] - value;
                let (near, far) = if d <= 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near, q, skip, best);
                if best.is_none_or(|(bd, _)| d * d <= bd) {
                    self.nearest_rec(far, q, skip, best);
                }
            }
        }
    }
}
