//! Planar vectors and exact polygon/circle geometry.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        Self::new(r * theta.cos(), r * theta.sin())
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Signed shoelace area of a closed polygon (positive when counterclockwise).
pub fn polygon_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| poly[i].cross(poly[(i + 1) % n]))
        .sum::<f64>()
        * 0.5
}

/// Area, first and second moments (∫1, ∫x, ∫y, ∫x², ∫xy, ∫y²) of a closed polygon.
pub fn polygon_moments(poly: &[Vec2]) -> [f64; 6] {
    let n = poly.len();
    let mut m = [0.0; 6];
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let c = p.cross(q);
        m[0] += c / 2.0;
        m[1] += (p.x + q.x) * c / 6.0;
        m[2] += (p.y + q.y) * c / 6.0;
        m[3] += (p.x * p.x + p.x * q.x + q.x * q.x) * c / 12.0;
        m[4] += (p.x * q.y + 2.0 * p.x * p.y + 2.0 * q.x * q.y + q.x * p.y) * c / 24.0;
        m[5] += (p.y * p.y + p.y * q.y + q.y * q.y) * c / 12.0;
    }
    m
}

/// Parameters s ∈ (0, 1) where segment a→b crosses the circle |x| = r, in
/// increasing order. Vertices exactly on the circle count as outside, which
/// keeps crossing counts consistent between adjacent segments.
pub fn segment_circle_crossings(a: Vec2, b: Vec2, r: f64) -> Vec<f64> {
    let r2 = r * r;
    let outside = |p: Vec2| p.norm_sq() >= r2;
    let d = b - a;
    let qa = d.norm_sq();
    if qa == 0.0 {
        return Vec::new();
    }
    let qb = a.dot(d);
    let qc = a.norm_sq() - r2;
    let disc = qb * qb - qa * qc;
    let (oa, ob) = (outside(a), outside(b));
    if disc <= 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    // Stable roots of qa s² + 2 qb s + qc = 0.
    let q = -(qb + qb.signum() * sq);
    let (mut s1, mut s2) = if q != 0.0 {
        (q / qa, qc / q)
    } else {
        (0.0, 0.0)
    };
    if s1 > s2 {
        std::mem::swap(&mut s1, &mut s2);
    }
    match (oa, ob) {
        (true, false) => vec![s1.clamp(0.0, 1.0)],
        (false, true) => vec![s2.clamp(0.0, 1.0)],
        (true, true) => {
            if s1 > 0.0 && s2 < 1.0 && s1 < s2 {
                vec![s1, s2]
            } else {
                Vec::new()
            }
        }
        (false, false) => Vec::new(),
    }
}

/// Signed area of polygon ∩ disc(0, r), exact.
pub fn polygon_disc_area(poly: &[Vec2], r: f64) -> f64 {
    let n = poly.len();
    let r2 = r * r;
    let mut acc = 0.0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let mut pts = vec![a];
        for s in segment_circle_crossings(a, b, r) {
            pts.push(a + (b - a) * s);
        }
        pts.push(b);
        for w in pts.windows(2) {
            let (p, q) = (w[0], w[1]);
            let mid = (p + q) * 0.5;
            if mid.norm_sq() < r2 {
                acc += 0.5 * p.cross(q);
            } else {
                acc += 0.5 * r2 * p.cross(q).atan2(p.dot(q));
            }
        }
    }
    acc
}

/// Crossing-number point-in-polygon test.
pub fn point_in_polygon(poly: &[Vec2], p: Vec2) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

/// Proper or touching intersection of closed segments ab and cd.
pub fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Vec2, q: Vec2, x: Vec2, o: f64| {
        o == 0.0
            && x.x >= p.x.min(q.x)
            && x.x <= p.x.max(q.x)
            && x.y >= p.y.min(q.y)
            && x.y <= p.y.max(q.y)
    };
    on(c, d, a, d1) || on(c, d, b, d2) || on(a, b, c, d3) || on(a, b, d, d4)
}
