//! Arithmetic of the iterated F estimates: the recursion F⁽ᵐ⁾, its closed
//! forms, the κ-descendant recursion F₂ and the parameter choices ξ, m, η.
//!
//! Radii are passed as log-distances `ell = |ln r|` so that radii such as
//! r = e^{−10⁶}, which underflow as `f64`, stay representable.

use std::f64::consts::{E, PI};
use std::io::Write;

use crate::error::{Error, Result};
use crate::table;

/// Initial corner deviation κ(r), non-decreasing with κ(0⁺) = 0.
#[derive(Debug, Clone, PartialEq)]
pub enum Kappa {
    Zero,
    /// κ(r) = scale·r^exponent.
    Power {
        scale: f64,
        exponent: f64,
    },
    /// Piecewise linear in ln r through (r, κ) samples sorted by r; constant
    /// beyond the first and last sample.
    Table(Vec<(f64, f64)>),
}

impl Kappa {
    pub fn validate(&self) -> Result<()> {
        match self {
            Kappa::Zero => Ok(()),
            Kappa::Power { scale, exponent } => {
                if *scale >= 0.0 && *exponent > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Domain(format!(
                        "κ = {scale}·r^{exponent} must be non-negative and vanish at 0"
                    )))
                }
            }
            Kappa::Table(pts) => {
                if pts.is_empty() {
                    return Err(Error::Domain("empty κ table".into()));
                }
                for w in pts.windows(2) {
                    if !(w[1].0 > w[0].0) || w[1].1 < w[0].1 {
                        return Err(Error::Domain(
                            "κ table must be sorted by r and non-decreasing".into(),
                        ));
                    }
                }
                if pts.iter().any(|&(r, k)| !(r > 0.0) || !(k >= 0.0)) {
                    return Err(Error::Domain("κ table needs r > 0 and κ ≥ 0".into()));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Kappa::Zero => 0.0,
            Kappa::Power { scale, exponent } => scale * r.max(0.0).powf(*exponent),
            Kappa::Table(pts) => {
                let (first, last) = (pts[0], pts[pts.len() - 1]);
                if r <= first.0 {
                    return first.1;
                }
                if r >= last.0 {
                    return last.1;
                }
                let i = pts.partition_point(|p| p.0 <= r) - 1;
                let (a, b) = (pts[i], pts[i + 1]);
                let w = (r / a.0).ln() / (b.0 / a.0).ln();
                a.1 + w * (b.1 - a.1)
            }
        }
    }
}

/// Constants of the bounds. The proof leaves them unquantified.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundParams {
    pub c: f64,
    /// Stirling constant in m! ≥ c0 (m/e)^m.
    pub c0: f64,
    pub cstar: f64,
    pub kappa: Kappa,
    /// Half-angle bound driving the model flow in the κ-descendant recursion.
    pub flow_half_angle: f64,
}

impl Default for BoundParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            c0: 1.0 / (2.0 * PI).sqrt(),
            cstar: 1.0,
            kappa: Kappa::Zero,
            flow_half_angle: PI / 8.0,
        }
    }
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("C", self.c), ("c0", self.c0), ("C*", self.cstar)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.flow_half_angle >= 0.0 && self.flow_half_angle <= PI / 4.0) {
            return Err(Error::OutOfRange {
                what: "flow_half_angle",
                value: self.flow_half_angle,
                lo: 0.0,
                hi: PI / 4.0,
            });
        }
        self.kappa.validate()
    }

    fn kappa_at_root(&self, ell: f64) -> f64 {
        self.kappa.eval(ell.powf(-0.5))
    }
}

/// ℓ = |ln r| for 0 < r < 1.
pub fn log_radius(r: f64) -> Result<f64> {
    if r > 0.0 && r < 1.0 {
        Ok(-r.ln())
    } else {
        Err(Error::OutOfRange {
            what: "r",
            value: r,
            lo: 0.0,
            hi: 1.0,
        })
    }
}

fn check_ell(ell: f64) -> Result<()> {
    if ell > 0.0 && ell.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("|ln r| must be positive, got {ell}")))
    }
}

/// F⁽⁰⁾(t, r) = Ct + Ct²ℓ/2 + Ctℓ.
pub fn f0(p: &BoundParams, t: f64, ell: f64) -> f64 {
    p.c * t + 0.5 * p.c * t * t * ell + p.c * t * ell
}

/// Values F(t, r) on a uniform t grid × a grid of log-distances.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub t: Vec<f64>,
    pub ell: Vec<f64>,
    /// values[i][k] = F(t[i], e^{−ell[k]}).
    pub values: Vec<Vec<f64>>,
}

/// Fewest t points accepted by [`iterate_f`].
pub const MIN_TIME_POINTS: usize = 257;

impl GridFunction {
    /// Zero function on t ∈ [0, t_max] (nt points) × the given ℓ values.
    pub fn zeros(t_max: f64, nt: usize, ell: Vec<f64>) -> Result<Self> {
        if nt < 2 || !(t_max > 0.0) {
            return Err(Error::Domain(
                "t grid needs t_max > 0 and two points".into(),
            ));
        }
        for &l in &ell {
            check_ell(l)?;
        }
        let t = (0..nt)
            .map(|i| t_max * i as f64 / (nt - 1) as f64)
            .collect();
        let values = vec![vec![0.0; ell.len()]; nt];
        Ok(Self { t, ell, values })
    }

    /// ℓ values log-spaced between `ell_min` and `ell_max`.
    pub fn log_spaced(
        t_max: f64,
        nt: usize,
        ell_min: f64,
        ell_max: f64,
        nl: usize,
    ) -> Result<Self> {
        if nl < 2 || !(ell_max > ell_min) {
            return Err(Error::Domain(
                "ℓ grid needs two increasing endpoints".into(),
            ));
        }
        let q = (ell_max / ell_min).ln() / (nl - 1) as f64;
        let ell = (0..nl).map(|k| ell_min * (q * k as f64).exp()).collect();
        Self::zeros(t_max, nt, ell)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, v| m.max(*v))
    }
}

/// Prefix integrals ∫₀^{t_i} f on a uniform grid, third order.
fn cumulative_uniform(h: f64, f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    if n == 2 {
        out[1] = 0.5 * h * (f[0] + f[1]);
        return out;
    }
    for j in 1..n {
        let piece = if j == 1 {
            h / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f[2])
        } else {
            h / 12.0 * (-f[j - 2] + 8.0 * f[j - 1] + 5.0 * f[j])
        };
        out[j] = out[j - 1] + piece;
    }
    out
}

/// F⁽ᵐ⁻¹⁾ on the grid: F⁽ᵏ⁾ = Ct + Ct²ℓ/2 + Cℓ∫₀^t F⁽ᵏ⁻¹⁾ dt′ from F⁽⁰⁾.
pub fn iterate_f(p: &BoundParams, m: usize, grid: &GridFunction) -> Result<GridFunction> {
    p.validate()?;
    if m == 0 {
        return Err(Error::Domain("iterate_F needs m ≥ 1".into()));
    }
    if grid.t.len() < MIN_TIME_POINTS {
        return Err(Error::InsufficientSamples {
            needed: MIN_TIME_POINTS,
            got: grid.t.len(),
        });
    }
    let h = grid.t[1] - grid.t[0];
    let mut out = grid.clone();
    for (k, &ell) in grid.ell.iter().enumerate() {
        let mut col: Vec<f64> = grid.t.iter().map(|&t| f0(p, t, ell)).collect();
        for _ in 1..m {
            let cum = cumulative_uniform(h, &col);
            col = grid
                .t
                .iter()
                .zip(&cum)
                .map(|(&t, &i)| p.c * t + 0.5 * p.c * t * t * ell + p.c * ell * i)
                .collect();
        }
        for (i, v) in col.into_iter().enumerate() {
            out.values[i][k] = v;
        }
    }
    Ok(out)
}

/// Partial sums of F⁽ᵐ⁻¹⁾ in x = Ctℓ:
/// (1/ℓ)Σ_{k≤m} x^k/k! + (1/Cℓ)Σ_{k≤m} x^{k+1}/(k+1)! + x^m/m!.
pub fn iterate_series(p: &BoundParams, m: usize, t: f64, ell: f64) -> f64 {
    let x = p.c * t * ell;
    let (mut term, mut s1, mut s2) = (1.0, 0.0, 0.0);
    for k in 1..=m {
        term *= x / k as f64;
        s1 += term;
        s2 += term * x / (k + 1) as f64;
    }
    s1 / ell + s2 / (p.c * ell) + term
}

/// (2/ℓ)e^{Ctℓ} + (1/c0)(Ctℓ/m)^m, as printed.
pub fn closed_form(p: &BoundParams, m: usize, t: f64, ell: f64) -> f64 {
    let x = p.c * t * ell;
    2.0 / ell * x.exp() + (x / m as f64).powi(m as i32) / p.c0
}

/// (1 + 1/C)e^{Ctℓ}/ℓ + (1/c0)(e·Ctℓ/m)^m, which dominates the iterates for
/// every C since x^m/m! ≤ (e x/m)^m / c0.
pub fn stirling_bound(p: &BoundParams, m: usize, t: f64, ell: f64) -> f64 {
    let x = p.c * t * ell;
    (1.0 + 1.0 / p.c) * x.exp() / ell + (E * x / m as f64).powi(m as i32) / p.c0
}

/// Result of the κ-descendant recursion at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Descendants {
    /// F₂⁽ᵐ⁻¹⁾(t, r).
    pub value: f64,
    /// (κ(δ^{1/2}) + |ln δ|/ℓ)·e^{Ctℓ}.
    pub bound: f64,
}

impl Descendants {
    pub fn holds(&self) -> bool {
        self.value <= self.bound
    }
}

/// Sparse table for maxima over index ranges.
struct RangeMax {
    levels: Vec<Vec<f64>>,
}

impl RangeMax {
    fn new(v: &[f64]) -> Self {
        let mut levels = vec![v.to_vec()];
        let mut w = 1;
        while 2 * w <= v.len() {
            let prev = levels.last().unwrap();
            let next = (0..=v.len() - 2 * w)
                .map(|i| prev[i].max(prev[i + w]))
                .collect();
            levels.push(next);
            w *= 2;
        }
        Self { levels }
    }

    /// max v[lo..=hi].
    fn query(&self, lo: usize, hi: usize) -> f64 {
        let len = hi - lo + 1;
        let j = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let l = &self.levels[j];
        l[lo].max(l[hi + 1 - (1 << j)])
    }
}

/// Time and log-distance resolution of the F₂ recursion.
const DESCENDANT_NT: usize = 65;
const DESCENDANT_NL: usize = 257;

/// Evaluates F₂⁽ᵐ⁻¹⁾(t, r) from F₂⁽⁰⁾ = κ and
/// F₂⁽ᵏ⁾(t, r) = κ(r) + C∫₀^t |ln ρ| (L F₂⁽ᵏ⁻¹⁾(t′, ρ) + H F₂⁽ᵏ⁻¹⁾(t′, r)) dt′,
/// ρ = Φ_{t′−t}(r), with Φ the model flow at constant half-angle
/// `flow_half_angle`. L averages over [ρ, 1] in d(ln s); H takes the sup
/// along the backward path.
pub fn kappa_descendants(
    p: &BoundParams,
    m: usize,
    t: f64,
    ell: f64,
    delta: f64,
) -> Result<Descendants> {
    p.validate()?;
    check_ell(ell)?;
    if m == 0 {
        return Err(Error::Domain("κ descendants need m ≥ 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0 && -delta.ln() < ell) {
        return Err(Error::Domain(format!(
            "need 0 < r < δ < 1, got δ = {delta} with |ln r| = {ell}"
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be non-negative, got {t}")));
    }
    let bound = (p.kappa.eval(delta.sqrt()) - delta.ln() / ell) * (p.c * t * ell).exp();
    let kappa_of = |l: f64| p.kappa.eval((-l).exp());
    if t == 0.0 || m == 1 {
        return Ok(Descendants {
            value: kappa_of(ell),
            bound,
        });
    }
    let nt = DESCENDANT_NT;
    let nl = DESCENDANT_NL;
    let ht = t / (nt - 1) as f64;
    let hl = ell / (nl - 1) as f64;
    let ls: Vec<f64> = (0..nl).map(|k| k as f64 * hl).collect();
    let rate = p.cstar * p.flow_half_angle;
    // f[i][k] = F₂(t_i, ℓ_k).
    let seed: Vec<f64> = ls.iter().map(|&l| kappa_of(l)).collect();
    let mut f = vec![seed.clone(); nt];
    let interp = |row: &[f64], l: f64| {
        let x = (l / hl).clamp(0.0, (nl - 1) as f64);
        let k = (x.floor() as usize).min(nl - 2);
        let w = x - k as f64;
        row[k] * (1.0 - w) + row[k + 1] * w
    };
    for _ in 1..m {
        // Prefix integrals ∫₀^{ℓ_k} f dλ for L.
        let prefix: Vec<Vec<f64>> = f
            .iter()
            .map(|row| {
                let mut acc = vec![0.0; nl];
                for k in 1..nl {
                    acc[k] = acc[k - 1] + 0.5 * hl * (row[k - 1] + row[k]);
                }
                acc
            })
            .collect();
        let maxima: Vec<RangeMax> = f.iter().map(|row| RangeMax::new(row)).collect();
        let mut next = vec![seed.clone(); nt];
        for j in 1..nt {
            let tj = j as f64 * ht;
            for k in 1..nl {
                let lk = ls[k];
                let lam0 = lk * (-rate * tj).exp();
                let mut integrand = Vec::with_capacity(j + 1);
                for i in 0..=j {
                    let lam = lk * (-rate * (tj - i as f64 * ht)).exp();
                    let l_term = interp(&prefix[i], lam);
                    let row = &f[i];
                    let k0 = ((lam0 / hl).ceil() as usize).min(k);
                    let h_term = interp(row, lam0).max(maxima[i].query(k0, k));
                    integrand.push(l_term + lam * h_term);
                }
                let mut acc = 0.5 * (integrand[0] + integrand[j]);
                acc += integrand[1..j].iter().sum::<f64>();
                next[j][k] = seed[k] + p.c * ht * acc;
            }
        }
        f = next;
    }
    Ok(Descendants {
        value: f[nt - 1][nl - 1],
        bound,
    })
}

/// ξ, m, η for one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parameters {
    pub xi: f64,
    pub m: usize,
    pub eta: f64,
}

/// ξ = ½ min{ln ℓ, ln(1/κ(ℓ^{−1/2}))}, m = ⌈eξ⌉, η = ξ/(Cℓ).
pub fn choose_parameters(p: &BoundParams, ell: f64) -> Result<Parameters> {
    p.validate()?;
    check_ell(ell)?;
    let k = p.kappa_at_root(ell);
    let inv = if k > 0.0 { -k.ln() } else { f64::INFINITY };
    let xi = 0.5 * ell.ln().min(inv);
    let m = (E * xi).ceil();
    if !(xi > 0.0) || m > 4.0 * xi {
        return Err(Error::Domain(format!(
            "ξ = {xi:.4} at |ln r| = {ell:.4e} admits no m in [eξ, 4ξ]"
        )));
    }
    Ok(Parameters {
        xi,
        m: m as usize,
        eta: xi / (p.c * ell),
    })
}

/// 2 ln ℓ/√ℓ + κ^{1/2}(ℓ^{−1/2}).
pub fn decay_f(p: &BoundParams, ell: f64) -> f64 {
    2.0 * ell.ln() / ell.sqrt() + p.kappa_at_root(ell).sqrt()
}

/// Terms of the final G bound at time η(r).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GBound {
    /// max{(ln ℓ)^{−(1+δ)}, κ^{1/2}(ℓ^{−1/2})}.
    pub g_term: f64,
    /// [`decay_f`].
    pub f_term: f64,
    pub total: f64,
}

pub fn final_g_bound(p: &BoundParams, ell: f64, delta: f64) -> Result<GBound> {
    p.validate()?;
    check_ell(ell)?;
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("δ must be positive, got {delta}")));
    }
    if !(ell > E) {
        return Err(Error::Domain(format!(
            "need ln|ln r| > 1, got |ln r| = {ell}"
        )));
    }
    let g_term = ell
        .ln()
        .powf(-(1.0 + delta))
        .max(p.kappa_at_root(ell).sqrt());
    let f_term = decay_f(p, ell);
    Ok(GBound {
        g_term,
        f_term,
        total: g_term + f_term,
    })
}

/// One row of the bounds table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsRow {
    /// |ln r|.
    pub ell: f64,
    pub params: Parameters,
    pub bound_f: f64,
    pub bound_g: f64,
}

/// Parameters and bounds along ℓ = 10^k.
pub fn bounds_table(p: &BoundParams, ells: &[f64], delta: f64) -> Result<Vec<BoundsRow>> {
    ells.iter()
        .map(|&ell| {
            Ok(BoundsRow {
                ell,
                params: choose_parameters(p, ell)?,
                bound_f: decay_f(p, ell),
                bound_g: final_g_bound(p, ell, delta)?.total,
            })
        })
        .collect()
}

/// CSV `r,xi,m,eta,bound_F,bound_G`. The r column holds ln r, since the radii
/// of interest underflow.
pub fn write_bounds_csv<W: Write>(rows: &[BoundsRow], w: &mut W) -> Result<()> {
    table::write_header(w, &["r", "xi", "m", "eta", "bound_F", "bound_G"])?;
    for b in rows {
        table::write_cells(
            w,
            &[
                table::fmt_real(-b.ell),
                table::fmt_real(b.params.xi),
                b.params.m.to_string(),
                table::fmt_real(b.params.eta),
                table::fmt_real(b.bound_f),
                table::fmt_real(b.bound_g),
            ],
        )?;
    }
    Ok(())
}
