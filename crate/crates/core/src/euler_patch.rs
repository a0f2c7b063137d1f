//! Contour dynamics for constant-vorticity patches: the boundary velocity
//! integral, RK4 time stepping with local remeshing, and the two-lobe corner
//! patch used as initial data.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{polygon_area, polygon_moments, segments_intersect, Vec2};
use crate::quadrature::GaussLegendre;
use crate::table;

/// Smallest node spacing used for corner meshes.
pub const DEFAULT_H_MIN: f64 = 1e-6;

/// Closed counterclockwise boundary polygon of one patch component.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub nodes: Vec<Vec2>,
    /// Node 0 is a corner vertex: never removed or smoothed across by remeshing.
    pub corner: bool,
}

impl Contour {
    pub fn new(nodes: Vec<Vec2>, corner: bool) -> Self {
        Self { nodes, corner }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.nodes)
    }

    pub fn half_turn(&self) -> Contour {
        Contour {
            nodes: self.nodes.iter().map(|p| -*p).collect(),
            corner: self.corner,
        }
    }

    pub fn spacing_range(&self) -> (f64, f64) {
        let n = self.nodes.len();
        (0..n)
            .map(|i| (self.nodes[(i + 1) % n] - self.nodes[i]).norm())
            .fold((f64::INFINITY, 0.0), |(lo, hi), l| (lo.min(l), hi.max(l)))
    }

    /// Orientation of the principal axis of the enclosed region, in (−π/2, π/2].
    pub fn principal_axis_angle(&self) -> f64 {
        let m = polygon_moments(&self.nodes);
        let (cx, cy) = (m[1] / m[0], m[2] / m[0]);
        let ixx = m[3] - m[0] * cx * cx;
        let ixy = m[4] - m[0] * cx * cy;
        let iyy = m[5] - m[0] * cy * cy;
        0.5 * (2.0 * ixy).atan2(ixx - iyy)
    }
}

/// Vorticity-one patch bounded by `contours` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchState {
    pub t: f64,
    pub contours: Vec<Contour>,
}

impl PatchState {
    pub fn area(&self) -> f64 {
        self.contours.iter().map(Contour::area).sum()
    }

    pub fn node_count(&self) -> usize {
        self.contours.iter().map(Contour::len).sum()
    }

    /// Max distance between contour 1 and the half-turn of contour 0, when the
    /// state is a symmetric pair of contours.
    pub fn symmetry_error(&self) -> Option<f64> {
        if self.contours.len() != 2 || self.contours[0].len() != self.contours[1].len() {
            return None;
        }
        Some(
            self.contours[0]
                .nodes
                .iter()
                .zip(&self.contours[1].nodes)
                .map(|(a, b)| (*a + *b).norm())
                .fold(0.0, f64::max),
        )
    }

    pub fn is_symmetric_pair(&self) -> bool {
        self.symmetry_error().is_some_and(|e| e <= 1e-10)
    }

    /// True if no two non-adjacent boundary segments touch. Segments meeting
    /// at a shared vertex (the common corner of two lobes) are not compared.
    pub fn is_simple(&self) -> bool {
        let mut segs: Vec<(Vec2, Vec2, usize, usize, usize)> = Vec::new();
        for (ci, c) in self.contours.iter().enumerate() {
            let n = c.len();
            for i in 0..n {
                segs.push((c.nodes[i], c.nodes[(i + 1) % n], ci, i, n));
            }
        }
        let bbox = |a: Vec2, b: Vec2| (a.x.min(b.x), a.x.max(b.x), a.y.min(b.y), a.y.max(b.y));
        let boxes: Vec<_> = segs.iter().map(|s| bbox(s.0, s.1)).collect();
        for i in 0..segs.len() {
            for j in i + 1..segs.len() {
                let (bi, bj) = (boxes[i], boxes[j]);
                if bi.1 < bj.0 || bj.1 < bi.0 || bi.3 < bj.2 || bj.3 < bi.2 {
                    continue;
                }
                let (a, b, ca, ia, na) = segs[i];
                let (c, d, cb, ib, _) = segs[j];
                if ca == cb && (ib == ia + 1 || (ia == 0 && ib == na - 1)) {
                    continue;
                }
                if a == c || a == d || b == c || b == d {
                    continue;
                }
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    /// Snapshot rows `t,node_index,x,y`; node_index runs over all contours in order.
    pub fn write_snapshot_rows<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut k = 0usize;
        for c in &self.contours {
            for p in &c.nodes {
                table::write_cells(
                    w,
                    &[
                        table::fmt_real(self.t),
                        k.to_string(),
                        table::fmt_real(p.x),
                        table::fmt_real(p.y),
                    ],
                )?;
                k += 1;
            }
        }
        Ok(())
    }
}

/// CSV export of a sequence of snapshots.
pub fn write_snapshots_csv<W: Write>(states: &[PatchState], w: &mut W) -> Result<()> {
    table::write_header(w, &["t", "node_index", "x", "y"])?;
    for s in states {
        s.write_snapshot_rows(w)?;
    }
    Ok(())
}

/// How the boundary integral is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    /// 0: exact panel integrals everywhere; n > 0: n-point Gauss–Legendre on
    /// panels farther than [`NEAR_FIELD`] panel lengths from the target.
    pub quad_order: usize,
    /// Exact integration on near panels. When false, Gauss–Legendre is used on
    /// every panel and targets on nodes are rejected.
    pub desingularize: bool,
}

impl Default for Kernel {
    fn default() -> Self {
        Self {
            quad_order: 0,
            desingularize: true,
        }
    }
}

/// Panels within this many panel lengths of the target are integrated exactly.
pub const NEAR_FIELD: f64 = 3.0;

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: Vec2,
    b: Vec2,
    t: Vec2,
    len: f64,
}

fn panels_of(contours: &[Contour]) -> Vec<Panel> {
    let mut out = Vec::with_capacity(contours.iter().map(Contour::len).sum());
    for c in contours {
        let n = c.len();
        for i in 0..n {
            let (a, b) = (c.nodes[i], c.nodes[(i + 1) % n]);
            let len = (b - a).norm();
            if len > 0.0 {
                out.push(Panel {
                    a,
                    b,
                    t: (b - a) * (1.0 / len),
                    len,
                });
            }
        }
    }
    out
}

/// ∫ ln|x − y| ds over the panel, exact.
fn panel_log_exact(p: &Panel, x: Vec2) -> f64 {
    let (da, db) = (p.a - x, p.b - x);
    let (ra2, rb2) = (da.norm_sq(), db.norm_sq());
    let (ua, ub) = (da.dot(p.t), db.dot(p.t));
    let l = p.len;
    let h = da.cross(p.t).abs();
    let phi = da.cross(db).abs().atan2(da.dot(db));
    // Expand around the farther endpoint E: u_O ln ρ_O − u_E ln ρ_E
    // = L ln ρ_E + u_O ln(ρ_O/ρ_E), with u measured from E toward O.
    let (re2, ue, uo) = if ra2 >= rb2 {
        (ra2, ua, ub)
    } else {
        (rb2, -ub, -ua)
    };
    let ratio = if uo == 0.0 {
        0.0
    } else {
        0.5 * uo * (l * (ue + uo) / re2).ln_1p()
    };
    0.5 * l * re2.ln() + ratio - l + h * phi
}

fn panel_log_gauss(p: &Panel, x: Vec2, gl: &GaussLegendre) -> f64 {
    let mut acc = 0.0;
    for (s, w) in gl.nodes.iter().zip(&gl.weights) {
        let y = p.a + p.t * (0.5 * p.len * (1.0 + s));
        acc += w * 0.5 * (x - y).norm_sq().ln();
    }
    0.5 * p.len * acc
}

fn velocity_from_panels(
    panels: &[Panel],
    x: Vec2,
    kernel: &Kernel,
    gl: Option<&GaussLegendre>,
) -> Vec2 {
    let mut ux = 0.0;
    let mut uy = 0.0;
    for p in panels {
        let i = match gl {
            Some(gl) if !kernel.desingularize => panel_log_gauss(p, x, gl),
            Some(gl) => {
                let mid = (p.a + p.b) * 0.5;
                let d = (x - mid).norm() - 0.5 * p.len;
                if d < NEAR_FIELD * p.len {
                    panel_log_exact(p, x)
                } else {
                    panel_log_gauss(p, x, gl)
                }
            }
            None => panel_log_exact(p, x),
        };
        ux += i * p.t.x;
        uy += i * p.t.y;
    }
    Vec2::new(ux, uy) * (-0.5 / PI)
}

fn gauss_for(kernel: &Kernel) -> Option<GaussLegendre> {
    match (kernel.quad_order, kernel.desingularize) {
        (0, true) => None,
        (0, false) => Some(GaussLegendre::new(8)),
        (n, _) => Some(GaussLegendre::new(n)),
    }
}

fn check_targets(contours: &[Contour], targets: &[Vec2], kernel: &Kernel) -> Result<()> {
    if kernel.desingularize {
        return Ok(());
    }
    if targets
        .iter()
        .any(|x| contours.iter().any(|c| c.nodes.contains(x)))
    {
        return Err(Error::SingularNode);
    }
    Ok(())
}

/// Velocity u(x) = −(1/2π) ∮ ln|x − y| dy induced by the patch.
pub fn velocity_at(state: &PatchState, x: Vec2, kernel: &Kernel) -> Result<Vec2> {
    check_targets(&state.contours, &[x], kernel)?;
    let panels = panels_of(&state.contours);
    Ok(velocity_from_panels(
        &panels,
        x,
        kernel,
        gauss_for(kernel).as_ref(),
    ))
}

/// Velocities at many targets, evaluated in parallel.
pub fn velocities(contours: &[Contour], targets: &[Vec2], kernel: &Kernel) -> Result<Vec<Vec2>> {
    check_targets(contours, targets, kernel)?;
    let panels = panels_of(contours);
    let gl = gauss_for(kernel);
    Ok(targets
        .par_iter()
        .map(|x| velocity_from_panels(&panels, *x, kernel, gl.as_ref()))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CDConfig {
    pub n_nodes: usize,
    pub dt: f64,
    pub quad_order: usize,
    pub desingularize: bool,
    /// Remeshing on/off; the spacing fields below only matter when on.
    pub remesh: bool,
    pub h_min: f64,
    pub h_max: f64,
    /// Target spacing is `corner_grading·|x|` on corner contours, clamped to
    /// [h_min, h_max]; neighbouring spacings then differ by at most this factor plus one.
    pub corner_grading: f64,
    /// Largest turning angle between consecutive segments before refinement.
    pub max_turn: f64,
    pub symmetrize: bool,
    /// Upper limit on dt·max|∇u| along the boundary.
    pub cfl_limit: f64,
}

impl CDConfig {
    /// Fixed-mesh configuration for smooth patches.
    pub fn fixed(n_nodes: usize, dt: f64) -> Self {
        Self {
            n_nodes,
            dt,
            quad_order: 0,
            desingularize: true,
            remesh: false,
            h_min: 0.0,
            h_max: f64::INFINITY,
            corner_grading: 0.0,
            max_turn: f64::INFINITY,
            symmetrize: false,
            cfl_limit: 0.5,
        }
    }

    /// Remeshed, symmetrized configuration matching [`make_corner_patch`].
    pub fn corner(b0: f64, r_outer: f64, n_nodes: usize, dt: f64) -> Result<Self> {
        let sp = corner_spacing(b0, r_outer, n_nodes)?;
        Ok(Self {
            n_nodes,
            dt,
            quad_order: 0,
            desingularize: true,
            remesh: true,
            h_min: sp.h_min,
            h_max: sp.h_max,
            corner_grading: sp.grading,
            max_turn: 0.15,
            symmetrize: true,
            cfl_limit: 0.5,
        })
    }

    pub fn kernel(&self) -> Kernel {
        Kernel {
            quad_order: self.quad_order,
            desingularize: self.desingularize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Domain(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.remesh
            && !(self.h_min > 0.0 && self.h_max >= self.h_min && self.corner_grading > 0.0)
        {
            return Err(Error::Domain(
                "remeshing needs 0 < h_min <= h_max and positive grading".into(),
            ));
        }
        if self.remesh && self.corner_grading > 0.2 {
            return Err(Error::OutOfRange {
                what: "corner_grading",
                value: self.corner_grading,
                lo: 0.0,
                hi: 0.2,
            });
        }
        Ok(())
    }

    fn target_spacing(&self, c: &Contour, p: Vec2) -> f64 {
        if c.corner {
            (self.corner_grading * p.norm()).clamp(self.h_min, self.h_max)
        } else {
            self.h_max
        }
    }
}

/// Pins the shared corner vertex of a symmetric pair at the origin.
pub fn corner_anchor(state: &PatchState) -> Result<PatchState> {
    if !state.is_symmetric_pair() {
        return Err(Error::Domain(
            "corner anchoring needs a two-fold symmetric pair of contours".into(),
        ));
    }
    let mut out = state.clone();
    for c in out.contours.iter_mut().filter(|c| c.corner) {
        c.nodes[0] = Vec2::ZERO;
    }
    Ok(out)
}

fn movers(state: &PatchState, cfg: &CDConfig) -> usize {
    if cfg.symmetrize {
        1
    } else {
        state.contours.len()
    }
}

fn with_positions(state: &PatchState, cfg: &CDConfig, moved: &[Vec<Vec2>]) -> Vec<Contour> {
    let mut cs: Vec<Contour> = moved
        .iter()
        .zip(&state.contours)
        .map(|(n, c)| Contour::new(n.clone(), c.corner))
        .collect();
    if cfg.symmetrize {
        cs.push(cs[0].half_turn());
    }
    cs
}

fn stage_velocities(
    state: &PatchState,
    cfg: &CDConfig,
    moved: &[Vec<Vec2>],
) -> Result<Vec<Vec<Vec2>>> {
    let contours = with_positions(state, cfg, moved);
    let flat: Vec<Vec2> = moved.iter().flatten().copied().collect();
    let v = velocities(&contours, &flat, &cfg.kernel())?;
    let mut out = Vec::with_capacity(moved.len());
    let mut k = 0;
    for (ci, m) in moved.iter().enumerate() {
        let mut vs = v[k..k + m.len()].to_vec();
        if cfg.symmetrize && state.contours[ci].corner {
            vs[0] = Vec2::ZERO;
        }
        k += m.len();
        out.push(vs);
    }
    Ok(out)
}

/// Diagnostics of one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// dt · max|Δu|/|Δx| over boundary segments at the start of the step.
    pub cfl: f64,
    pub remeshed: bool,
}

/// One RK4 step followed by remeshing and symmetrization.
pub fn step(state: &PatchState, cfg: &CDConfig) -> Result<PatchState> {
    step_with_report(state, cfg).map(|(s, _)| s)
}

pub fn step_with_report(state: &PatchState, cfg: &CDConfig) -> Result<(PatchState, StepReport)> {
    if cfg.symmetrize && !state.is_symmetric_pair() {
        return Err(Error::Domain(
            "symmetrized stepping needs a two-fold symmetric pair of contours".into(),
        ));
    }
    let dt = cfg.dt;
    let m = movers(state, cfg);
    let y0: Vec<Vec<Vec2>> = state.contours[..m]
        .iter()
        .map(|c| c.nodes.clone())
        .collect();
    let shift = |base: &[Vec<Vec2>], k: &[Vec<Vec2>], h: f64| -> Vec<Vec<Vec2>> {
        base.iter()
            .zip(k)
            .map(|(b, v)| b.iter().zip(v).map(|(p, u)| *p + *u * h).collect())
            .collect()
    };
    let k1 = stage_velocities(state, cfg, &y0)?;
    let k2 = stage_velocities(state, cfg, &shift(&y0, &k1, 0.5 * dt))?;
    let k3 = stage_velocities(state, cfg, &shift(&y0, &k2, 0.5 * dt))?;
    let k4 = stage_velocities(state, cfg, &shift(&y0, &k3, dt))?;

    let mut cfl: f64 = 0.0;
    for (pts, vs) in y0.iter().zip(&k1) {
        let n = pts.len();
        for i in 0..n {
            let j = (i + 1) % n;
            let dx = (pts[j] - pts[i]).norm();
            if dx > 0.0 {
                cfl = cfl.max(dt * (vs[j] - vs[i]).norm() / dx);
            }
        }
    }
    if cfl > cfg.cfl_limit {
        return Err(Error::InvariantViolation {
            invariant: "dt * max|grad u| within CFL limit",
            at: state.t,
            value: cfl,
        });
    }

    let mut next = state.clone();
    next.t = state.t + dt;
    for (ci, pts) in y0.iter().enumerate() {
        let nodes = &mut next.contours[ci].nodes;
        for (i, p) in pts.iter().enumerate() {
            let u = (k1[ci][i] + k2[ci][i] * 2.0 + k3[ci][i] * 2.0 + k4[ci][i]) * (1.0 / 6.0);
            nodes[i] = *p + u * dt;
        }
    }
    let mut remeshed = false;
    if cfg.remesh {
        for c in next.contours[..m].iter_mut() {
            remeshed |= remesh(c, cfg);
        }
    }
    if cfg.symmetrize {
        next = corner_anchor_unchecked(next);
        next.contours.truncate(1);
        let mirror = next.contours[0].half_turn();
        next.contours.push(mirror);
    }
    if !next.is_simple() {
        return Err(Error::SelfIntersection { t: next.t });
    }
    Ok((next, StepReport { cfl, remeshed }))
}

fn corner_anchor_unchecked(mut state: PatchState) -> PatchState {
    for c in state.contours.iter_mut().filter(|c| c.corner) {
        c.nodes[0] = Vec2::ZERO;
    }
    state
}

/// Centripetal Catmull–Rom point halfway (in parameter) between p1 and p2.
fn catmull_rom_mid(p0: Vec2, p1: Vec2, p2: Vec2, p3: Vec2) -> Vec2 {
    let knot = |a: Vec2, b: Vec2| (b - a).norm().sqrt().max(1e-300);
    let t0 = 0.0;
    let t1 = t0 + knot(p0, p1);
    let t2 = t1 + knot(p1, p2);
    let t3 = t2 + knot(p2, p3);
    let t = 0.5 * (t1 + t2);
    let lerp = |a: Vec2, b: Vec2, ta: f64, tb: f64| {
        a * ((tb - t) / (tb - ta)) + b * ((t - ta) / (tb - ta))
    };
    let a1 = lerp(p0, p1, t0, t1);
    let a2 = lerp(p1, p2, t1, t2);
    let a3 = lerp(p2, p3, t2, t3);
    let b1 = lerp(a1, a2, t0, t2);
    let b2 = lerp(a2, a3, t1, t3);
    lerp(b1, b2, t1, t2)
}

fn turning_angle(prev: Vec2, at: Vec2, next: Vec2) -> f64 {
    let (e0, e1) = (at - prev, next - at);
    e0.cross(e1).abs().atan2(e0.dot(e1))
}

/// Neighbours of segment i → i+1, with linear ghosts across a corner vertex.
fn segment_stencil(nodes: &[Vec2], corner: bool, i: usize) -> (Vec2, Vec2, Vec2, Vec2) {
    let n = nodes.len();
    let j = (i + 1) % n;
    let (p1, p2) = (nodes[i], nodes[j]);
    let p0 = if corner && i == 0 {
        p1 * 2.0 - p2
    } else {
        nodes[(i + n - 1) % n]
    };
    let p3 = if corner && j == 0 {
        p2 * 2.0 - p1
    } else {
        nodes[(j + 1) % n]
    };
    (p0, p1, p2, p3)
}

fn node_turn(nodes: &[Vec2], corner: bool, i: usize) -> f64 {
    let n = nodes.len();
    if corner && i == 0 {
        return 0.0;
    }
    turning_angle(nodes[(i + n - 1) % n], nodes[i], nodes[(i + 1) % n])
}

/// Local refinement and coarsening toward the target spacing. Returns true if
/// any node was inserted or removed.
fn remesh(c: &mut Contour, cfg: &CDConfig) -> bool {
    let mut changed = false;
    for _ in 0..8 {
        let mut pass_changed = false;
        // Refine.
        let n = c.nodes.len();
        let mut out = Vec::with_capacity(n + n / 4);
        for i in 0..n {
            out.push(c.nodes[i]);
            let (p0, p1, p2, p3) = segment_stencil(&c.nodes, c.corner, i);
            let len = (p2 - p1).norm();
            let target = cfg.target_spacing(c, (p1 + p2) * 0.5);
            let turn =
                node_turn(&c.nodes, c.corner, i).max(node_turn(&c.nodes, c.corner, (i + 1) % n));
            if len > 1.6 * target || (turn > cfg.max_turn && len > 2.0 * cfg.h_min) {
                out.push(catmull_rom_mid(p0, p1, p2, p3));
                pass_changed = true;
            }
        }
        c.nodes = out;
        // Coarsen: drop node j when its two segments together fit the target.
        let n = c.nodes.len();
        let mut keep = vec![true; n];
        let mut removed = 0;
        let mut i = 0;
        while i < n {
            let skip = (c.corner && i == 0) || n - removed <= 8 || (i == n - 1 && !keep[0]);
            if !skip {
                let prev = c.nodes[(i + n - 1) % n];
                let next = c.nodes[(i + 1) % n];
                let here = c.nodes[i];
                let span = (here - prev).norm() + (next - here).norm();
                let target = cfg.target_spacing(c, here);
                if span < target && turning_angle(prev, here, next) < 0.25 * cfg.max_turn {
                    keep[i] = false;
                    removed += 1;
                    pass_changed = true;
                    i += 2;
                    continue;
                }
            }
            i += 1;
        }
        if keep.iter().any(|k| !*k) {
            c.nodes = c
                .nodes
                .iter()
                .zip(&keep)
                .filter(|(_, k)| **k)
                .map(|(p, _)| *p)
                .collect();
        }
        changed |= pass_changed;
        if !pass_changed {
            break;
        }
    }
    changed
}

/// Result of a contour-dynamics run.
#[derive(Debug, Clone)]
pub struct EulerRun {
    pub snapshots: Vec<PatchState>,
    pub steps: usize,
    pub initial_area: f64,
    /// Largest relative area change seen over the run.
    pub max_area_drift: f64,
    pub max_cfl: f64,
    /// Largest symmetry error after any step (zero unless symmetrized).
    pub max_symmetry_error: f64,
}

/// Relative area change tolerated during a run.
pub const AREA_TOLERANCE: f64 = 1e-3;

/// Advances `initial` to `t_end` in steps of `cfg.dt`, keeping every
/// `snapshot_every`-th state (and the first and last).
pub fn simulate(
    initial: &PatchState,
    cfg: &CDConfig,
    t_end: f64,
    snapshot_every: usize,
) -> Result<EulerRun> {
    cfg.validate()?;
    let steps = (((t_end - initial.t) / cfg.dt).round().max(0.0)) as usize;
    let every = snapshot_every.max(1);
    let area0 = initial.area();
    let mut state = if cfg.symmetrize {
        corner_anchor(initial)?
    } else {
        initial.clone()
    };
    let mut run = EulerRun {
        snapshots: vec![state.clone()],
        steps,
        initial_area: area0,
        max_area_drift: 0.0,
        max_cfl: 0.0,
        max_symmetry_error: 0.0,
    };
    for k in 1..=steps {
        let (mut next, report) = step_with_report(&state, cfg)?;
        next.t = initial.t + k as f64 * cfg.dt;
        let drift = ((next.area() - area0) / area0).abs();
        if drift > AREA_TOLERANCE {
            return Err(Error::InvariantViolation {
                invariant: "patch area conserved",
                at: next.t,
                value: drift,
            });
        }
        run.max_area_drift = run.max_area_drift.max(drift);
        run.max_cfl = run.max_cfl.max(report.cfl);
        if let Some(e) = next.symmetry_error() {
            if cfg.symmetrize {
                run.max_symmetry_error = run.max_symmetry_error.max(e);
            }
        }
        if k % every == 0 || k == steps {
            run.snapshots.push(next.clone());
        }
        state = next;
    }
    Ok(run)
}

/// Disc of radius `radius` centred at the origin with `n` equispaced nodes.
pub fn make_disc(radius: f64, n: usize) -> PatchState {
    make_ellipse(radius, radius, n)
}

/// Ellipse with semi-axes `a` (along x) and `b`, nodes equispaced in the
/// parametric angle.
pub fn make_ellipse(a: f64, b: f64, n: usize) -> PatchState {
    let nodes = (0..n)
        .map(|k| {
            let s = 2.0 * PI * k as f64 / n as f64;
            Vec2::new(a * s.cos(), b * s.sin())
        })
        .collect();
    PatchState {
        t: 0.0,
        contours: vec![Contour::new(nodes, false)],
    }
}

/// Mesh spacing parameters of a corner lobe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerSpacing {
    pub grading: f64,
    pub h_min: f64,
    pub h_max: f64,
}

/// Shape of one lobe: straight sides of length `side` at angles ±b0 and a
/// circular cap of radius `cap` centred on the axis, tangent to both sides.
#[derive(Debug, Clone, Copy)]
struct Lobe {
    b0: f64,
    side: f64,
    cap: f64,
    centre: f64,
}

impl Lobe {
    fn new(b0: f64, r_outer: f64) -> Self {
        Self {
            b0,
            side: r_outer,
            cap: r_outer * b0.tan(),
            centre: r_outer / b0.cos(),
        }
    }

    fn arc_len(&self) -> f64 {
        self.cap * (PI + 2.0 * self.b0)
    }

    fn perimeter(&self) -> f64 {
        2.0 * self.side + self.arc_len()
    }

    /// Point at arclength `s` from the origin, going out along the lower side.
    fn point(&self, s: f64) -> Vec2 {
        let arc = self.arc_len();
        if s <= self.side {
            Vec2::polar(s, -self.b0)
        } else if s <= self.side + arc {
            let phi = -(FRAC_PI_2 + self.b0) + (s - self.side) / self.cap;
            Vec2::new(self.centre, 0.0) + Vec2::polar(self.cap, phi)
        } else {
            Vec2::polar(self.perimeter() - s, self.b0)
        }
    }

    /// ∫ ds / h along one side from the origin to distance s, for
    /// h(s) = clamp(γ s, h_min, γ·cap).
    fn side_density(&self, s: f64, gamma: f64, h_min: f64) -> f64 {
        let s0 = h_min / gamma;
        let s1 = self.cap.max(s0);
        if s <= s0 {
            s / h_min
        } else if s <= s1 {
            s0 / h_min + (s / s0).ln() / gamma
        } else {
            s0 / h_min + (s1 / s0).ln() / gamma + (s - s1) / (gamma * s1)
        }
    }

    /// Cumulative node density from the origin to arclength s.
    fn density(&self, s: f64, gamma: f64, h_min: f64) -> f64 {
        let h_cap = (gamma * self.cap).max(h_min);
        let arc = self.arc_len();
        let side = self.side_density(self.side, gamma, h_min);
        if s <= self.side {
            self.side_density(s, gamma, h_min)
        } else if s <= self.side + arc {
            side + (s - self.side) / h_cap
        } else {
            2.0 * side + arc / h_cap - self.side_density(self.perimeter() - s, gamma, h_min)
        }
    }
}

fn corner_lobe(b0: f64, r_outer: f64, n_nodes: usize) -> Result<(Lobe, CornerSpacing)> {
    if !(b0 > 0.0 && b0 < FRAC_PI_4) {
        return Err(Error::OutOfRange {
            what: "b0",
            value: b0,
            lo: 0.0,
            hi: FRAC_PI_4,
        });
    }
    if !(r_outer > 0.0 && r_outer.is_finite()) {
        return Err(Error::Domain(format!(
            "r_outer must be positive, got {r_outer}"
        )));
    }
    if n_nodes < 32 || n_nodes % 2 != 0 {
        return Err(Error::Domain(format!(
            "n_nodes must be even and at least 32, got {n_nodes}"
        )));
    }
    let lobe = Lobe::new(b0, r_outer);
    let per_lobe = (n_nodes / 2) as f64;
    let h_min = DEFAULT_H_MIN * r_outer;
    let total = |g: f64| lobe.density(lobe.perimeter(), g, h_min);
    let (mut lo, mut hi): (f64, f64) = (1e-6, 10.0);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if total(mid) > per_lobe {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let grading = hi;
    Ok((
        lobe,
        CornerSpacing {
            grading,
            h_min,
            h_max: (grading * lobe.cap).max(h_min),
        },
    ))
}

/// Spacing parameters that [`make_corner_patch`] uses for the same arguments.
pub fn corner_spacing(b0: f64, r_outer: f64, n_nodes: usize) -> Result<CornerSpacing> {
    corner_lobe(b0, r_outer, n_nodes).map(|(_, s)| s)
}

/// Two-fold symmetric corner patch: two lobes of half-angle `b0` sharing the
/// vertex at the origin, each with straight sides of length `r_outer` and a
/// tangent circular cap. Nodes are graded geometrically toward the origin.
pub fn make_corner_patch(b0: f64, r_outer: f64, n_nodes: usize) -> Result<PatchState> {
    let (lobe, sp) = corner_lobe(b0, r_outer, n_nodes)?;
    let m = n_nodes / 2;
    let total = lobe.density(lobe.perimeter(), sp.grading, sp.h_min);
    let mut nodes = Vec::with_capacity(m);
    nodes.push(Vec2::ZERO);
    let mut s_lo = 0.0;
    for k in 1..m {
        let want = total * k as f64 / m as f64;
        let (mut a, mut b) = (s_lo, lobe.perimeter());
        for _ in 0..100 {
            let mid = 0.5 * (a + b);
            if lobe.density(mid, sp.grading, sp.h_min) < want {
                a = mid;
            } else {
                b = mid;
            }
        }
        s_lo = 0.5 * (a + b);
        nodes.push(lobe.point(s_lo));
    }
    let right = Contour::new(nodes, true);
    let left = right.half_turn();
    Ok(PatchState {
        t: 0.0,
        contours: vec![right, left],
    })
}
