//! Parallel transport, geodesics and holonomy of `D`.
//!
//! Transport is integrated two ways: through the horizontal/vertical split
//! equations, which only need base data, and through the chart Christoffel
//! symbols of `D`. Both are fixed-step RK4.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lifted::{apply_curvature, FramedVector, LiftedSpace, PointJet, TotalPoint};
use crate::tensor::{lie_closure, matrix_log, span_rank};

pub const DEFAULT_ODE_STEP: f64 = 1e-3;
const BLOW_UP: f64 = 1e9;

type PathFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// One smooth piece of a curve, parametrised over `[0, 1]`.
#[derive(Clone)]
enum Piece {
    Line { from: Vec<f64>, to: Vec<f64> },
    Analytic { pos: PathFn, vel: PathFn },
}

impl Piece {
    fn position(&self, s: f64) -> Vec<f64> {
        match self {
            Piece::Line { from, to } => from.iter().zip(to).map(|(a, b)| a + s * (b - a)).collect(),
            Piece::Analytic { pos, .. } => pos(s),
        }
    }

    fn velocity(&self, s: f64) -> Vec<f64> {
        match self {
            Piece::Line { from, to } => from.iter().zip(to).map(|(a, b)| b - a).collect(),
            Piece::Analytic { vel, .. } => vel(s),
        }
    }

    fn reversed(&self) -> Piece {
        match self {
            Piece::Line { from, to } => Piece::Line {
                from: to.clone(),
                to: from.clone(),
            },
            Piece::Analytic { pos, vel } => {
                let (pos, vel) = (pos.clone(), vel.clone());
                Piece::Analytic {
                    pos: Arc::new(move |s| pos(1.0 - s)),
                    vel: Arc::new(move |s| vel(1.0 - s).into_iter().map(|v| -v).collect()),
                }
            }
        }
    }
}

/// A piecewise smooth curve in the chart of `M`, in `(x, ξ)` coordinates.
///
/// Pieces share the parameter interval `[0, 1]` equally; each piece is
/// integrated with its own steps so corners are never straddled.
#[derive(Clone)]
pub struct CurveInM {
    pieces: Vec<Piece>,
    dim: usize,
}

impl std::fmt::Debug for CurveInM {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CurveInM")
            .field("pieces", &self.pieces.len())
            .field("start", &self.start())
            .field("end", &self.end())
            .finish()
    }
}

impl CurveInM {
    pub fn line(from: &TotalPoint, to: &TotalPoint) -> Self {
        CurveInM {
            dim: 2 * from.dim(),
            pieces: vec![Piece::Line {
                from: from.chart(),
                to: to.chart(),
            }],
        }
    }

    /// Straight segments through the given chart points.
    pub fn polyline(points: &[TotalPoint]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Invalid("a polyline needs at least two points".into()));
        }
        let pieces = points
            .windows(2)
            .map(|w| Piece::Line {
                from: w[0].chart(),
                to: w[1].chart(),
            })
            .collect();
        Ok(CurveInM {
            pieces,
            dim: 2 * points[0].dim(),
        })
    }

    /// A curve `s ↦ pos(s)` on `[0, 1]` with velocity `vel(s)`, in chart coordinates.
    pub fn analytic(
        dim: usize,
        pos: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
        vel: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        CurveInM {
            dim,
            pieces: vec![Piece::Analytic {
                pos: Arc::new(pos),
                vel: Arc::new(vel),
            }],
        }
    }

    /// Coordinate rectangle in the `(xⁱ, xʲ)` plane with side `eps` based at `p`:
    /// `+eps·eᵢ`, then `+eps·eⱼ`, then back.
    pub fn rectangle(p: &TotalPoint, i: usize, j: usize, eps: f64) -> Self {
        let mut corners = vec![p.clone()];
        for (di, dj) in [(eps, 0.0), (eps, eps), (0.0, eps), (0.0, 0.0)] {
            let mut q = p.clone();
            q.x[i] += di;
            q.x[j] += dj;
            corners.push(q);
        }
        CurveInM::polyline(&corners).expect("five corners")
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &CurveInM) -> Self {
        let mut pieces = self.pieces.clone();
        pieces.extend(other.pieces.iter().cloned());
        CurveInM { pieces, dim: self.dim }
    }

    pub fn reversed(&self) -> Self {
        CurveInM {
            pieces: self.pieces.iter().rev().map(Piece::reversed).collect(),
            dim: self.dim,
        }
    }

    /// `γ · loop · γ⁻¹` for a path `γ` ending where `lp` starts.
    pub fn lasso(path: &CurveInM, lp: &CurveInM) -> Self {
        path.concat(lp).concat(&path.reversed())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let k = self.pieces.len();
        let u = t.clamp(0.0, 1.0) * k as f64;
        let i = (u.floor() as usize).min(k - 1);
        (i, u - i as f64)
    }

    pub fn position(&self, t: f64) -> TotalPoint {
        let (i, s) = self.locate(t);
        TotalPoint::from_chart(&self.pieces[i].position(s))
    }

    /// `d/dt` of the position, with `t` the global parameter.
    pub fn velocity(&self, t: f64) -> Vec<f64> {
        let (i, s) = self.locate(t);
        let k = self.pieces.len() as f64;
        self.pieces[i].velocity(s).into_iter().map(|v| v * k).collect()
    }

    pub fn start(&self) -> TotalPoint {
        TotalPoint::from_chart(&self.pieces[0].position(0.0))
    }

    pub fn end(&self) -> TotalPoint {
        TotalPoint::from_chart(&self.pieces[self.pieces.len() - 1].position(1.0))
    }

    pub fn closure_mismatch(&self) -> f64 {
        let (a, b) = (self.start().chart(), self.end().chart());
        a.iter().zip(&b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
    }

    /// Checks that sampled points keep `margin` from the base chart boundary.
    pub fn check_domain(&self, space: &LiftedSpace, margin: f64, samples: usize) -> Result<()> {
        for k in 0..=samples {
            let p = self.position(k as f64 / samples as f64);
            space.base().domain().check(&p.x, margin)?;
        }
        Ok(())
    }
}

/// Which coefficients drive transport and geodesic equations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportPath {
    /// Horizontal/vertical split equations with base data.
    Split,
    /// Chart Christoffel symbols of `D`.
    Chart,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportSettings {
    /// Parameter step; each curve piece gets `ceil(1/h)` steps.
    pub h_ode: f64,
    pub path: TransportPath,
    /// Also integrate with half the steps and report `|Δ|/15`.
    pub estimate_error: bool,
}

impl Default for TransportSettings {
    fn default() -> Self {
        TransportSettings {
            h_ode: DEFAULT_ODE_STEP,
            path: TransportPath::Split,
            estimate_error: false,
        }
    }
}

impl TransportSettings {
    pub fn with_path(mut self, path: TransportPath) -> Self {
        self.path = path;
        self
    }

    fn steps(&self) -> Result<usize> {
        if !(self.h_ode > 0.0 && self.h_ode.is_finite()) {
            return Err(Error::Invalid(format!("ODE step must be positive, got {}", self.h_ode)));
        }
        let n = (1.0 / self.h_ode).ceil();
        if n > 1e8 {
            return Err(Error::Invalid(format!("ODE step {} underflows", self.h_ode)));
        }
        Ok((n as usize).max(2))
    }
}

/// Base-vector and fiber components of a transported vector: `yⁱHᵢ + vₐ∂/∂ξₐ`.
pub type TransportState = FramedVector;

#[derive(Clone, Debug)]
pub struct Transported<T> {
    pub value: T,
    /// Richardson estimate of the integration error, when requested.
    pub error_estimate: Option<f64>,
}

/// Generator `K` of the linear transport ODE `Ṡ = −K S` in stacked `(y, v)`
/// frame coordinates.
fn split_generator(space: &LiftedSpace, p: &TotalPoint, vel: &[f64]) -> Result<DMatrix<f64>> {
    let n = space.n();
    let j = space.point_jet(&p.x)?;
    let xdot = &vel[..n];
    let xi = DVector::from_column_slice(&p.xi);
    let mut k = DMatrix::zeros(2 * n, 2 * n);
    for kk in 0..n {
        for jj in 0..n {
            k[(kk, jj)] = (0..n).map(|i| j.gamma[[kk, i, jj]] * xdot[i]).sum();
        }
    }
    let a = j.a_along(xdot);
    let mut e = vec![0.0; n];
    for jj in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[jj] = 1.0;
        let col = PointJet::contract(&j.psi, xdot, &e) * &xi;
        for c in 0..n {
            k[(n + c, jj)] = col[c];
            k[(n + c, n + jj)] = 0.0;
        }
    }
    k.view_mut((n, n), (n, n)).copy_from(&a);
    Ok(k)
}

/// `K_{λν} = C^λ_{μν}ż^μ` in chart coordinates.
fn chart_generator(space: &LiftedSpace, p: &TotalPoint, vel: &[f64]) -> Result<DMatrix<f64>> {
    let c = space.christoffels(p)?;
    let d = vel.len();
    Ok(DMatrix::from_fn(d, d, |l, nu| {
        (0..d).map(|m| c[[l, m, nu]] * vel[m]).sum()
    }))
}

fn rk4_linear(
    curve: &CurveInM,
    s0: &DMatrix<f64>,
    steps: usize,
    generator: &dyn Fn(&TotalPoint, &[f64]) -> Result<DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    let mut s = s0.clone();
    for piece in &curve.pieces {
        let h = 1.0 / steps as f64;
        let rhs = |u: f64, st: &DMatrix<f64>| -> Result<DMatrix<f64>> {
            let p = TotalPoint::from_chart(&piece.position(u));
            Ok(-(generator(&p, &piece.velocity(u))? * st))
        };
        for step in 0..steps {
            let u = step as f64 * h;
            let k1 = rhs(u, &s)?;
            let k2 = rhs(u + 0.5 * h, &(&s + &k1 * (0.5 * h)))?;
            let k3 = rhs(u + 0.5 * h, &(&s + &k2 * (0.5 * h)))?;
            let k4 = rhs(u + h, &(&s + &k3 * h))?;
            s += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        if !s.iter().all(|v| v.is_finite()) || s.amax() > BLOW_UP {
            return Err(Error::BlowUp { t: 1.0 });
        }
    }
    Ok(s)
}

/// Transports the columns of `s0` (stacked `(y, v)` frame coordinates at the
/// start) to the end of the curve.
pub fn transport_columns(
    space: &LiftedSpace,
    curve: &CurveInM,
    s0: &DMatrix<f64>,
    settings: &TransportSettings,
) -> Result<Transported<DMatrix<f64>>> {
    let n = space.n();
    if curve.dim() != 2 * n || s0.nrows() != 2 * n {
        return Err(Error::DimensionMismatch {
            expected: 2 * n,
            got: if curve.dim() != 2 * n { curve.dim() } else { s0.nrows() },
        });
    }
    let steps = settings.steps()?;
    let run = |steps: usize| -> Result<DMatrix<f64>> {
        match settings.path {
            TransportPath::Split => rk4_linear(curve, s0, steps, &|p, v| split_generator(space, p, v)),
            TransportPath::Chart => {
                let f0 = space.frame_matrix(&curve.start())?;
                let c0 = &f0 * s0;
                let c1 = rk4_linear(curve, &c0, steps, &|p, v| chart_generator(space, p, v))?;
                let f1 = space.frame_matrix(&curve.end())?;
                f1.lu()
                    .solve(&c1)
                    .ok_or_else(|| Error::Invalid("singular frame matrix".into()))
            }
        }
    };
    let value = run(steps)?;
    let error_estimate = if settings.estimate_error {
        let coarse = run((steps / 2).max(1))?;
        Some((&value - coarse).amax() / 15.0)
    } else {
        None
    };
    Ok(Transported { value, error_estimate })
}

/// Parallel transport of one framed vector along `curve`.
pub fn parallel_transport(
    space: &LiftedSpace,
    curve: &CurveInM,
    s0: &TransportState,
    settings: &TransportSettings,
) -> Result<Transported<TransportState>> {
    let col = DMatrix::from_column_slice(2 * space.n(), 1, &s0.stacked());
    let out = transport_columns(space, curve, &col, settings)?;
    Ok(Transported {
        value: FramedVector::from_stacked(out.value.as_slice()),
        error_estimate: out.error_estimate,
    })
}

/// Transport matrix in stacked `(y, v)` frame coordinates.
pub fn transport_matrix(space: &LiftedSpace, curve: &CurveInM, settings: &TransportSettings) -> Result<DMatrix<f64>> {
    let d = 2 * space.n();
    Ok(transport_columns(space, curve, &DMatrix::identity(d, d), settings)?.value)
}

/// Permutation from stacked `(y, v)` to `(v, y)` ordering.
pub fn vh_permutation(n: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        p[(i, n + i)] = 1.0;
        p[(n + i, i)] = 1.0;
    }
    p
}

/// Re-expresses a stacked-`(y, v)` matrix in the `(vertical, horizontal)` basis.
pub fn to_vh(m: &DMatrix<f64>) -> DMatrix<f64> {
    let p = vh_permutation(m.nrows() / 2);
    &p * m * &p
}

/// Holonomy of a closed curve, in the `(vertical, horizontal)` frame basis at
/// its basepoint.
pub fn loop_holonomy(space: &LiftedSpace, lp: &CurveInM, settings: &TransportSettings) -> Result<DMatrix<f64>> {
    let mismatch = lp.closure_mismatch();
    if mismatch > 1e-10 {
        return Err(Error::NotClosed { mismatch });
    }
    Ok(to_vh(&transport_matrix(space, lp, settings)?))
}

/// Blocks of a `(vertical, horizontal)` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Blocks {
    pub upper_left: DMatrix<f64>,
    /// `b`: vertical rows, horizontal columns.
    pub upper_right: DMatrix<f64>,
    /// Horizontal rows, vertical columns: zero when the vertical plane is kept.
    pub lower_left: DMatrix<f64>,
    /// `a`: the base part.
    pub lower_right: DMatrix<f64>,
}

pub fn blocks(m: &DMatrix<f64>) -> Blocks {
    let n = m.nrows() / 2;
    Blocks {
        upper_left: m.view((0, 0), (n, n)).into_owned(),
        upper_right: m.view((0, n), (n, n)).into_owned(),
        lower_left: m.view((n, 0), (n, n)).into_owned(),
        lower_right: m.view((n, n), (n, n)).into_owned(),
    }
}

/// Curvature endomorphisms `R(e_u, e_w)` at `p` for all frame pairs `u < w`,
/// in stacked `(y, v)` frame coordinates.
pub fn curvature_endomorphisms_at(space: &LiftedSpace, p: &TotalPoint) -> Result<Vec<DMatrix<f64>>> {
    let d = 2 * space.n();
    let r = space.curvature(p)?;
    let j = space.point_jet(&p.x)?;
    let f = LiftedSpace::frame_matrix_with(&j, p);
    let col = |k: usize| f.column(k).iter().copied().collect::<Vec<f64>>();
    let mut out = Vec::new();
    for u in 0..d {
        for w in (u + 1)..d {
            let mut m = DMatrix::zeros(d, d);
            for c in 0..d {
                let img = LiftedSpace::chart_to_frame_with(&j, p, &apply_curvature(&r, &col(u), &col(w), &col(c)));
                for (row, v) in img.stacked().into_iter().enumerate() {
                    m[(row, c)] = v;
                }
            }
            out.push(m);
        }
    }
    Ok(out)
}

/// The single endomorphism `R(e_u, e_w)` in stacked `(y, v)` frame coordinates.
pub fn curvature_endomorphism(space: &LiftedSpace, p: &TotalPoint, u: usize, w: usize) -> Result<DMatrix<f64>> {
    let d = 2 * space.n();
    let r = space.curvature(p)?;
    let j = space.point_jet(&p.x)?;
    let f = LiftedSpace::frame_matrix_with(&j, p);
    let col = |k: usize| f.column(k).iter().copied().collect::<Vec<f64>>();
    let mut m = DMatrix::zeros(d, d);
    for c in 0..d {
        let img = LiftedSpace::chart_to_frame_with(&j, p, &apply_curvature(&r, &col(u), &col(w), &col(c)));
        for (row, v) in img.stacked().into_iter().enumerate() {
            m[(row, c)] = v;
        }
    }
    Ok(m)
}

#[derive(Clone, Debug)]
pub struct HolonomySettings {
    pub transport: TransportSettings,
    /// Base offsets of the sample points generators are pulled back from.
    pub offsets: Vec<Vec<f64>>,
    /// Fiber points of the samples (absolute `ξ`).
    pub fibers: Vec<Vec<f64>>,
    /// Rectangle sides for the loop generators.
    pub loop_sides: Vec<f64>,
    /// Rank tolerance for the span/closure computation.
    pub rank_tol: f64,
    /// Relative tolerance on blocks for the structural flags.
    pub block_tol: f64,
    /// Generators smaller than this fraction of the largest are dropped.
    pub relative_floor: f64,
}

impl HolonomySettings {
    pub fn for_dim(n: usize) -> Self {
        let mut offsets = vec![vec![0.0; n]];
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 0.25;
            offsets.push(e.clone());
            e[i] = -0.2;
            e[(i + 1) % n] += 0.15;
            offsets.push(e);
        }
        let mut e1 = vec![0.0; n];
        e1[0] = 1.0;
        HolonomySettings {
            transport: TransportSettings {
                h_ode: 1e-2,
                ..TransportSettings::default()
            },
            offsets,
            fibers: vec![vec![0.0; n], e1],
            loop_sides: vec![0.05, 0.1],
            rank_tol: 1e-6,
            block_tol: 1e-5,
            relative_floor: 1e-6,
        }
    }
}

/// `R(∂ᵢ, ∂ⱼ)` for chart coordinate directions, as an endomorphism in the
/// `(vertical, horizontal)` frame basis: the quantity that `log(H)/ε²` of
/// [`CurveInM::rectangle`] approaches. Off the zero section `∂ᵢ` differs from
/// the frame vector `Hᵢ` by a vertical part.
pub fn loop_curvature(space: &LiftedSpace, p: &TotalPoint, i: usize, j: usize) -> Result<DMatrix<f64>> {
    let d = 2 * space.n();
    let r = space.curvature(p)?;
    let jet = space.point_jet(&p.x)?;
    let f = LiftedSpace::frame_matrix_with(&jet, p);
    let unit = |k: usize| {
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        v
    };
    let mut m = DMatrix::zeros(d, d);
    for c in 0..d {
        let col: Vec<f64> = f.column(c).iter().copied().collect();
        let img = LiftedSpace::chart_to_frame_with(&jet, p, &apply_curvature(&r, &unit(i), &unit(j), &col));
        for (row, v) in img.stacked().into_iter().enumerate() {
            m[(row, c)] = v;
        }
    }
    Ok(to_vh(&m))
}

/// Structural flags of an estimated holonomy algebra.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HolonomyFlags {
    /// All lower-left blocks vanish.
    pub preserves_vertical: bool,
    /// All upper-right blocks vanish as well.
    pub preserves_horizontal: bool,
    /// Upper-left block is `−aᵀ` for every element.
    pub dual_block_form: bool,
    /// Every `b` block is skew.
    pub fiber_block_skew: bool,
    /// Every `a` block is nilpotent.
    pub base_block_nilpotent: bool,
    pub base_block_dim: usize,
    pub fiber_block_dim: usize,
    /// `dual_block_form && fiber_block_skew`.
    pub metric_block_form: bool,
    pub max_lower_left: f64,
    pub max_upper_right: f64,
}

#[derive(Clone, Debug)]
pub struct HolonomyEstimate {
    pub basepoint: TotalPoint,
    /// Orthonormal basis in the `(vertical, horizontal)` frame basis.
    pub basis: Vec<DMatrix<f64>>,
    pub flags: HolonomyFlags,
    pub generator_count: usize,
}

impl HolonomyEstimate {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }
}

pub fn holonomy_flags(basis: &[DMatrix<f64>], rank_tol: f64, block_tol: f64) -> HolonomyFlags {
    let scale = basis
        .iter()
        .map(|m| m.amax())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let tol = block_tol * scale;
    let bl: Vec<Blocks> = basis.iter().map(blocks).collect();
    let max_lower_left = bl.iter().map(|b| b.lower_left.amax()).fold(0.0, f64::max);
    let max_upper_right = bl.iter().map(|b| b.upper_right.amax()).fold(0.0, f64::max);
    let dual = bl
        .iter()
        .all(|b| (&b.upper_left + b.lower_right.transpose()).amax() <= tol);
    let skew = bl
        .iter()
        .all(|b| (&b.upper_right + b.upper_right.transpose()).amax() <= tol);
    let nilpotent = bl.iter().all(|b| {
        let n = b.lower_right.nrows();
        let mut p = DMatrix::identity(n, n);
        for _ in 0..n {
            p = &p * &b.lower_right;
        }
        p.amax() <= tol
    });
    let a: Vec<DMatrix<f64>> = bl.iter().map(|b| b.lower_right.clone()).collect();
    let b: Vec<DMatrix<f64>> = bl.iter().map(|b| b.upper_right.clone()).collect();
    HolonomyFlags {
        preserves_vertical: max_lower_left <= tol,
        preserves_horizontal: max_lower_left <= tol && max_upper_right <= tol,
        dual_block_form: dual,
        fiber_block_skew: skew,
        base_block_nilpotent: nilpotent,
        base_block_dim: span_rank(&a, rank_tol),
        fiber_block_dim: span_rank(&b, rank_tol),
        metric_block_form: dual && skew,
        max_lower_left,
        max_upper_right,
    }
}

/// Estimates the holonomy algebra at `basepoint`.
///
/// Generators: curvature endomorphisms at the basepoint, curvature at sample
/// points pulled back along straight chart segments, and `log(H)/ε²` of small
/// coordinate rectangles (lassoed from the samples). The span is then closed
/// under brackets.
pub fn holonomy_algebra(
    space: &LiftedSpace,
    basepoint: &TotalPoint,
    settings: &HolonomySettings,
) -> Result<HolonomyEstimate> {
    let n = space.n();
    let mut gens: Vec<DMatrix<f64>> = Vec::new();
    for m in curvature_endomorphisms_at(space, basepoint)? {
        gens.push(to_vh(&m));
    }
    for off in &settings.offsets {
        for xi in &settings.fibers {
            let q = TotalPoint::new(basepoint.x.iter().zip(off).map(|(a, b)| a + b).collect(), xi.clone());
            if !space.base().domain().contains(&q.x, 8.0 * space.fd_step() + 0.1) {
                continue;
            }
            let path = CurveInM::line(basepoint, &q);
            let t = if q == *basepoint {
                DMatrix::identity(2 * n, 2 * n)
            } else {
                transport_matrix(space, &path, &settings.transport)?
            };
            let Some(t_inv) = t.clone().try_inverse() else {
                continue;
            };
            for m in curvature_endomorphisms_at(space, &q)? {
                gens.push(to_vh(&(&t_inv * m * &t)));
            }
            for &eps in &settings.loop_sides {
                for i in 0..n {
                    for j in (i + 1)..n {
                        let rect = CurveInM::rectangle(&q, i, j, eps);
                        let lp = if q == *basepoint {
                            rect
                        } else {
                            CurveInM::lasso(&path, &rect)
                        };
                        let h = loop_holonomy(space, &lp, &settings.transport)?;
                        if let Ok(l) = matrix_log(&h) {
                            gens.push(l / (eps * eps));
                        }
                    }
                }
            }
        }
    }
    let largest = gens.iter().map(|g| g.norm()).fold(0.0, f64::max);
    let floor = (settings.relative_floor * largest).max(settings.rank_tol);
    let kept: Vec<DMatrix<f64>> = gens.into_iter().filter(|g| g.norm() > floor).collect();
    let generator_count = kept.len();
    let basis = lie_closure(&kept, settings.rank_tol)?;
    let flags = holonomy_flags(&basis, settings.rank_tol, settings.block_tol);
    Ok(HolonomyEstimate {
        basepoint: basepoint.clone(),
        basis,
        flags,
        generator_count,
    })
}

/// `(max |∇̌Ř|, max |DR|)` over the sample points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SymmetricSpaceReport {
    pub max_nabla_base_curvature: f64,
    pub max_nabla_curvature: f64,
}

pub fn symmetric_space_report(space: &LiftedSpace, points: &[TotalPoint]) -> Result<SymmetricSpaceReport> {
    let mut rep = SymmetricSpaceReport {
        max_nabla_base_curvature: 0.0,
        max_nabla_curvature: 0.0,
    };
    for p in points {
        rep.max_nabla_base_curvature = rep
            .max_nabla_base_curvature
            .max(space.base().nabla_curvature(&p.x)?.max_abs());
        rep.max_nabla_curvature = rep.max_nabla_curvature.max(space.nabla_curvature(p)?.max_abs());
    }
    Ok(rep)
}

/// Sampled geodesic: parameter values, chart points and framed velocities.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<TotalPoint>,
    /// `(ẋ, w)` with `w = ξ̇ + A(ẋ)ξ`.
    pub velocities: Vec<FramedVector>,
}

impl Trajectory {
    pub fn last(&self) -> Option<(&TotalPoint, &FramedVector)> {
        Some((self.points.last()?, self.velocities.last()?))
    }

    /// CSV rows `t,x1..xn,xi1..xin,y1..yn,w1..wn`.
    pub fn to_csv(&self) -> String {
        let n = self.points.first().map_or(0, |p| p.dim());
        let mut s = String::from("t");
        for (tag, _) in [("x", 0), ("xi", 0), ("y", 0), ("w", 0)] {
            for i in 1..=n {
                s.push_str(&format!(",{tag}{i}"));
            }
        }
        s.push('\n');
        for ((t, p), v) in self.times.iter().zip(&self.points).zip(&self.velocities) {
            s.push_str(&format!("{t}"));
            for x in p.x.iter().chain(&p.xi).chain(&v.y).chain(&v.v) {
                s.push_str(&format!(",{x}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Integrates the geodesic of `D` from `p0` with framed initial velocity `w0`
/// over `[0, tspan]`, recording every `record_every`-th step.
pub fn geodesic(
    space: &LiftedSpace,
    p0: &TotalPoint,
    w0: &FramedVector,
    tspan: f64,
    settings: &TransportSettings,
    record_every: usize,
) -> Result<Trajectory> {
    let n = space.n();
    if p0.dim() != n || w0.y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: p0.dim(),
        });
    }
    if !(tspan.is_finite() && tspan >= 0.0) {
        return Err(Error::Invalid(format!("time span must be non-negative, got {tspan}")));
    }
    let h = settings.h_ode;
    settings.steps()?;
    let steps = ((tspan / h).ceil() as usize).max(1);
    let h = tspan / steps as f64;
    let record_every = record_every.max(1);

    // Split state (x, ξ, y, w); chart state (x, ξ, ż).
    let mut state = match settings.path {
        TransportPath::Split => [p0.x.clone(), p0.xi.clone(), w0.y.clone(), w0.v.clone()].concat(),
        TransportPath::Chart => [p0.chart(), space.frame_to_chart(p0, w0)?].concat(),
    };
    let rhs = |s: &[f64]| -> Result<Vec<f64>> {
        let p = TotalPoint::new(s[..n].to_vec(), s[n..2 * n].to_vec());
        match settings.path {
            TransportPath::Split => {
                let j = space.point_jet(&p.x)?;
                let y = &s[2 * n..3 * n];
                let w = DVector::from_column_slice(&s[3 * n..]);
                let xi = DVector::from_column_slice(&p.xi);
                let a = j.a_along(y);
                let mut out = Vec::with_capacity(4 * n);
                out.extend_from_slice(y);
                out.extend((&w - &a * &xi).iter());
                for k in 0..n {
                    let mut acc = 0.0;
                    for i in 0..n {
                        for jj in 0..n {
                            acc += j.gamma[[k, i, jj]] * y[i] * y[jj];
                        }
                    }
                    out.push(-acc);
                }
                let wdot = -(&a * &w) - PointJet::contract(&j.psi, y, y) * &xi;
                out.extend(wdot.iter());
                Ok(out)
            }
            TransportPath::Chart => {
                let c = space.christoffels(&p)?;
                let zd = &s[2 * n..];
                let d = 2 * n;
                let mut out = zd.to_vec();
                for l in 0..d {
                    let mut acc = 0.0;
                    for m in 0..d {
                        for nu in 0..d {
                            acc += c[[l, m, nu]] * zd[m] * zd[nu];
                        }
                    }
                    out.push(-acc);
                }
                Ok(out)
            }
        }
    };
    let mut traj = Trajectory::default();
    let record = |t: f64, s: &[f64], traj: &mut Trajectory| -> Result<()> {
        let p = TotalPoint::new(s[..n].to_vec(), s[n..2 * n].to_vec());
        let v = match settings.path {
            TransportPath::Split => FramedVector {
                y: s[2 * n..3 * n].to_vec(),
                v: s[3 * n..].to_vec(),
            },
            TransportPath::Chart => space.chart_to_frame(&p, &s[2 * n..])?,
        };
        traj.times.push(t);
        traj.points.push(p);
        traj.velocities.push(v);
        Ok(())
    };
    record(0.0, &state, &mut traj)?;
    let axpy = |a: &[f64], k: &[f64], c: f64| -> Vec<f64> { a.iter().zip(k).map(|(x, y)| x + c * y).collect() };
    for step in 0..steps {
        let k1 = rhs(&state)?;
        let k2 = rhs(&axpy(&state, &k1, 0.5 * h))?;
        let k3 = rhs(&axpy(&state, &k2, 0.5 * h))?;
        let k4 = rhs(&axpy(&state, &k3, h))?;
        for i in 0..state.len() {
            state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t = (step + 1) as f64 * h;
        if state.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP) {
            return Err(Error::BlowUp { t });
        }
        if (step + 1) % record_every == 0 || step + 1 == steps {
            record(t, &state, &mut traj)?;
        }
    }
    Ok(traj)
}
