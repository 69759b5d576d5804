//! Named terminal data and sources with machine-checked hypothesis metadata.
//!
//! The catalog is closed: configs select entries by name plus scalar
//! parameters. Every metadata claim (Lipschitz constant, one-sided Laplacian
//! bound, source conditions) is re-checked against the closed-form evaluators
//! on a probe grid when an entry is resolved for a box, so a problem can only
//! be assembled from data whose hypotheses actually hold there.

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use std::sync::Arc;

pub const TERMINAL_NAMES: &[&str] = &[
    "constant",
    "kink",
    "concave_bump",
    "cos",
    "smooth_ramp",
    "cos2d",
    "radial_bump",
];
pub const SOURCE_NAMES: &[&str] = &["zero", "constant_source", "cos_source"];

/// Optional scalar parameters accepted by catalog entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatumParams {
    pub center: Option<f64>,
    pub amplitude: Option<f64>,
}

/// A bound profile in time: value(t), running sup and integral over [0, T].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeProfile {
    Zero,
    Constant(f64),
    /// value(t) = slope * t
    Linear(f64),
}

impl TimeProfile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Zero => 0.0,
            TimeProfile::Constant(c) => c,
            TimeProfile::Linear(k) => k * t,
        }
    }

    pub fn sup_on(&self, horizon: f64) -> f64 {
        match *self {
            TimeProfile::Zero => 0.0,
            TimeProfile::Constant(c) => c.max(0.0),
            TimeProfile::Linear(k) => (k * horizon).max(0.0),
        }
    }

    pub fn integral_on(&self, horizon: f64) -> f64 {
        match *self {
            TimeProfile::Zero => 0.0,
            TimeProfile::Constant(c) => c * horizon,
            TimeProfile::Linear(k) => 0.5 * k * horizon * horizon,
        }
    }
}

type SpatialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type SpatialVecFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type SpaceTimeFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// A terminal datum bound to a box, with verified metadata.
#[derive(Clone)]
pub struct Terminal {
    pub name: String,
    pub extents: Vec<[f64; 2]>,
    eval: SpatialFn,
    grad: Option<SpatialVecFn>,
    lap: Option<SpatialFn>,
    /// Verified Lipschitz constant on the box.
    pub lipschitz: Option<f64>,
    /// Verified bound on (Laplacian)^+; `None` means unbounded/unclaimed.
    pub delta_plus_bound: Option<f64>,
    /// Verified: the datum has zero normal derivative on every face.
    ///
    /// Data without this property reflect into a crease whose positive
    /// Laplacian sheet breaks one-sided second-order bounds near the terminal
    /// time, so the semi-superharmonic certificates demand it.
    pub normal_compatible: bool,
}

impl std::fmt::Debug for Terminal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Terminal")
            .field("name", &self.name)
            .field("lipschitz", &self.lipschitz)
            .field("delta_plus_bound", &self.delta_plus_bound)
            .finish()
    }
}

impl Terminal {
    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn laplacian_at(&self, x: &[f64]) -> Option<f64> {
        self.lap.as_ref().map(|l| l(x))
    }

    /// Sample onto a grid sharing the bound box.
    pub fn sample(&self, grid: &Arc<Grid>) -> Result<ScalarField> {
        check_box(&self.name, &self.extents, grid)?;
        Ok(ScalarField::sample(grid.clone(), |x| (self.eval)(x)))
    }

    /// Test-only escape hatch for manufactured solutions: no metadata claims.
    pub fn custom(
        name: &str,
        extents: &[[f64; 2]],
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Terminal {
        Terminal {
            name: name.to_string(),
            extents: extents.to_vec(),
            eval: Arc::new(eval),
            grad: None,
            lap: None,
            lipschitz: None,
            delta_plus_bound: None,
            normal_compatible: false,
        }
    }
}

/// A source term f(x, t) bound to a box and horizon, with verified metadata.
#[derive(Clone)]
pub struct Source {
    pub name: String,
    pub extents: Vec<[f64; 2]>,
    pub horizon: f64,
    eval: SpaceTimeFn,
    /// Verified bound: Laplacian of f(., t) <= cf(t) everywhere in the box.
    pub cf: Option<TimeProfile>,
    /// Verified: outward normal derivative of f >= 0 on every face.
    pub normal_nonneg: bool,
    /// Verified sup_x |Df(x, t)| <= profile(t).
    pub grad_sup: Option<TimeProfile>,
}

impl std::fmt::Debug for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Source")
            .field("name", &self.name)
            .field("cf", &self.cf)
            .field("normal_nonneg", &self.normal_nonneg)
            .finish()
    }
}

impl Source {
    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        (self.eval)(x, t)
    }

    /// Sample f(., t) onto a grid sharing the bound box.
    pub fn sample(&self, grid: &Arc<Grid>, t: f64) -> Result<Vec<f64>> {
        check_box(&self.name, &self.extents, grid)?;
        Ok((0..grid.total_cells())
            .map(|k| (self.eval)(&grid.position(k), t))
            .collect())
    }

    pub fn custom(
        name: &str,
        extents: &[[f64; 2]],
        horizon: f64,
        eval: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    ) -> Source {
        Source {
            name: name.to_string(),
            extents: extents.to_vec(),
            horizon,
            eval: Arc::new(eval),
            cf: None,
            normal_nonneg: false,
            grad_sup: None,
        }
    }
}

fn check_box(name: &str, extents: &[[f64; 2]], grid: &Grid) -> Result<()> {
    if extents != grid.extents() {
        return Err(Error::Compatibility(format!(
            "{name:?} is bound to box {extents:?}, grid covers {:?}",
            grid.extents()
        )));
    }
    Ok(())
}

/// Resolve a named terminal datum for a box and verify its metadata.
pub fn terminal(name: &str, params: &DatumParams, extents: &[[f64; 2]]) -> Result<Terminal> {
    let dim = extents.len();
    let amp = params.amplitude.unwrap_or(1.0);
    let [a, b] = extents[0];
    let width = b - a;
    let center = params.center.unwrap_or(0.5 * (a + b));
    if center < a || center > b {
        return Err(Error::Input(format!("center {center} outside [{a}, {b}]")));
    }

    let entry = match (name, dim) {
        ("constant", _) => Terminal {
            name: name.into(),
            extents: extents.to_vec(),
            eval: Arc::new(move |_: &[f64]| amp),
            grad: Some(Arc::new(move |x: &[f64]| vec![0.0; x.len()])),
            lap: Some(Arc::new(|_: &[f64]| 0.0)),
            lipschitz: Some(0.0),
            delta_plus_bound: Some(0.0),
            normal_compatible: true,
        },
        ("kink", 1) => Terminal {
            name: name.into(),
            extents: extents.to_vec(),
            eval: Arc::new(move |x: &[f64]| amp * (x[0] - center).abs()),
            grad: Some(Arc::new(move |x: &[f64]| {
                vec![if x[0] == center {
                    0.0
                } else {
                    amp * (x[0] - center).signum()
                }]
            })),
            // distributional: +2 amp * delta at the kink
            lap: None,
            lipschitz: Some(amp.abs()),
            delta_plus_bound: if amp > 0.0 { None } else { Some(0.0) },
            normal_compatible: false,
        },
        ("concave_bump", 1) => {
            let reach = (center - a).max(b - center);
            Terminal {
                name: name.into(),
                extents: extents.to_vec(),
                eval: Arc::new(move |x: &[f64]| -amp * (x[0] - center) * (x[0] - center)),
                grad: Some(Arc::new(move |x: &[f64]| {
                    vec![-2.0 * amp * (x[0] - center)]
                })),
                lap: Some(Arc::new(move |_: &[f64]| -2.0 * amp)),
                lipschitz: Some(2.0 * amp.abs() * reach),
                delta_plus_bound: Some((-2.0 * amp).max(0.0)),
                normal_compatible: false,
            }
        }
        ("cos", 1) => {
            let k = std::f64::consts::PI / width;
            Terminal {
                name: name.into(),
                extents: extents.to_vec(),
                eval: Arc::new(move |x: &[f64]| amp * (k * (x[0] - a)).cos()),
                grad: Some(Arc::new(move |x: &[f64]| {
                    vec![-amp * k * (k * (x[0] - a)).sin()]
                })),
                lap: Some(Arc::new(move |x: &[f64]| {
                    -amp * k * k * (k * (x[0] - a)).cos()
                })),
                lipschitz: Some(amp.abs() * k),
                delta_plus_bound: Some(amp.abs() * k * k),
                normal_compatible: true,
            }
        }
        ("smooth_ramp", 1) => {
            // u'' = amp * sin(2 pi (x-a)/w): zero slope at both faces,
            // (u'')^+ bounded by amp.
            let k = 2.0 * std::f64::consts::PI / width;
            Terminal {
                name: name.into(),
                extents: extents.to_vec(),
                eval: Arc::new(move |x: &[f64]| {
                    let s = x[0] - a;
                    amp * (s / k - (k * s).sin() / (k * k))
                }),
                grad: Some(Arc::new(move |x: &[f64]| {
                    vec![amp * (1.0 - (k * (x[0] - a)).cos()) / k]
                })),
                lap: Some(Arc::new(move |x: &[f64]| amp * (k * (x[0] - a)).sin())),
                lipschitz: Some(2.0 * amp.abs() / k),
                delta_plus_bound: Some(amp.abs()),
                normal_compatible: true,
            }
        }
        ("cos2d", 2) => {
            let [ay, by] = extents[1];
            let kx = std::f64::consts::PI / width;
            let ky = std::f64::consts::PI / (by - ay);
            Terminal {
                name: name.into(),
                extents: extents.to_vec(),
                eval: Arc::new(move |x: &[f64]| {
                    amp * (kx * (x[0] - a)).cos() * (ky * (x[1] - ay)).cos()
                }),
                grad: Some(Arc::new(move |x: &[f64]| {
                    let (cx, sx) = ((kx * (x[0] - a)).cos(), (kx * (x[0] - a)).sin());
                    let (cy, sy) = ((ky * (x[1] - ay)).cos(), (ky * (x[1] - ay)).sin());
                    vec![-amp * kx * sx * cy, -amp * ky * cx * sy]
                })),
                lap: Some(Arc::new(move |x: &[f64]| {
                    -amp * (kx * kx + ky * ky) * (kx * (x[0] - a)).cos() * (ky * (x[1] - ay)).cos()
                })),
                lipschitz: Some(amp.abs() * kx.max(ky)),
                delta_plus_bound: Some(amp.abs() * (kx * kx + ky * ky)),
                normal_compatible: true,
            }
        }
        ("radial_bump", 2) => {
            let [ay, by] = extents[1];
            let cx = 0.5 * (a + b);
            let cy = 0.5 * (ay + by);
            let r_max = 0.25 * width.min(by - ay);
            let bump = move |x: &[f64]| {
                let s = (x[0] - cx).powi(2) + (x[1] - cy).powi(2);
                let r2 = r_max * r_max;
                if s >= r2 {
                    0.0
                } else {
                    amp * (-s / (r2 - s)).exp()
                }
            };
            let grad = move |x: &[f64]| {
                let dx = x[0] - cx;
                let dy = x[1] - cy;
                let s = dx * dx + dy * dy;
                let r2 = r_max * r_max;
                if s >= r2 {
                    return vec![0.0, 0.0];
                }
                let u = amp * (-s / (r2 - s)).exp();
                let g = -r2 / ((r2 - s) * (r2 - s));
                vec![u * g * 2.0 * dx, u * g * 2.0 * dy]
            };
            let lap = move |x: &[f64]| {
                let dx = x[0] - cx;
                let dy = x[1] - cy;
                let s = dx * dx + dy * dy;
                let r2 = r_max * r_max;
                if s >= r2 {
                    return 0.0;
                }
                let u = amp * (-s / (r2 - s)).exp();
                let g = -r2 / ((r2 - s) * (r2 - s));
                let dg = -2.0 * r2 / ((r2 - s) * (r2 - s) * (r2 - s));
                u * (4.0 * s * g * g + 4.0 * s * dg + 4.0 * g)
            };
            Terminal {
                name: name.into(),
                extents: extents.to_vec(),
                eval: Arc::new(bump),
                grad: Some(Arc::new(grad)),
                lap: Some(Arc::new(lap)),
                lipschitz: Some(2.25 * amp.abs() / r_max),
                delta_plus_bound: Some(21.0 * amp.abs() / (r_max * r_max)),
                normal_compatible: true,
            }
        }
        (n, d) if TERMINAL_NAMES.contains(&n) => {
            return Err(Error::ArityMismatch {
                name: n.into(),
                entry_dim: if d == 1 { 2 } else { 1 },
                grid_dim: d,
            })
        }
        _ => {
            return Err(Error::UnknownName {
                kind: "terminal datum",
                name: name.into(),
                available: TERMINAL_NAMES.join(", "),
            })
        }
    };
    verify_terminal(&entry)?;
    Ok(entry)
}

/// Resolve a named source for a box and horizon and verify its metadata.
pub fn source(
    name: &str,
    params: &DatumParams,
    extents: &[[f64; 2]],
    horizon: f64,
) -> Result<Source> {
    let amp = params.amplitude.unwrap_or(1.0);
    let [a, b] = extents[0];
    let width = b - a;

    let entry = match name {
        "zero" => Source {
            name: name.into(),
            extents: extents.to_vec(),
            horizon,
            eval: Arc::new(|_: &[f64], _| 0.0),
            cf: Some(TimeProfile::Zero),
            normal_nonneg: true,
            grad_sup: Some(TimeProfile::Zero),
        },
        "constant_source" => Source {
            name: name.into(),
            extents: extents.to_vec(),
            horizon,
            eval: Arc::new(move |_: &[f64], _| amp),
            cf: Some(TimeProfile::Zero),
            normal_nonneg: true,
            grad_sup: Some(TimeProfile::Zero),
        },
        "cos_source" => {
            if extents.len() != 1 {
                return Err(Error::ArityMismatch {
                    name: name.into(),
                    entry_dim: 1,
                    grid_dim: extents.len(),
                });
            }
            // f = -amp * t * cos(pi (x-a)/w): Laplacian = amp t k^2 cos <= amp k^2 t,
            // normal derivative vanishes on both faces.
            let k = std::f64::consts::PI / width;
            Source {
                name: name.into(),
                extents: extents.to_vec(),
                horizon,
                eval: Arc::new(move |x: &[f64], t: f64| -amp * t * (k * (x[0] - a)).cos()),
                cf: Some(TimeProfile::Linear(amp * k * k)),
                normal_nonneg: true,
                grad_sup: Some(TimeProfile::Linear(amp * k)),
            }
        }
        _ => {
            return Err(Error::UnknownName {
                kind: "source",
                name: name.into(),
                available: SOURCE_NAMES.join(", "),
            })
        }
    };
    verify_source(&entry, a, b, amp, width)?;
    Ok(entry)
}

const PROBE_TOL: f64 = 1e-8;

fn probe_points(extents: &[[f64; 2]]) -> Vec<Vec<f64>> {
    match extents.len() {
        1 => {
            let [a, b] = extents[0];
            (0..1024)
                .map(|i| vec![a + (b - a) * (i as f64 + 0.5) / 1024.0])
                .collect()
        }
        _ => {
            let [ax, bx] = extents[0];
            let [ay, by] = extents[1];
            let mut pts = Vec::with_capacity(33 * 33);
            for j in 0..33 {
                for i in 0..33 {
                    pts.push(vec![
                        ax + (bx - ax) * (i as f64 + 0.5) / 33.0,
                        ay + (by - ay) * (j as f64 + 0.5) / 33.0,
                    ]);
                }
            }
            pts
        }
    }
}

fn verify_terminal(entry: &Terminal) -> Result<()> {
    let pts = probe_points(&entry.extents);
    if let (Some(lip), Some(grad)) = (entry.lipschitz, entry.grad.as_ref()) {
        for p in &pts {
            let g = grad(p);
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > lip + PROBE_TOL {
                return Err(Error::CatalogVerification {
                    name: entry.name.clone(),
                    detail: format!("|grad| = {norm} exceeds declared Lipschitz {lip} at {p:?}"),
                });
            }
        }
    }
    if let (Some(m0), Some(lap)) = (entry.delta_plus_bound, entry.lap.as_ref()) {
        for p in &pts {
            let l = lap(p);
            if l > m0 + PROBE_TOL {
                return Err(Error::CatalogVerification {
                    name: entry.name.clone(),
                    detail: format!("Laplacian {l} exceeds declared bound {m0} at {p:?}"),
                });
            }
        }
    }
    if entry.normal_compatible {
        let grad = entry
            .grad
            .as_ref()
            .ok_or_else(|| Error::CatalogVerification {
                name: entry.name.clone(),
                detail: "compatibility claim needs a closed-form gradient".into(),
            })?;
        for axis in 0..entry.extents.len() {
            for side in 0..2 {
                for frac in [0.05, 0.3, 0.55, 0.8, 0.95] {
                    let mut p: Vec<f64> = entry
                        .extents
                        .iter()
                        .map(|&[lo, hi]| lo + frac * (hi - lo))
                        .collect();
                    p[axis] = entry.extents[axis][side];
                    let g = grad(&p)[axis];
                    if g.abs() > PROBE_TOL {
                        return Err(Error::CatalogVerification {
                            name: entry.name.clone(),
                            detail: format!("face slope {g} at {p:?} breaks compatibility claim"),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

fn verify_source(entry: &Source, a: f64, b: f64, amp: f64, width: f64) -> Result<()> {
    let _ = (amp, width);
    let pts = probe_points(&entry.extents);
    let times: Vec<f64> = (0..=8).map(|i| entry.horizon * i as f64 / 8.0).collect();
    let h = 1e-6 * (b - a);
    if let Some(cf) = entry.cf {
        for t in &times {
            for p in &pts {
                // second central difference per axis as the Laplacian probe
                let mut lap = 0.0;
                for axis in 0..entry.extents.len() {
                    let mut fwd = p.clone();
                    let mut bwd = p.clone();
                    fwd[axis] += h;
                    bwd[axis] -= h;
                    lap += ((entry.eval)(&fwd, *t) - 2.0 * (entry.eval)(p, *t)
                        + (entry.eval)(&bwd, *t))
                        / (h * h);
                }
                if lap > cf.value(*t) + 1e-3 {
                    return Err(Error::CatalogVerification {
                        name: entry.name.clone(),
                        detail: format!(
                            "Laplacian {lap} exceeds c_f({t}) = {} at {p:?}",
                            cf.value(*t)
                        ),
                    });
                }
            }
        }
    }
    if entry.normal_nonneg {
        for t in &times {
            for face in 0..2 * entry.extents.len() {
                let axis = face / 2;
                let outward_hi = face % 2 == 1;
                let boundary = if outward_hi {
                    entry.extents[axis][1]
                } else {
                    entry.extents[axis][0]
                };
                // sample a few points on the face
                for frac in [0.1, 0.35, 0.6, 0.85] {
                    let mut p: Vec<f64> = entry
                        .extents
                        .iter()
                        .map(|&[lo, hi]| lo + frac * (hi - lo))
                        .collect();
                    p[axis] = boundary;
                    let step = if outward_hi { -h } else { h };
                    let mut p1 = p.clone();
                    let mut p2 = p.clone();
                    p1[axis] += step;
                    p2[axis] += 2.0 * step;
                    // second-order one-sided outward derivative
                    let dnu = (3.0 * (entry.eval)(&p, *t) - 4.0 * (entry.eval)(&p1, *t)
                        + (entry.eval)(&p2, *t))
                        / (2.0 * h);
                    if dnu < -1e-6 {
                        return Err(Error::CatalogVerification {
                            name: entry.name.clone(),
                            detail: format!("normal derivative {dnu} < 0 on face {face} at t={t}"),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}
