//! Theorem-class decision from PT margins sampled over the asymptotic set.
//!
//! The margin `m(ρ) = λ_min(ρ^{T_B})` is concave along mixtures, so its
//! minimum over a convex set sits at extreme points (images of pure inputs)
//! while its maximum may be interior. Both are probed: fixed probe states,
//! random members, and a pattern search in each direction.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use super::{pure_projector, AsymptoticSet, AsymptoticsError, Cardinality, Representation};
use crate::ensemble::{sample_indexed, EnsembleSpec};
use crate::geometry::{self, RegionTag};
use crate::linalg::{self, CMatrix, CVector, I, ONE, ZERO};
use crate::state::{self, Bell, QState, Subsystem};

const SEARCH_EVALS: usize = 6000;
const HISTOGRAM_BINS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeMargin {
    pub probe: String,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub cardinality: Cardinality,
    pub representation: String,
    pub min_margin: f64,
    pub max_margin: f64,
    pub min_probe: String,
    pub max_probe: String,
    pub tol: f64,
    pub probes: Vec<ProbeMargin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremClass {
    pub class_id: u8,
    pub evidence: Evidence,
}

impl TheoremClass {
    /// Smallest distance from the evidence margins to the thresholds of the
    /// classes that were not chosen.
    pub fn separation(&self) -> f64 {
        let e = &self.evidence;
        let t = e.tol;
        match self.class_id {
            1 => e.min_margin - t,
            2 => t - e.min_margin.abs(),
            3 => -t - e.max_margin,
            4 => e.min_margin - t,
            6 => -t - e.max_margin,
            _ => (t - e.min_margin).min(e.max_margin + t),
        }
    }
}

fn margin_of(m: &CMatrix, dims: (usize, usize)) -> f64 {
    let pt = state::partial_transpose_matrix(m, dims.0, dims.1, Subsystem::B);
    linalg::min_hermitian_eigenvalue(&linalg::hermitize(&pt))
}

/// Compass search minimizing `f`, halving the step whenever no coordinate
/// move improves.
fn pattern_search<F: Fn(&[f64]) -> f64>(f: F, x0: Vec<f64>, step0: f64, min_step: f64, max_evals: usize) -> (Vec<f64>, f64) {
    let mut x = x0;
    let mut fx = f(&x);
    let mut step = step0;
    let mut evals = 1;
    while step > min_step && evals < max_evals {
        let mut improved = false;
        for j in 0..x.len() {
            for sign in [1.0, -1.0] {
                let mut cand = x.clone();
                cand[j] += sign * step;
                let fc = f(&cand);
                evals += 1;
                if fc < fx - 1e-15 {
                    x = cand;
                    fx = fc;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx)
}

struct Probe {
    name: String,
    input: Option<CVector>,
    state: QState,
}

fn single_qubit_probes() -> [(&'static str, [num_complex::Complex64; 2]); 4] {
    let h = linalg::real(FRAC_1_SQRT_2);
    [("0", [ONE, ZERO]), ("1", [ZERO, ONE]), ("+", [h, h]), ("+i", [h, I * h])]
}

fn fixed_inputs() -> Vec<(String, CVector)> {
    let singles = single_qubit_probes();
    let mut out = Vec::with_capacity(20);
    for (na, a) in &singles {
        for (nb, b) in &singles {
            out.push((format!("|{na},{nb}>"), state::product_ket(a, b)));
        }
    }
    for b in Bell::ALL {
        out.push((format!("|{}>", b.name()), b.ket()));
    }
    out
}

fn ket_from_params(x: &[f64]) -> CVector {
    CVector::from_iterator(x.len() / 2, x.chunks(2).map(|c| num_complex::Complex64::new(c[0], c[1])))
}

fn params_from_ket(psi: &CVector) -> Vec<f64> {
    psi.iter().flat_map(|z| [z.re, z.im]).collect()
}

/// Decide the theorem class of `a`. `n_probes` random pure inputs are drawn
/// from the stream `seed`.
pub fn classify_theorem_class(a: &AsymptoticSet, tol: f64, n_probes: usize, seed: u64) -> Result<TheoremClass, AsymptoticsError> {
    let dims = a.dims();
    if dims != (2, 2) {
        return Err(AsymptoticsError::UnsupportedDimension(dims.0, dims.1));
    }
    if !(tol > 0.0) {
        return Err(geometry::GeometryError::InvalidTolerance(tol).into());
    }
    if let Some(s) = a.singleton() {
        return classify_singleton(a, &s, tol);
    }

    let d = dims.0 * dims.1;
    let map = a.limit_map();
    let image = |rho: &CMatrix| linalg::hermitize(&linalg::unvectorize(&(map * linalg::vectorize(rho)), d));

    let mut probes: Vec<Probe> = Vec::new();
    for (name, psi) in fixed_inputs() {
        let s = a.limit_of(&QState::from_pure(&psi, dims.0, dims.1)?)?;
        probes.push(Probe { name: format!("image of {name}"), input: Some(psi), state: s });
    }
    probes.push(Probe {
        name: "image of identity/4".into(),
        input: None,
        state: a.limit_of(&QState::maximally_mixed(dims.0, dims.1))?,
    });
    let spec = EnsembleSpec::haar_pure(seed);
    for k in 0..n_probes as u64 {
        let input = sample_indexed(&spec, dims, k)?;
        probes.push(Probe { name: format!("image of random pure #{k}"), input: None, state: a.limit_of(&input)? });
    }

    let mut margins: Vec<ProbeMargin> =
        probes.iter().map(|p| ProbeMargin { probe: p.name.clone(), margin: geometry::min_pt_eigenvalue(&p.state) }).collect();
    let argmin = argext(&margins, |a, b| a < b);
    let argmax = argext(&margins, |a, b| a > b);

    match a.representation() {
        Representation::AffineFamily { reference, basis } => {
            margins.push(ProbeMargin { probe: "reference".into(), margin: geometry::min_pt_eigenvalue(reference) });
            let r = reference.matrix().clone();
            let coords = |m: &CMatrix| -> Vec<f64> { basis.iter().map(|b| linalg::hs_inner(b, &(m - &r)).re).collect() };
            let point = |x: &[f64]| project_along_ray(&r, basis, x);
            let margin_at = |x: &[f64]| margin_of(&point(x), dims);
            for (label, sign, start) in [("minimizer", 1.0, argmin), ("maximizer", -1.0, argmax)] {
                let starts = [vec![0.0; basis.len()], coords(probes[start].state.matrix())];
                let best = starts
                    .into_iter()
                    .map(|x0| pattern_search(|x| sign * margin_at(x), x0, 0.5, 1e-10, SEARCH_EVALS))
                    .min_by(|p, q| p.1.total_cmp(&q.1))
                    .expect("two starts");
                margins.push(ProbeMargin { probe: format!("affine local {label}"), margin: margin_at(&best.0) });
            }
        }
        Representation::ImageOfD { .. } => {
            // Minimum over pure inputs, starting at the worst fixed probe.
            let start = probes[argmin].input.clone().unwrap_or_else(|| fixed_inputs()[0].1.clone());
            let f = |x: &[f64]| {
                let psi = ket_from_params(x);
                if psi.norm() < 1e-12 {
                    return f64::INFINITY;
                }
                margin_of(&image(&pure_projector(&psi)), dims)
            };
            let (x, _) = pattern_search(f, params_from_ket(&start), 0.25, 1e-10, SEARCH_EVALS);
            margins.push(ProbeMargin { probe: "image local minimizer (pure input)".into(), margin: f(&x) });

            // Maximum over mixed inputs ρ = M M† / tr(M M†), from identity/4.
            let g = |x: &[f64]| {
                let m = CMatrix::from_iterator(d, d, x.chunks(2).map(|c| num_complex::Complex64::new(c[0], c[1])));
                let rho = &m * m.adjoint();
                let tr = rho.trace().re;
                if tr < 1e-12 {
                    return f64::INFINITY;
                }
                -margin_of(&image(&rho.unscale(tr)), dims)
            };
            let x0: Vec<f64> = linalg::identity(d).iter().flat_map(|z| [z.re, z.im]).collect();
            let (x, fx) = pattern_search(g, x0, 0.25, 1e-10, SEARCH_EVALS);
            debug_assert!(fx.is_finite() && x.len() == 2 * d * d);
            margins.push(ProbeMargin { probe: "image local maximizer (mixed input)".into(), margin: -fx });
        }
        Representation::Unique(_) => unreachable!("singletons handled above"),
    }

    decide_many(a, margins, tol)
}

/// `reference + t·Σ x_j B_j` with the largest `t ∈ [0, 1]` keeping the
/// result positive semidefinite.
fn project_along_ray(reference: &CMatrix, basis: &[CMatrix], x: &[f64]) -> CMatrix {
    let mut dir = CMatrix::zeros(reference.nrows(), reference.ncols());
    for (b, &c) in basis.iter().zip(x) {
        dir += b.scale(c);
    }
    let at = |t: f64| reference + dir.scale(t);
    if linalg::min_hermitian_eigenvalue(&at(1.0)) >= 0.0 {
        return at(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if linalg::min_hermitian_eigenvalue(&at(mid)) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(lo)
}

fn argext(margins: &[ProbeMargin], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, m) in margins.iter().enumerate() {
        if better(m.margin, margins[best].margin) {
            best = i;
        }
    }
    best
}

fn classify_singleton(a: &AsymptoticSet, s: &QState, tol: f64) -> Result<TheoremClass, AsymptoticsError> {
    let region = geometry::classify_region(s, tol)?;
    let m = region.margin;
    let probes = vec![ProbeMargin { probe: "asymptotic state".into(), margin: m }];
    if m.abs() > tol && m.abs() <= 2.0 * tol {
        return Err(AsymptoticsError::Inconclusive { min_margin: m, max_margin: m, histogram: histogram(&probes, tol) });
    }
    let class_id = match region.tag {
        RegionTag::DeepSeparable => 1,
        RegionTag::Boundary => 2,
        RegionTag::Entangled => 3,
    };
    Ok(TheoremClass {
        class_id,
        evidence: Evidence {
            cardinality: Cardinality::One,
            representation: a.representation().kind().into(),
            min_margin: m,
            max_margin: m,
            min_probe: probes[0].probe.clone(),
            max_probe: probes[0].probe.clone(),
            tol,
            probes,
        },
    })
}

fn decide_many(a: &AsymptoticSet, probes: Vec<ProbeMargin>, tol: f64) -> Result<TheoremClass, AsymptoticsError> {
    let lo = argext(&probes, |x, y| x < y);
    let hi = argext(&probes, |x, y| x > y);
    let (min, max) = (probes[lo].margin, probes[hi].margin);
    let near = |m: f64| m.abs() <= 2.0 * tol;
    let inconclusive = (near(min) && near(max)) || (min > tol && min <= 2.0 * tol) || (max < -tol && max >= -2.0 * tol);
    if inconclusive || !min.is_finite() || !max.is_finite() {
        return Err(AsymptoticsError::Inconclusive { min_margin: min, max_margin: max, histogram: histogram(&probes, tol) });
    }
    let class_id = if min > tol {
        4
    } else if max < -tol {
        6
    } else {
        5
    };
    Ok(TheoremClass {
        class_id,
        evidence: Evidence {
            cardinality: Cardinality::Many,
            representation: a.representation().kind().into(),
            min_margin: min,
            max_margin: max,
            min_probe: probes[lo].probe.clone(),
            max_probe: probes[hi].probe.clone(),
            tol,
            probes,
        },
    })
}

/// Counts over `HISTOGRAM_BINS` equal bins on `[−2·tol, 2·tol]`, plus one
/// open bin on each side.
fn histogram(probes: &[ProbeMargin], tol: f64) -> Vec<(f64, f64, usize)> {
    let lo = -2.0 * tol;
    let width = 4.0 * tol / HISTOGRAM_BINS as f64;
    let mut bins: Vec<(f64, f64, usize)> = Vec::with_capacity(HISTOGRAM_BINS + 2);
    bins.push((f64::NEG_INFINITY, lo, 0));
    for k in 0..HISTOGRAM_BINS {
        bins.push((lo + k as f64 * width, lo + (k + 1) as f64 * width, 0));
    }
    bins.push((2.0 * tol, f64::INFINITY, 0));
    for p in probes {
        let m = p.margin;
        let idx = if m < lo {
            0
        } else if m >= 2.0 * tol {
            HISTOGRAM_BINS + 1
        } else {
            1 + (((m - lo) / width) as usize).min(HISTOGRAM_BINS - 1)
        };
        bins[idx].2 += 1;
    }
    bins
}
