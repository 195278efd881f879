//! Independent straight-line recomputation of every frozen numeric fixture.
//!
//! Nothing in this module calls into the library. Logistic fits use a hand-rolled
//! damped Newton iteration, linear fits solve their normal equations directly,
//! matrices are inverted by Gauss-Jordan elimination, and each estimator quantity is
//! recomputed from its defining formula in open code. `build_fixture` assembles the
//! complete value set that is frozen in `tests/fixtures/oracle_values.json`.

use super::*;
use std::collections::BTreeMap;

const TRUNC_ALPHA: f64 = 0.1;

// ---------------------------------------------------------------------------
// Small dense linear algebra, written out longhand.
// ---------------------------------------------------------------------------

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Solve `a x = b` by Gauss elimination with partial pivoting. `a` is row-major.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        assert!(a[piv][col].abs() > 1e-300, "oracle solve: singular matrix");
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    x
}

/// Invert a square matrix by Gauss-Jordan with partial pivoting.
fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = a[i].clone();
            let mut id = vec![0.0; n];
            id[i] = 1.0;
            row.extend(id);
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        assert!(m[piv][col].abs() > 1e-300, "oracle invert: singular matrix");
        m.swap(col, piv);
        let d = m[col][col];
        for k in 0..2 * n {
            m[col][k] /= d;
        }
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                for k in 0..2 * n {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    m.into_iter().map(|row| row[n..].to_vec()).collect()
}

// ---------------------------------------------------------------------------
// Reference model fits.
// ---------------------------------------------------------------------------

fn expit(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn clip_prob(p: f64) -> f64 {
    p.clamp(1e-6, 1.0 - 1e-6)
}

/// Weighted logistic maximum likelihood by damped Newton, run to a score max-norm of
/// 1e-12 times the total weight.
fn logistic_newton(x: &[Vec<f64>], z: &[f64], w: &[f64]) -> Vec<f64> {
    let n = x.len();
    let p = x[0].len();
    let sw: f64 = w.iter().sum();
    let deviance = |beta: &[f64]| -> f64 {
        let mut d = 0.0;
        for i in 0..n {
            let mu = expit(dot(&x[i], beta)).clamp(1e-300, 1.0 - 1e-16);
            d += -2.0 * w[i] * (z[i] * mu.ln() + (1.0 - z[i]) * (1.0 - mu).ln());
        }
        d
    };
    let mut beta = vec![0.0; p];
    let mut dev = deviance(&beta);
    for _ in 0..1000 {
        let mut grad = vec![0.0; p];
        let mut hess = vec![vec![0.0; p]; p];
        for i in 0..n {
            let mu = expit(dot(&x[i], &beta));
            let r = w[i] * (z[i] - mu);
            let s = w[i] * mu * (1.0 - mu);
            for j in 0..p {
                grad[j] += r * x[i][j];
                for k in 0..p {
                    hess[j][k] += s * x[i][j] * x[i][k];
                }
            }
        }
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax <= 1e-12 * sw {
            for b in &beta {
                assert!(b.abs() < 30.0, "oracle logistic: separated fit");
            }
            return beta;
        }
        let step = solve(hess, grad);
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let cd = deviance(&cand);
            if cd <= dev + 1e-10 || t < 1e-10 {
                beta = cand;
                dev = cd;
                break;
            }
            t *= 0.5;
        }
    }
    panic!("oracle logistic did not converge");
}

/// Weighted least squares via the normal equations.
fn wls(x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut xtwx = vec![vec![0.0; p]; p];
    let mut xtwy = vec![0.0; p];
    for i in 0..x.len() {
        for j in 0..p {
            xtwy[j] += w[i] * x[i][j] * y[i];
            for k in 0..p {
                xtwx[j][k] += w[i] * x[i][j] * x[i][k];
            }
        }
    }
    solve(xtwx, xtwy)
}

// ---------------------------------------------------------------------------
// Tilting functions and per-unit weights.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq)]
enum Tilt {
    Combined,
    Treated,
    Control,
    Overlap,
    Truncated(f64),
}

impl Tilt {
    fn h(self, e: f64) -> f64 {
        match self {
            Tilt::Combined => 1.0,
            Tilt::Treated => e,
            Tilt::Control => 1.0 - e,
            Tilt::Overlap => e * (1.0 - e),
            Tilt::Truncated(a) => {
                if e > a && e < 1.0 - a {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn name(self) -> &'static str {
        match self {
            Tilt::Combined => "combined",
            Tilt::Treated => "treated",
            Tilt::Control => "control",
            Tilt::Overlap => "overlap",
            Tilt::Truncated(_) => "truncated",
        }
    }
}

struct UnitWeightsOracle {
    h: Vec<f64>,
    w1: Vec<f64>,
    w0: Vec<f64>,
    h_over_ps: Vec<f64>,
}

fn unit_weights(tilt: Tilt, e_sp: &[f64], w: &[f64], p_s: &[f64]) -> UnitWeightsOracle {
    let n = e_sp.len();
    let mut out = UnitWeightsOracle {
        h: vec![0.0; n],
        w1: vec![0.0; n],
        w0: vec![0.0; n],
        h_over_ps: vec![0.0; n],
    };
    for i in 0..n {
        let h = tilt.h(e_sp[i]);
        out.h[i] = h;
        out.w1[i] = h * w[i] / e_sp[i];
        out.w0[i] = h * w[i] / (1.0 - e_sp[i]);
        out.h_over_ps[i] = h / p_s[i];
    }
    out
}

// ---------------------------------------------------------------------------
// Plain weighting estimator: point estimate and closed-form sandwich.
// ---------------------------------------------------------------------------

/// Gradient of each arm weight with respect to the propensity coefficients,
/// one vector per unit. For the truncated tilt the window indicator is held fixed
/// and the smooth part is differenced numerically.
fn arm_weight_gradients(
    tilt: Tilt,
    base: &[Vec<f64>],
    beta_sp: &[f64],
    e_sp: &[f64],
    uw: &UnitWeightsOracle,
    w: &[f64],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = base.len();
    let p = beta_sp.len();
    let mut g1 = vec![vec![0.0; p]; n];
    let mut g0 = vec![vec![0.0; p]; n];
    match tilt {
        Tilt::Combined => {
            for i in 0..n {
                for j in 0..p {
                    g1[i][j] = -uw.w1[i] * (1.0 - e_sp[i]) * base[i][j];
                    g0[i][j] = uw.w0[i] * e_sp[i] * base[i][j];
                }
            }
        }
        Tilt::Treated => {
            for i in 0..n {
                for j in 0..p {
                    g0[i][j] = uw.w0[i] * base[i][j];
                }
            }
        }
        Tilt::Control => {
            for i in 0..n {
                for j in 0..p {
                    g1[i][j] = -uw.w1[i] * base[i][j];
                }
            }
        }
        Tilt::Overlap => {
            for i in 0..n {
                for j in 0..p {
                    g1[i][j] = -uw.w1[i] * e_sp[i] * base[i][j];
                    g0[i][j] = uw.w0[i] * (1.0 - e_sp[i]) * base[i][j];
                }
            }
        }
        Tilt::Truncated(_) => {
            let eps = f64::EPSILON.powf(1.0 / 3.0);
            for i in 0..n {
                let ind = if uw.h[i] > 0.0 { 1.0 } else { 0.0 };
                for j in 0..p {
                    let hj = eps * beta_sp[j].abs().max(1.0);
                    let mut bp = beta_sp.to_vec();
                    bp[j] += hj;
                    let mut bm = beta_sp.to_vec();
                    bm[j] -= hj;
                    let ep = clip_prob(expit(dot(&base[i], &bp)));
                    let em = clip_prob(expit(dot(&base[i], &bm)));
                    g1[i][j] = ind * (w[i] / ep - w[i] / em) / (2.0 * hj);
                    g0[i][j] = ind * (w[i] / (1.0 - ep) - w[i] / (1.0 - em)) / (2.0 * hj);
                }
            }
        }
    }
    (g1, g0)
}

#[allow(clippy::too_many_arguments)]
fn psw_oracle(
    toy: &Toy12,
    base: &[Vec<f64>],
    beta_sp: &[f64],
    e_sp: &[f64],
    uw: &UnitWeightsOracle,
    tilt: Tilt,
    reg_w: &[f64],
) -> PswFixture {
    let n = toy.z.len();
    let nf = n as f64;
    let (s1y, s1, s0y, s0) = (0..n).fold((0.0, 0.0, 0.0, 0.0), |acc, i| {
        (
            acc.0 + uw.w1[i] * toy.z[i] * toy.y[i],
            acc.1 + uw.w1[i] * toy.z[i],
            acc.2 + uw.w0[i] * (1.0 - toy.z[i]) * toy.y[i],
            acc.3 + uw.w0[i] * (1.0 - toy.z[i]),
        )
    });
    let tau1 = s1y / s1;
    let tau0 = s0y / s0;
    let nu = uw.h_over_ps.iter().sum::<f64>() / nf;

    let p = beta_sp.len();
    let mut ebb = vec![vec![0.0; p]; p];
    for i in 0..n {
        let s = reg_w[i] * e_sp[i] * (1.0 - e_sp[i]);
        for j in 0..p {
            for k in 0..p {
                ebb[j][k] += s * base[i][j] * base[i][k] / nf;
            }
        }
    }
    let (g1, g0) = arm_weight_gradients(tilt, base, beta_sp, e_sp, uw, &toy.w);
    let mut hvec = vec![0.0; p];
    for i in 0..n {
        for j in 0..p {
            hvec[j] += (toy.z[i] * (toy.y[i] - tau1) * g1[i][j]
                - (1.0 - toy.z[i]) * (toy.y[i] - tau0) * g0[i][j])
                / nf;
        }
    }
    let einv = invert(&ebb);
    let ht_einv: Vec<f64> = (0..p).map(|k| (0..p).map(|j| hvec[j] * einv[j][k]).sum()).collect();
    let mut var = 0.0;
    for i in 0..n {
        let score_i: f64 = (0..p)
            .map(|k| ht_einv[k] * reg_w[i] * (toy.z[i] - e_sp[i]) * base[i][k])
            .sum();
        let infl = toy.z[i] * uw.w1[i] * (toy.y[i] - tau1)
            - (1.0 - toy.z[i]) * uw.w0[i] * (toy.y[i] - tau0)
            + score_i;
        var += (infl / nu).powi(2) / (nf * nf);
    }
    PswFixture { tau1, tau0, tau: tau1 - tau0, se: var.sqrt() }
}

// ---------------------------------------------------------------------------
// Augmented estimators: outcome fits, three-term point estimate, and a fully
// numerical stacked-equation sandwich.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Mom,
    Cvr,
    Wet,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Mom => "mom",
            Kind::Cvr => "cvr",
            Kind::Wet => "wet",
        }
    }
}

struct OutcomeOracle {
    alpha0: Vec<f64>,
    alpha1: Vec<f64>,
    m1: Vec<f64>,
    m0: Vec<f64>,
}

fn outcome_fit(toy: &Toy12, base: &[Vec<f64>], uw: &UnitWeightsOracle, kind: Kind) -> OutcomeOracle {
    let n = toy.z.len();
    let rows = |arm: f64, design: &dyn Fn(usize) -> Vec<f64>| -> (Vec<Vec<f64>>, Vec<f64>, Vec<usize>) {
        let mut x = vec![];
        let mut y = vec![];
        let mut idx = vec![];
        for i in 0..n {
            if toy.z[i] == arm {
                x.push(design(i));
                y.push(toy.y[i]);
                idx.push(i);
            }
        }
        (x, y, idx)
    };
    let design1: Box<dyn Fn(usize) -> Vec<f64>> = match kind {
        Kind::Cvr => Box::new(|i| vec![1.0, toy.x1[i], toy.x2[i], uw.w1[i]]),
        _ => Box::new(|i| vec![1.0, toy.x1[i], toy.x2[i]]),
    };
    let design0: Box<dyn Fn(usize) -> Vec<f64>> = match kind {
        Kind::Cvr => Box::new(|i| vec![1.0, toy.x1[i], toy.x2[i], uw.w0[i]]),
        _ => Box::new(|i| vec![1.0, toy.x1[i], toy.x2[i]]),
    };
    let (x1rows, y1, idx1) = rows(1.0, design1.as_ref());
    let (x0rows, y0, idx0) = rows(0.0, design0.as_ref());
    let w1fit: Vec<f64> = match kind {
        Kind::Wet => idx1.iter().map(|&i| uw.w1[i]).collect(),
        _ => vec![1.0; x1rows.len()],
    };
    let w0fit: Vec<f64> = match kind {
        Kind::Wet => idx0.iter().map(|&i| uw.w0[i]).collect(),
        _ => vec![1.0; x0rows.len()],
    };
    let alpha1 = wls(&x1rows, &y1, &w1fit);
    let alpha0 = wls(&x0rows, &y0, &w0fit);
    let m1: Vec<f64> = (0..n).map(|i| dot(&design1(i), &alpha1)).collect();
    let m0: Vec<f64> = (0..n).map(|i| dot(&design0(i), &alpha0)).collect();
    let _ = base;
    OutcomeOracle { alpha0, alpha1, m1, m0 }
}

struct AugPoint {
    v1: f64,
    v2: f64,
    v3: f64,
}

fn augmented_point(toy: &Toy12, uw: &UnitWeightsOracle, of: &OutcomeOracle) -> AugPoint {
    let n = toy.z.len();
    let (mut n1, mut d1, mut n2, mut d2, mut n3, mut d3) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        n1 += uw.h_over_ps[i] * (of.m1[i] - of.m0[i]);
        d1 += uw.h_over_ps[i];
        n2 += uw.w1[i] * toy.z[i] * (toy.y[i] - of.m1[i]);
        d2 += uw.w1[i] * toy.z[i];
        n3 += uw.w0[i] * (1.0 - toy.z[i]) * (toy.y[i] - of.m0[i]);
        d3 += uw.w0[i] * (1.0 - toy.z[i]);
    }
    AugPoint { v1: n1 / d1, v2: n2 / d2, v3: n3 / d3 }
}

/// Evaluate the full stacked residual vector for one unit at an arbitrary parameter
/// vector. Layout: [v1, v2, v3, alpha0 (q), alpha1 (q), beta_fp (3), beta_sp (3)];
/// rows: fp score (3), sp score (3), arm-1 outcome score (q), arm-0 outcome score (q),
/// v1 row, v2 row, v3 row.
#[allow(clippy::too_many_arguments)]
fn psi_unit(
    toy: &Toy12,
    i: usize,
    theta: &[f64],
    q: usize,
    kind: Kind,
    tilt: Tilt,
) -> Vec<f64> {
    let v1 = theta[0];
    let v2 = theta[1];
    let v3 = theta[2];
    let a0 = &theta[3..3 + q];
    let a1 = &theta[3 + q..3 + 2 * q];
    let bfp = &theta[3 + 2 * q..6 + 2 * q];
    let bsp = &theta[6 + 2 * q..9 + 2 * q];
    let x = [1.0, toy.x1[i], toy.x2[i]];
    let z = toy.z[i];
    let y = toy.y[i];
    let w = toy.w[i];

    let efp = clip_prob(expit(dot(&x, bfp)));
    let esp = clip_prob(expit(dot(&x, bsp)));
    let r = if z == 1.0 { esp / efp } else { (1.0 - esp) / (1.0 - efp) };
    let ps = (r / w).min(1.0);
    let h = tilt.h(esp);
    let w1 = h * w / esp;
    let w0 = h * w / (1.0 - esp);
    let hp = h / ps;

    let xp1: Vec<f64> = match kind {
        Kind::Cvr => vec![1.0, toy.x1[i], toy.x2[i], w1],
        _ => vec![1.0, toy.x1[i], toy.x2[i]],
    };
    let xp0: Vec<f64> = match kind {
        Kind::Cvr => vec![1.0, toy.x1[i], toy.x2[i], w0],
        _ => vec![1.0, toy.x1[i], toy.x2[i]],
    };
    let m1 = dot(&xp1, a1);
    let m0 = dot(&xp0, a0);
    let wor1 = if kind == Kind::Wet { w1 } else { 1.0 };
    let wor0 = if kind == Kind::Wet { w0 } else { 1.0 };

    let mut psi = Vec::with_capacity(9 + 2 * q);
    for j in 0..3 {
        psi.push(x[j] * (z - efp));
    }
    for j in 0..3 {
        psi.push(w * x[j] * (z - esp));
    }
    for j in 0..q {
        psi.push(wor1 * z * xp1[j] * (y - m1));
    }
    for j in 0..q {
        psi.push(wor0 * (1.0 - z) * xp0[j] * (y - m0));
    }
    psi.push(hp * (m1 - m0 - v1));
    psi.push(w1 * z * (y - m1 - v2));
    psi.push(w0 * (1.0 - z) * (y - m0 - v3));
    psi
}

/// Standard error of v1+v2-v3 from the numerically assembled sandwich.
fn fd_stack_se(toy: &Toy12, theta: &[f64], q: usize, kind: Kind, tilt: Tilt) -> f64 {
    let n = toy.z.len();
    let nf = n as f64;
    let dim = theta.len();
    let eps = f64::EPSILON.powf(1.0 / 3.0);

    // Bread: central differences of the summed residual vector.
    let mut a = vec![vec![0.0; dim]; dim];
    for j in 0..dim {
        let hj = eps * theta[j].abs().max(1.0);
        let mut tp = theta.to_vec();
        tp[j] += hj;
        let mut tm = theta.to_vec();
        tm[j] -= hj;
        let mut col = vec![0.0; dim];
        for i in 0..n {
            let pp = psi_unit(toy, i, &tp, q, kind, tilt);
            let pm = psi_unit(toy, i, &tm, q, kind, tilt);
            for r in 0..dim {
                col[r] += (pp[r] - pm[r]) / (2.0 * hj);
            }
        }
        for r in 0..dim {
            a[r][j] = -col[r] / nf;
        }
    }

    // Meat: average outer product at the plug-in.
    let mut b = vec![vec![0.0; dim]; dim];
    for i in 0..n {
        let p = psi_unit(toy, i, theta, q, kind, tilt);
        for r in 0..dim {
            for c in 0..dim {
                b[r][c] += p[r] * p[c] / nf;
            }
        }
    }

    let ainv = invert(&a);
    // v = ainv * b * ainv^T, then contrast (+1, +1, -1) on the first three slots.
    let mut g = vec![0.0; dim];
    g[0] = 1.0;
    g[1] = 1.0;
    g[2] = -1.0;
    let gt_ainv: Vec<f64> = (0..dim).map(|c| (0..dim).map(|r| g[r] * ainv[r][c]).sum()).collect();
    let mut quad = 0.0;
    for r in 0..dim {
        for c in 0..dim {
            quad += gt_ainv[r] * b[r][c] * gt_ainv[c];
        }
    }
    (quad / nf).sqrt()
}

// ---------------------------------------------------------------------------
// Balance and weight-summary arithmetic.
// ---------------------------------------------------------------------------

fn psmd_rows(toy: &Toy12, uw: &UnitWeightsOracle) -> Vec<BalanceRowFixture> {
    let n = toy.z.len();
    let cov = [("x1", &toy.x1), ("x2", &toy.x2)];
    let mut out = vec![];
    let m1: f64 = (0..n).map(|i| uw.w1[i] * toy.z[i]).sum();
    let m0: f64 = (0..n).map(|i| uw.w0[i] * (1.0 - toy.z[i])).sum();
    for (name, xs) in cov {
        let mean1: f64 = (0..n).map(|i| uw.w1[i] * toy.z[i] * xs[i]).sum::<f64>() / m1;
        let mean0: f64 = (0..n).map(|i| uw.w0[i] * (1.0 - toy.z[i]) * xs[i]).sum::<f64>() / m0;
        let var1: f64 =
            (0..n).map(|i| uw.w1[i] * toy.z[i] * (xs[i] - mean1).powi(2)).sum::<f64>() / m1;
        let var0: f64 = (0..n)
            .map(|i| uw.w0[i] * (1.0 - toy.z[i]) * (xs[i] - mean0).powi(2))
            .sum::<f64>()
            / m0;
        let pooled = ((m1 * var1 + m0 * var0) / (m1 + m0)).sqrt();
        out.push(BalanceRowFixture {
            covariate: name.to_string(),
            mean_treated: mean1,
            mean_control: mean0,
            pooled_sd: pooled,
            psmd: (mean1 - mean0).abs() / pooled,
        });
    }
    out
}

fn arm_stats(values: &[f64]) -> ArmStatsFixture {
    let m = values.len() as f64;
    let sum: f64 = values.iter().sum();
    let mean = sum / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
    let sumsq: f64 = values.iter().map(|v| v * v).sum();
    ArmStatsFixture {
        min: values.iter().cloned().fold(f64::INFINITY, f64::min),
        max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        cv: var.sqrt() / mean,
        ess: sum * sum / sumsq,
    }
}

// ---------------------------------------------------------------------------
// Fixture assembly.
// ---------------------------------------------------------------------------

pub fn build_fixture() -> OracleFixture {
    // Reference GLM problems.
    let x6: Vec<Vec<f64>> =
        [-2.0, -1.0, 0.0, 0.0, 1.0, 2.0].iter().map(|&v| vec![1.0, v]).collect();
    let z6 = vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
    let w6 = vec![1.0, 2.0, 1.0, 1.0, 2.0, 1.0];
    let glm_logistic_6unit = GlmBeta { beta: logistic_newton(&x6, &z6, &w6) };

    let x5: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 3.0, 4.0].iter().map(|&v| vec![1.0, v]).collect();
    let y5 = vec![1.1, 1.9, 3.2, 3.8, 5.1];
    let w5 = vec![1.0, 2.0, 3.0, 2.0, 0.5];
    let glm_linear_5point = GlmBeta { beta: wls(&x5, &y5, &w5) };

    // Toy survey sample fits.
    let toy = load_toy12();
    let n = toy.z.len();
    let base: Vec<Vec<f64>> = (0..n).map(|i| vec![1.0, toy.x1[i], toy.x2[i]]).collect();
    let base_c: Vec<Vec<f64>> =
        (0..n).map(|i| vec![1.0, toy.x1[i], toy.x2[i], toy.w[i]]).collect();
    let ones = vec![1.0; n];

    let beta_sp_w = logistic_newton(&base, &toy.z, &toy.w);
    let beta_fp = logistic_newton(&base, &toy.z, &ones);
    let beta_u = logistic_newton(&base, &toy.z, &ones);
    let beta_c = logistic_newton(&base_c, &toy.z, &ones);
    let beta_cw = logistic_newton(&base_c, &toy.z, &toy.w);

    let e_sp: Vec<f64> = (0..n).map(|i| clip_prob(expit(dot(&base[i], &beta_sp_w)))).collect();
    let e_fp: Vec<f64> = (0..n).map(|i| clip_prob(expit(dot(&base[i], &beta_fp)))).collect();
    let r_z: Vec<f64> = (0..n)
        .map(|i| {
            if toy.z[i] == 1.0 {
                e_sp[i] / e_fp[i]
            } else {
                (1.0 - e_sp[i]) / (1.0 - e_fp[i])
            }
        })
        .collect();
    let p_s: Vec<f64> = (0..n).map(|i| (r_z[i] / toy.w[i]).min(1.0)).collect();

    let tilts =
        [Tilt::Combined, Tilt::Treated, Tilt::Control, Tilt::Overlap, Tilt::Truncated(TRUNC_ALPHA)];

    let mut weights = BTreeMap::new();
    let mut psw = BTreeMap::new();
    for tilt in tilts {
        let uw = unit_weights(tilt, &e_sp, &toy.w, &p_s);
        if let Tilt::Truncated(_) = tilt {
            let kept = uw.h.iter().filter(|&&h| h > 0.0).count();
            assert!(kept < n, "truncation window excludes nobody; widen alpha");
            let s1: f64 = (0..n).map(|i| uw.w1[i] * toy.z[i]).sum();
            let s0: f64 = (0..n).map(|i| uw.w0[i] * (1.0 - toy.z[i])).sum();
            assert!(s1 > 0.0 && s0 > 0.0, "truncation emptied an arm");
        }
        psw.insert(
            tilt.name().to_string(),
            psw_oracle(&toy, &base, &beta_sp_w, &e_sp, &uw, tilt, &toy.w),
        );
        weights.insert(
            tilt.name().to_string(),
            WeightsFixture { h: uw.h.clone(), w1: uw.w1.clone(), w0: uw.w0.clone(), h_over_ps: uw.h_over_ps.clone() },
        );
    }

    // Outcome fits and augmented estimates for the combined and overlap tilts.
    let uw_combined = unit_weights(Tilt::Combined, &e_sp, &toy.w, &p_s);
    let uw_overlap = unit_weights(Tilt::Overlap, &e_sp, &toy.w, &p_s);
    let mom = outcome_fit(&toy, &base, &uw_combined, Kind::Mom);
    let cvr_c = outcome_fit(&toy, &base, &uw_combined, Kind::Cvr);
    let cvr_o = outcome_fit(&toy, &base, &uw_overlap, Kind::Cvr);
    let wet_c = outcome_fit(&toy, &base, &uw_combined, Kind::Wet);
    let wet_o = outcome_fit(&toy, &base, &uw_overlap, Kind::Wet);

    let mut augmented = BTreeMap::new();
    for (kind, tilt, of, uw) in [
        (Kind::Mom, Tilt::Combined, &mom, &uw_combined),
        (Kind::Mom, Tilt::Overlap, &mom, &uw_overlap),
        (Kind::Cvr, Tilt::Combined, &cvr_c, &uw_combined),
        (Kind::Cvr, Tilt::Overlap, &cvr_o, &uw_overlap),
        (Kind::Wet, Tilt::Combined, &wet_c, &uw_combined),
        (Kind::Wet, Tilt::Overlap, &wet_o, &uw_overlap),
    ] {
        // The moment estimator's outcome fit ignores the tilt, but v1/v2/v3 do not.
        let of = if kind == Kind::Mom {
            OutcomeOracle {
                alpha0: of.alpha0.clone(),
                alpha1: of.alpha1.clone(),
                m1: of.m1.clone(),
                m0: of.m0.clone(),
            }
        } else {
            outcome_fit(&toy, &base, uw, kind)
        };
        let pt = augmented_point(&toy, uw, &of);
        let q = of.alpha0.len();
        let mut theta = vec![pt.v1, pt.v2, pt.v3];
        theta.extend(&of.alpha0);
        theta.extend(&of.alpha1);
        theta.extend(&beta_fp);
        theta.extend(&beta_sp_w);
        let se = fd_stack_se(&toy, &theta, q, kind, tilt);
        augmented.insert(
            format!("{}_{}", kind.name(), tilt.name()),
            AugFixture { v1: pt.v1, v2: pt.v2, v3: pt.v3, tau: pt.v1 + pt.v2 - pt.v3, se },
        );
    }

    // Classic inverse-probability reduction: all survey weights 1.
    let hajek_all_ones_tau = {
        let e: Vec<f64> = (0..n).map(|i| clip_prob(expit(dot(&base[i], &beta_fp)))).collect();
        let t1n: f64 = (0..n).map(|i| toy.z[i] * toy.y[i] / e[i]).sum();
        let t1d: f64 = (0..n).map(|i| toy.z[i] / e[i]).sum();
        let t0n: f64 = (0..n).map(|i| (1.0 - toy.z[i]) * toy.y[i] / (1.0 - e[i])).sum();
        let t0d: f64 = (0..n).map(|i| (1.0 - toy.z[i]) / (1.0 - e[i])).sum();
        t1n / t1d - t0n / t0d
    };

    // One-unit stacked-residual evaluation at a hand-set parameter vector
    // (moment estimator, overlap tilt, unit 0).
    let psi_single_unit = {
        let theta = vec![
            0.5, 0.2, 0.1, // v1, v2, v3
            0.1, 0.2, 0.3, // alpha0
            0.5, -0.2, 0.4, // alpha1
            0.1, 0.3, -0.2, // beta_fp
            -0.1, 0.4, 0.2, // beta_sp
        ];
        let psi = psi_unit(&toy, 0, &theta, 3, Kind::Mom, Tilt::Overlap);
        PsiSingleUnit { unit_index: 0, theta, psi }
    };

    OracleFixture {
        glm_logistic_6unit,
        glm_linear_5point,
        toy12: Toy12Fixture {
            beta_sp_w,
            beta_fp,
            beta_u,
            beta_c,
            beta_cw,
            e_sp: e_sp.clone(),
            e_fp,
            r_z,
            p_s,
            weights,
            truncated_alpha: TRUNC_ALPHA,
            psw,
            outcome: OutcomeFixtures {
                mom: ArmCoefs { alpha0: mom.alpha0, alpha1: mom.alpha1 },
                cvr_combined: ArmCoefs { alpha0: cvr_c.alpha0, alpha1: cvr_c.alpha1 },
                cvr_overlap: ArmCoefs { alpha0: cvr_o.alpha0, alpha1: cvr_o.alpha1 },
                wet_combined: ArmCoefs { alpha0: wet_c.alpha0, alpha1: wet_c.alpha1 },
                wet_overlap: ArmCoefs { alpha0: wet_o.alpha0, alpha1: wet_o.alpha1 },
            },
            augmented,
            psmd_combined: psmd_rows(&toy, &uw_combined),
            psmd_overlap: psmd_rows(&toy, &uw_overlap),
            weight_summary_combined: {
                let w1t: Vec<f64> = (0..n)
                    .filter(|&i| toy.z[i] == 1.0)
                    .map(|i| uw_combined.w1[i])
                    .collect();
                let w0c: Vec<f64> = (0..n)
                    .filter(|&i| toy.z[i] == 0.0)
                    .map(|i| uw_combined.w0[i])
                    .collect();
                WeightSummaryFixture { treated: arm_stats(&w1t), control: arm_stats(&w0c) }
            },
            hajek_all_ones_tau,
        },
        psi_single_unit,
    }
}
