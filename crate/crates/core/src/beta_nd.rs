//! Experimental fixed-`β` solver in complex dimension 2 with constant metrics.
//!
//! Each equation `det(g_j + Hφ_j) = V_j e^{β(s − φ)}` is solved by damped
//! Newton for a given density; the sum `s` is updated by a fixed point whose
//! relaxation is the inverse of its linearization about zero, mode by mode.

use rustfft::num_complex::Complex64;

use crate::beta::{sum_fields, BetaOptions, BetaSolution, BetaStart};
use crate::energy::{hessian_symbols, log_mean_exp, ComplexHessian};
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, EXP_CLAMP};
use crate::krylov::bicgstab;
use crate::problem::{Hermitian2, ProblemData};

#[derive(Clone, Copy, Debug)]
pub struct NdOptions {
    pub tol: f64,
    pub max_outer: usize,
    pub max_newton: usize,
    pub krylov_rtol: f64,
    pub max_halvings: usize,
}

impl From<&BetaOptions> for NdOptions {
    fn from(o: &BetaOptions) -> Self {
        Self {
            tol: o.tol,
            max_outer: 200,
            max_newton: o.max_newton,
            krylov_rtol: o.cg_rtol,
            max_halvings: o.max_halvings,
        }
    }
}

/// Symbol of `ψ ↦ a22 H11 + a11 H22 − 2 Re(conj(a12) H12)`, the derivative of
/// `det(a + Hψ)` in the direction `ψ`.
fn linearized_symbol(a: &Hermitian2, s: [f64; 4]) -> f64 {
    a.a22 * s[0] + a.a11 * s[1] - 2.0 * (a.a12.re * s[2] + a.a12.im * s[3])
}

fn metrics(data: &ProblemData) -> Result<Vec<Hermitian2>> {
    data.forms()
        .iter()
        .map(|f| {
            f.metric()
                .copied()
                .ok_or(Error::Unsupported("forms without a constant metric", 1))
        })
        .collect()
}

pub fn solve_beta_nd(
    data: &ProblemData,
    beta: f64,
    start: BetaStart<'_>,
    opts: &NdOptions,
) -> Result<BetaSolution> {
    let grid = data.grid();
    if grid.ndim() != 2 {
        return Err(Error::Unsupported("solve_beta_nd", 2));
    }
    let gs = metrics(data)?;
    let phi = data.phi();
    let mut psi: Vec<ScalarField> = match start {
        BetaStart::Zero => vec![ScalarField::zeros(grid); data.m()],
        BetaStart::Potentials(p) => p.to_vec(),
        BetaStart::Rung(sol) => sol.potentials.clone(),
    };
    if psi.len() != data.m() || psi.iter().any(|p| p.grid() != grid) {
        return Err(Error::InvalidArgument(
            "initial potentials have the wrong shape".into(),
        ));
    }
    let relax = relaxation(grid, &gs, beta);
    let mut s = sum_fields(&psi);
    s = s.shift(-log_mean_exp(&(&s - phi), beta));
    let mut newton_total = 0;
    let mut krylov_total = 0;
    let mut clamped = false;
    let mut residual = f64::INFINITY;
    let mut potentials = normalized(&psi, &s);
    for _ in 0..opts.max_outer {
        let (e, c) = (&s - phi).scale(beta).exp_clamped();
        clamped |= c;
        let density = e.scale(1.0 / e.integrate());
        for (j, g) in gs.iter().enumerate() {
            let target = density.scale(g.det());
            let (p, its, kry) = ma_newton(g, &target, &psi[j], beta, opts)?;
            psi[j] = p;
            newton_total += its;
            krylov_total += kry;
        }
        let mut s_new = sum_fields(&psi);
        s_new = s_new.shift(-log_mean_exp(&(&s_new - phi), beta));
        potentials = normalized(&psi, &s_new);
        residual = nd_residual(data, beta, &potentials);
        let tol_effective = opts.tol.max(residual_floor(data, &s_new));
        if residual <= tol_effective {
            return Ok(BetaSolution {
                beta,
                potentials,
                residual_sup: residual,
                tol_effective,
                newton_iters: newton_total,
                cg_iters: krylov_total,
                exponent_clamped: clamped,
            });
        }
        let diff = &s_new - &s;
        let step = grid.apply_symbol(diff.values(), |idx| Complex64::new(relax(idx), 0.0));
        s = &s + &ScalarField::new(grid, step)?.shift(diff.mean());
    }
    Err(Error::BetaNoConvergence {
        max_newton: opts.max_outer,
        beta,
        residual,
        best: Box::new(BetaSolution {
            beta,
            potentials,
            residual_sup: residual,
            tol_effective: opts.tol,
            newton_iters: newton_total,
            cg_iters: krylov_total,
            exponent_clamped: clamped,
        }),
    })
}

fn residual_floor(data: &ProblemData, s: &ScalarField) -> f64 {
    let n = data.grid().resolution() as f64;
    64.0 * f64::EPSILON
        * (s.sup_norm() + data.phi().sup_norm())
        * (std::f64::consts::PI * n).powi(2)
}

/// Applies the normalization `sup φ_j = 0` (`j ≥ 2`), `φ_1 = s − Σ_{j≥2} φ_j`.
fn normalized(psi: &[ScalarField], s: &ScalarField) -> Vec<ScalarField> {
    let mut out: Vec<ScalarField> = psi[1..].iter().map(|p| p.shift(-p.sup())).collect();
    let rest = if out.is_empty() {
        ScalarField::zeros(s.grid())
    } else {
        sum_fields(&out)
    };
    out.insert(0, s - &rest);
    out
}

/// Per-mode inverse of `1 + G(k)` with `G(k) = β Σ_j V_j/q_j(k)` and `q_j` the
/// (positive) symbol of the linearized Monge-Ampère operator of form `j`.
fn relaxation<'a>(
    grid: &'a Grid,
    gs: &'a [Hermitian2],
    beta: f64,
) -> impl Fn(&[usize]) -> f64 + 'a {
    move |idx: &[usize]| {
        let s = hessian_symbols(grid, idx);
        let g: f64 = gs
            .iter()
            .map(|g| {
                let q = -linearized_symbol(g, s);
                if q > 0.0 {
                    beta * g.det() / q
                } else {
                    0.0
                }
            })
            .sum();
        if g == 0.0 {
            0.0
        } else {
            1.0 / (1.0 + g)
        }
    }
}

fn det_field(g: &Hermitian2, psi: &ScalarField) -> (Vec<f64>, f64, ComplexHessian) {
    let h = ComplexHessian::of(psi);
    let mut min_ev = f64::INFINITY;
    let det = (0..psi.grid().len())
        .map(|i| {
            let a = h.shifted(g, i);
            min_ev = min_ev.min(a.min_eigenvalue());
            a.det()
        })
        .collect();
    (det, min_ev, h)
}

/// Damped Newton for `det(g + Hψ) = target` with `ψ` of mean zero.
fn ma_newton(
    g: &Hermitian2,
    target: &ScalarField,
    init: &ScalarField,
    beta: f64,
    opts: &NdOptions,
) -> Result<(ScalarField, usize, usize)> {
    let grid = target.grid();
    let mut psi = init.shift(-init.mean());
    let sup_res = |det: &[f64]| {
        det.iter()
            .zip(target.values())
            .map(|(d, t)| (t - d).abs())
            .fold(0.0, f64::max)
    };
    let (mut det, min_ev, mut hess) = det_field(g, &psi);
    if min_ev <= 0.0 {
        // a non-admissible warm start; restart from the flat metric
        psi = ScalarField::zeros(grid);
        (det, _, hess) = det_field(g, &psi);
    }
    let mut res = sup_res(&det);
    let mut krylov = 0;
    let goal = 0.1 * opts.tol;
    for it in 0..opts.max_newton {
        if res <= goal {
            return Ok((psi, it, krylov));
        }
        let coeff: Vec<Hermitian2> = (0..grid.len()).map(|i| hess.shifted(g, i)).collect();
        let n = grid.len() as f64;
        let mean = Hermitian2::new(
            coeff.iter().map(|a| a.a11).sum::<f64>() / n,
            coeff.iter().map(|a| a.a22).sum::<f64>() / n,
            coeff.iter().map(|a| a.a12).sum::<Complex64>() / n,
        );
        let apply = |x: &[f64], y: &mut [f64]| {
            let h = ComplexHessian::of(&ScalarField::from_vec(grid, x.to_vec()));
            for (i, a) in coeff.iter().enumerate() {
                y[i] = a.a22 * h.h11[i] + a.a11 * h.h22[i]
                    - 2.0 * (a.a12.re * h.h12_re[i] + a.a12.im * h.h12_im[i]);
            }
        };
        let precond = |r: &[f64], z: &mut [f64]| {
            let out = grid.apply_symbol(r, |idx| {
                let sym = linearized_symbol(&mean, hessian_symbols(grid, idx));
                Complex64::new(if sym == 0.0 { 0.0 } else { 1.0 / sym }, 0.0)
            });
            z.copy_from_slice(&out);
        };
        let rhs: Vec<f64> = target
            .values()
            .iter()
            .zip(&det)
            .map(|(t, d)| t - d)
            .collect();
        let rhs_mean = rhs.iter().sum::<f64>() / n;
        let rhs: Vec<f64> = rhs.iter().map(|r| r - rhs_mean).collect();
        let mut delta = vec![0.0; grid.len()];
        let out = bicgstab(
            apply,
            precond,
            &rhs,
            &mut delta,
            opts.krylov_rtol.max(1e-13),
            500,
        );
        krylov += out.iterations;
        let delta = ScalarField::from_vec(grid, delta);
        let delta = delta.shift(-delta.mean());
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial = &psi + &delta.scale(t);
            let (d, ev, h) = det_field(g, &trial);
            if ev > 0.0 {
                let r = sup_res(&d);
                if r < res {
                    psi = trial;
                    det = d;
                    hess = h;
                    res = r;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            if res <= opts.tol {
                return Ok((psi, it, krylov));
            }
            return Err(Error::PositivityLoss { beta });
        }
    }
    Ok((psi, opts.max_newton, krylov))
}

/// `max_j sup|det(g_j + Hφ_j) − V_j e^{β(Σφ_k − φ)}|`.
pub fn nd_residual(data: &ProblemData, beta: f64, potentials: &[ScalarField]) -> f64 {
    let gap = &sum_fields(potentials) - data.phi();
    let exp = gap.map(|v| (beta * v).min(EXP_CLAMP).exp());
    potentials
        .iter()
        .zip(data.forms())
        .map(|(p, form)| {
            let g = form.metric().expect("validated metric");
            let (det, _, _) = det_field(g, p);
            det.iter()
                .zip(exp.values())
                .map(|(d, e)| (d - form.mass() * e).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Solution of the problem linearized about zero, up to additive constants:
/// `φ̂_j(k) = β V_j φ̂(k) / (q_j(k)(1 + G(k)))`.
pub fn linearized_solution(data: &ProblemData, beta: f64) -> Result<Vec<ScalarField>> {
    let grid = data.grid();
    let gs = metrics(data)?;
    let relax = relaxation(grid, &gs, beta);
    gs.iter()
        .map(|g| {
            let values = grid.apply_symbol(data.phi().values(), |idx| {
                let q = -linearized_symbol(g, hessian_symbols(grid, idx));
                if q > 0.0 {
                    Complex64::new(beta * g.det() * relax(idx) / q, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            ScalarField::new(grid, values)
        })
        .collect()
}
