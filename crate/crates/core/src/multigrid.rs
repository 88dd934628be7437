//! Geometric multigrid V-cycle for `-Δ_h + diag(w)` on a periodic `n × n` grid,
//! with `Δ_h` the 5-point Laplacian. Used as a symmetric preconditioner for the
//! spectral operators, which it approximates to within a factor `π²/4` per axis.

struct Level {
    n: usize,
    h2inv: f64,
    w: Vec<f64>,
}

impl Level {
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let ip = (i + 1) % n;
            let im = (i + n - 1) % n;
            for j in 0..n {
                let jp = (j + 1) % n;
                let jm = (j + n - 1) % n;
                let c = u[i * n + j];
                let nb = u[ip * n + j] + u[im * n + j] + u[i * n + jp] + u[i * n + jm];
                out[i * n + j] = self.h2inv * (4.0 * c - nb) + self.w[i * n + j] * c;
            }
        }
    }

    fn sweep(&self, u: &mut [f64], f: &[f64], color: usize) {
        let n = self.n;
        for i in 0..n {
            let ip = (i + 1) % n;
            let im = (i + n - 1) % n;
            let start = (i + color) % 2;
            for j in (start..n).step_by(2) {
                let jp = (j + 1) % n;
                let jm = (j + n - 1) % n;
                let nb = u[ip * n + j] + u[im * n + j] + u[i * n + jp] + u[i * n + jm];
                let k = i * n + j;
                u[k] = (f[k] + self.h2inv * nb) / (4.0 * self.h2inv + self.w[k]);
            }
        }
    }
}

fn restrict(n: usize, fine: &[f64]) -> Vec<f64> {
    let nc = n / 2;
    let at = |i: usize, j: usize| fine[(i % n) * n + (j % n)];
    let mut coarse = vec![0.0; nc * nc];
    for ic in 0..nc {
        for jc in 0..nc {
            let (i, j) = (2 * ic + n, 2 * jc + n);
            let centre = at(i, j);
            let edges = at(i - 1, j) + at(i + 1, j) + at(i, j - 1) + at(i, j + 1);
            let corners = at(i - 1, j - 1) + at(i - 1, j + 1) + at(i + 1, j - 1) + at(i + 1, j + 1);
            coarse[ic * nc + jc] = (4.0 * centre + 2.0 * edges + corners) / 16.0;
        }
    }
    coarse
}

fn prolong_add(nc: usize, coarse: &[f64], fine: &mut [f64]) {
    let n = 2 * nc;
    let at = |i: usize, j: usize| coarse[(i % nc) * nc + (j % nc)];
    for ic in 0..nc {
        for jc in 0..nc {
            let (i, j) = (2 * ic, 2 * jc);
            let e00 = at(ic, jc);
            let e10 = at(ic + 1, jc);
            let e01 = at(ic, jc + 1);
            let e11 = at(ic + 1, jc + 1);
            fine[i * n + j] += e00;
            fine[(i + 1) * n + j] += 0.5 * (e00 + e10);
            fine[i * n + j + 1] += 0.5 * (e00 + e01);
            fine[(i + 1) * n + j + 1] += 0.25 * (e00 + e10 + e01 + e11);
        }
    }
}

/// Dense Cholesky factor of the coarsest operator.
struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    fn factor(mut a: Vec<f64>, n: usize) -> Self {
        let max_diag = (0..n).map(|i| a[i * n + i]).fold(0.0, f64::max);
        // constant mode is singular when the reaction term vanishes identically
        let shift = 1e-12 * max_diag.max(1.0);
        for i in 0..n {
            a[i * n + i] += shift;
        }
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= a[j * n + k] * a[j * n + k];
            }
            let d = d.max(shift).sqrt();
            a[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= a[i * n + k] * a[j * n + k];
                }
                a[i * n + j] = s / d;
            }
        }
        Self { n, l: a }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[i * n + k] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= self.l[k * n + i] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }
}

pub(crate) struct Multigrid {
    levels: Vec<Level>,
    coarse: Cholesky,
    smoothing: usize,
}

impl Multigrid {
    /// `reaction` holds the diagonal term `w ≥ 0` at every point of the fine grid.
    pub(crate) fn new(n: usize, reaction: &[f64]) -> Self {
        assert_eq!(reaction.len(), n * n);
        let mut levels = vec![Level {
            n,
            h2inv: (n * n) as f64,
            w: reaction.to_vec(),
        }];
        loop {
            let last = levels.last().unwrap();
            if last.n % 2 != 0 || last.n <= 4 {
                break;
            }
            let nc = last.n / 2;
            let w = restrict(last.n, &last.w);
            levels.push(Level {
                n: nc,
                h2inv: (nc * nc) as f64,
                w,
            });
        }
        let last = levels.last().unwrap();
        let m = last.n * last.n;
        let mut dense = vec![0.0; m * m];
        let mut e = vec![0.0; m];
        let mut col = vec![0.0; m];
        for k in 0..m {
            e[k] = 1.0;
            last.apply(&e, &mut col);
            for i in 0..m {
                dense[i * m + k] = col[i];
            }
            e[k] = 0.0;
        }
        let coarse = Cholesky::factor(dense, m);
        Self {
            levels,
            coarse,
            smoothing: 2,
        }
    }

    fn cycle(&self, depth: usize, f: &[f64]) -> Vec<f64> {
        if depth + 1 == self.levels.len() {
            return self.coarse.solve(f);
        }
        let level = &self.levels[depth];
        let n = level.n;
        let mut u = vec![0.0; n * n];
        for _ in 0..self.smoothing {
            level.sweep(&mut u, f, 0);
            level.sweep(&mut u, f, 1);
        }
        let mut r = vec![0.0; n * n];
        level.apply(&u, &mut r);
        for (ri, fi) in r.iter_mut().zip(f) {
            *ri = fi - *ri;
        }
        let rc = restrict(n, &r);
        let ec = self.cycle(depth + 1, &rc);
        prolong_add(n / 2, &ec, &mut u);
        for _ in 0..self.smoothing {
            level.sweep(&mut u, f, 1);
            level.sweep(&mut u, f, 0);
        }
        u
    }

    /// One V-cycle from a zero initial guess (a fixed symmetric linear map).
    pub(crate) fn apply(&self, r: &[f64], z: &mut [f64]) {
        let u = self.cycle(0, r);
        z.copy_from_slice(&u);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vcycles_converge_on_shifted_poisson() {
        let n = 32;
        let w: Vec<f64> = (0..n * n).map(|k| 1.0 + (k % 7) as f64).collect();
        let mg = Multigrid::new(n, &w);
        let f: Vec<f64> = (0..n * n).map(|k| ((k * 37) % 11) as f64 - 5.0).collect();
        let mut u = vec![0.0; n * n];
        let mut r = f.clone();
        for _ in 0..15 {
            let mut z = vec![0.0; n * n];
            mg.apply(&r, &mut z);
            for (ui, zi) in u.iter_mut().zip(&z) {
                *ui += zi;
            }
            mg.levels[0].apply(&u, &mut r);
            for (ri, fi) in r.iter_mut().zip(&f) {
                *ri = fi - *ri;
            }
        }
        let res = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(res < 1e-8, "residual {res}");
    }

    #[test]
    fn vcycle_is_symmetric() {
        let n = 16;
        let w: Vec<f64> = (0..n * n)
            .map(|k| if k % 5 == 0 { 1e4 } else { 0.3 })
            .collect();
        let mg = Multigrid::new(n, &w);
        let a: Vec<f64> = (0..n * n).map(|k| (k as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..n * n).map(|k| (k as f64 * 0.11).cos()).collect();
        let mut ma = vec![0.0; n * n];
        let mut mb = vec![0.0; n * n];
        mg.apply(&a, &mut ma);
        mg.apply(&b, &mut mb);
        let lhs: f64 = b.iter().zip(&ma).map(|(x, y)| x * y).sum();
        let rhs: f64 = a.iter().zip(&mb).map(|(x, y)| x * y).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }
}
