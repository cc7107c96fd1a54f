//! Independent reference computations for the closed-form probabilities.
//!
//! Nothing here uses the library's formulas: the undamped probability comes
//! from numerically exponentiating the single-excitation Hamiltonian, the
//! damped one from integrating the Lindblad equation over
//! `{|e,0>, |g,1>, |g,0>}`, and posteriors from dense likelihood products.

#![allow(dead_code)]

use num_complex::Complex64 as C;

pub type Matrix<const N: usize> = [[C; N]; N];

fn zero<const N: usize>() -> Matrix<N> {
    [[C::new(0.0, 0.0); N]; N]
}

fn identity<const N: usize>() -> Matrix<N> {
    let mut m = zero();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = C::new(1.0, 0.0);
    }
    m
}

pub fn mul<const N: usize>(a: &Matrix<N>, b: &Matrix<N>) -> Matrix<N> {
    let mut c = zero();
    for i in 0..N {
        for j in 0..N {
            for k in 0..N {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

fn add<const N: usize>(a: &Matrix<N>, b: &Matrix<N>, s: C) -> Matrix<N> {
    let mut c = *a;
    for i in 0..N {
        for j in 0..N {
            c[i][j] += s * b[i][j];
        }
    }
    c
}

fn dagger<const N: usize>(a: &Matrix<N>) -> Matrix<N> {
    let mut c = zero();
    for i in 0..N {
        for j in 0..N {
            c[i][j] = a[j][i].conj();
        }
    }
    c
}

/// `exp(a)` by scaling and squaring with a truncated Taylor series.
pub fn expm<const N: usize>(a: &Matrix<N>) -> Matrix<N> {
    let norm: f64 = a.iter().map(|r| r.iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm > 0.25 { (norm / 0.25).log2().ceil() as u32 } else { 0 };
    let scale = C::new(0.5f64.powi(squarings as i32), 0.0);
    let mut scaled = *a;
    for row in scaled.iter_mut() {
        for x in row.iter_mut() {
            *x *= scale;
        }
    }
    let mut sum = identity();
    let mut term = identity();
    for k in 1..=24 {
        term = mul(&term, &scaled);
        let inv = C::new(1.0 / k as f64, 0.0);
        for row in term.iter_mut() {
            for x in row.iter_mut() {
                *x *= inv;
            }
        }
        sum = add(&sum, &term, C::new(1.0, 0.0));
    }
    for _ in 0..squarings {
        sum = mul(&sum, &sum);
    }
    sum
}

/// Single-excitation Hamiltonian `(dw/2) sz + g sx` on `{|e,0>, |g,1>}`.
pub fn hamiltonian(g: f64, delta_omega: f64) -> Matrix<2> {
    [
        [C::new(delta_omega / 2.0, 0.0), C::new(g, 0.0)],
        [C::new(g, 0.0), C::new(-delta_omega / 2.0, 0.0)],
    ]
}

/// `|<e,0| exp(-iHt) |e,0>|^2`.
pub fn unitary_excitation(g: f64, delta_omega: f64, t: f64) -> f64 {
    let h = hamiltonian(g, delta_omega);
    let mut a = zero::<2>();
    for i in 0..2 {
        for j in 0..2 {
            a[i][j] = C::new(0.0, -t) * h[i][j];
        }
    }
    expm(&a)[0][0].norm_sqr()
}

fn lindblad_rhs(h: &Matrix<3>, l: &Matrix<3>, rho: &Matrix<3>) -> Matrix<3> {
    let i = C::new(0.0, 1.0);
    let ld = dagger(l);
    let ldl = mul(&ld, l);
    let comm = add(&mul(h, rho), &mul(rho, h), C::new(-1.0, 0.0));
    let jump = mul(&mul(l, rho), &ld);
    let anti = add(&mul(&ldl, rho), &mul(rho, &ldl), C::new(1.0, 0.0));
    let d = add(&jump, &anti, C::new(-0.5, 0.0));
    add(&d, &comm, -i)
}

/// Excited-state population after free evolution for `t` with qubit
/// relaxation rate `gamma`, by RK4 on the density matrix.
pub fn lindblad_excitation(g: f64, delta_omega: f64, t: f64, gamma: f64) -> f64 {
    let c = |x: f64| C::new(x, 0.0);
    let h: Matrix<3> = [
        [c(delta_omega / 2.0), c(g), c(0.0)],
        [c(g), c(-delta_omega / 2.0), c(0.0)],
        [c(0.0), c(0.0), c(0.0)],
    ];
    let mut l = zero::<3>();
    l[2][0] = c(gamma.sqrt());
    let mut rho = zero::<3>();
    rho[0][0] = c(1.0);
    if t == 0.0 {
        return 1.0;
    }
    let omega_rabi = (delta_omega * delta_omega + 4.0 * g * g).sqrt();
    let steps = ((t * omega_rabi.max(gamma) / 2e-3).ceil() as usize).max(16);
    let dt = t / steps as f64;
    let half = c(dt / 2.0);
    for _ in 0..steps {
        let k1 = lindblad_rhs(&h, &l, &rho);
        let k2 = lindblad_rhs(&h, &l, &add(&rho, &k1, half));
        let k3 = lindblad_rhs(&h, &l, &add(&rho, &k2, half));
        let k4 = lindblad_rhs(&h, &l, &add(&rho, &k3, c(dt)));
        let mut incr = add(&k1, &k2, c(2.0));
        incr = add(&incr, &k3, c(2.0));
        incr = add(&incr, &k4, c(1.0));
        rho = add(&rho, &incr, c(dt / 6.0));
    }
    rho[0][0].re
}

/// Brute-force normalized posterior: prior weights times the product of
/// per-shot likelihoods, normalized once at the end.
pub fn posterior_product(prior_weights: &[f64], likelihoods: &[Vec<f64>]) -> Vec<f64> {
    let mut w = prior_weights.to_vec();
    for shot in likelihoods {
        for (wi, li) in w.iter_mut().zip(shot) {
            *wi *= li;
        }
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}
