//! Passive cable discretization: second differences with sealed
//! (zero-flux) ends and the point injection that couples spine heads to
//! the cable. Shared by both dendrite models.

use crate::error::Error;
use crate::Result;

/// Cable state: voltage per node on a uniform grid at time t.
#[derive(Debug, Clone, PartialEq)]
pub struct CableState {
    pub v: Vec<f64>,
    pub dx: f64,
    pub t: f64,
}

impl CableState {
    pub fn resting(grid_n: usize, dx: f64) -> Self {
        CableState {
            v: vec![0.0; grid_n],
            dx,
            t: 0.0,
        }
    }
}

/// Spine-to-cable attachment: grid node and injection weight per spine.
/// The weight is 1/dx for a point (delta) attachment so the injected
/// charge is independent of grid refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMap {
    pub spine_nodes: Vec<usize>,
    pub weights: Vec<f64>,
}

impl CouplingMap {
    pub fn point_attachment(spine_nodes: Vec<usize>, dx: f64) -> Self {
        let weights = vec![1.0 / dx; spine_nodes.len()];
        CouplingMap {
            spine_nodes,
            weights,
        }
    }
}

/// Write D·∂²V/∂x² (second central difference, mirrored ghost nodes at the
/// sealed ends) into `out`.
pub fn laplacian_into(v: &[f64], d: f64, dx: f64, out: &mut [f64]) {
    let n = v.len();
    assert!(n >= 3, "laplacian needs at least 3 nodes");
    assert_eq!(out.len(), n);
    let c = d / (dx * dx);
    out[0] = c * 2.0 * (v[1] - v[0]);
    for i in 1..n - 1 {
        out[i] = c * (v[i - 1] - 2.0 * v[i] + v[i + 1]);
    }
    out[n - 1] = c * 2.0 * (v[n - 2] - v[n - 1]);
}

/// Allocating variant of [`laplacian_into`].
pub fn laplacian_apply(v: &[f64], d: f64, dx: f64) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    laplacian_into(v, d, dx, &mut out);
    out
}

/// Add the spine coupling D·r_a·w·(V̂_n − V(x_n))/r at each attachment
/// node. `u_hat` is the potential each spine presents to the cable.
pub fn inject_spine_current(
    v: &mut [f64],
    u_hat: &[f64],
    map: &CouplingMap,
    d: f64,
    r_a: f64,
    r: f64,
) -> Result<()> {
    if u_hat.len() != map.spine_nodes.len() {
        return Err(Error::Shape {
            what: "spine potentials",
            expected: map.spine_nodes.len(),
            got: u_hat.len(),
        });
    }
    let scale = d * r_a / r;
    for ((&node, &w), &uh) in map.spine_nodes.iter().zip(&map.weights).zip(u_hat) {
        debug_assert!(node < v.len());
        v[node] += scale * w * (uh - v[node]);
    }
    Ok(())
}

/// Homogeneous leak solution V(t) = V₀·exp(−t/τ): the analytic trajectory
/// of a spine-free, noise-free cable started from a constant.
pub fn cable_decay_check(v0: f64, tau: f64, t: f64) -> f64 {
    v0 * (-t / tau).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_field_has_zero_laplacian() {
        let v = vec![0.7; 12];
        for out in laplacian_apply(&v, 1.3, 0.2) {
            assert!(out.abs() < 1e-13);
        }
    }

    #[test]
    fn linear_field_is_flat_on_the_interior() {
        let v: Vec<f64> = (0..20).map(|i| 0.3 * i as f64 - 1.0).collect();
        let out = laplacian_apply(&v, 2.0, 0.5);
        for o in &out[1..19] {
            assert!(o.abs() < 1e-11);
        }
    }

    #[test]
    fn cosine_is_an_eigenfunction() {
        // V = cos(πx/L) satisfies the sealed ends and D·V'' = −D(π/L)²V;
        // the discrete error is O(dx²).
        let l = 10.0;
        let d = 1.7;
        let mut errs = Vec::new();
        for n in [101usize, 201] {
            let dx = l / (n - 1) as f64;
            let v: Vec<f64> = (0..n).map(|i| (PI * i as f64 * dx / l).cos()).collect();
            let out = laplacian_apply(&v, d, dx);
            let k2 = d * (PI / l) * (PI / l);
            let err = v
                .iter()
                .zip(&out)
                .map(|(vi, oi)| (oi + k2 * vi).abs())
                .fold(0.0f64, f64::max);
            errs.push(err);
        }
        assert!(errs[0] < 1e-2);
        // Halving dx should cut the error by about 4.
        let ratio = errs[0] / errs[1];
        assert!(ratio > 3.0 && ratio < 5.0, "convergence ratio {ratio}");
    }

    #[test]
    fn laplacian_is_symmetric_under_the_grid_inner_product() {
        // Trapezoid-weighted inner product (half weights at the sealed
        // ends) makes the Neumann stencil self-adjoint.
        let n = 17;
        let dx = 0.3;
        let u: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 * 0.17 - 0.5).collect();
        let v: Vec<f64> = (0..n).map(|i| ((i * 5 + 1) % 13) as f64 * 0.11 - 0.7).collect();
        let lu = laplacian_apply(&u, 1.0, dx);
        let lv = laplacian_apply(&v, 1.0, dx);
        let w = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let dot = |a: &[f64], b: &[f64]| -> f64 {
            (0..n).map(|i| w(i) * a[i] * b[i]).sum()
        };
        assert!((dot(&lu, &v) - dot(&u, &lv)).abs() < 1e-10);
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        // Applying the stencil to the all-ones vector probes the row sums.
        let v = vec![1.0; 9];
        for out in laplacian_apply(&v, 3.0, 0.1) {
            assert_eq!(out, 0.0);
        }
    }

    #[test]
    fn injection_vanishes_at_equilibrium() {
        let map = CouplingMap::point_attachment(vec![2, 5], 0.1);
        let mut v = vec![0.25; 8];
        let u_hat = vec![0.25, 0.25];
        inject_spine_current(&mut v, &u_hat, &map, 1.0, 1.0, 1.0).unwrap();
        assert!(v.iter().all(|x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn single_spine_injection_value() {
        let dx = 0.1;
        let map = CouplingMap::point_attachment(vec![3], dx);
        let mut v = vec![0.0; 8];
        inject_spine_current(&mut v, &[1.0], &map, 2.0, 1.5, 0.5).unwrap();
        let expect = 2.0 * 1.5 / (0.5 * dx);
        assert!((v[3] - expect).abs() < 1e-12);
        for (i, x) in v.iter().enumerate() {
            if i != 3 {
                assert_eq!(*x, 0.0);
            }
        }
    }

    #[test]
    fn injected_charge_is_independent_of_refinement() {
        // Total injected charge dx·Σ injection for a fixed potential gap
        // must not change as dx shrinks (delta normalization).
        let mut charges = Vec::new();
        for n in [51usize, 101, 401] {
            let dx = 10.0 / (n - 1) as f64;
            let node = ((2.5 / dx).round()) as usize;
            let map = CouplingMap::point_attachment(vec![node], dx);
            let mut v = vec![0.0; n];
            inject_spine_current(&mut v, &[1.0], &map, 1.0, 1.0, 2.0).unwrap();
            charges.push(dx * v.iter().sum::<f64>());
        }
        for c in &charges {
            assert!((c - charges[0]).abs() < 1e-12, "charges {charges:?}");
        }
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let map = CouplingMap::point_attachment(vec![1, 2], 0.1);
        let mut v = vec![0.0; 4];
        assert!(matches!(
            inject_spine_current(&mut v, &[1.0], &map, 1.0, 1.0, 1.0),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn decay_check_values() {
        assert!((cable_decay_check(1.0, 1.0, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(cable_decay_check(0.8, 2.0, 0.0), 0.8);
    }

    #[test]
    fn euler_stepping_matches_the_exponential_to_first_order() {
        // No spines, no noise, spatially constant start: the stepper is
        // exactly the scalar Euler map, whose error against the analytic
        // exponential is O(dt).
        let tau = 1.0;
        let t_end = 1.0;
        let mut errs = Vec::new();
        for steps in [100usize, 200] {
            let dt = t_end / steps as f64;
            let mut v = vec![1.0; 5];
            let mut lap = vec![0.0; 5];
            for _ in 0..steps {
                laplacian_into(&v.clone(), 1.0, 0.1, &mut lap);
                for (vi, li) in v.iter_mut().zip(&lap) {
                    *vi += dt * (li - *vi / tau);
                }
            }
            errs.push((v[2] - cable_decay_check(1.0, tau, t_end)).abs());
        }
        assert!(errs[0] < 2e-3);
        let ratio = errs[0] / errs[1];
        assert!(ratio > 1.7 && ratio < 2.3, "first-order ratio {ratio}");
    }
}
