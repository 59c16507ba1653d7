//! Quick runtime checks of the library's invariants, for installations
//! without the test suite.

use nalgebra::{Cholesky, DMatrix};
use serde::Serialize;

use crate::coupling::{coupled_velocity_into, rejection_probability_bound, rejection_probability_exact};
use crate::flow::{coupled_flow_torus, flow, FlowConfig};
use crate::geometry::{minimal_difference, SpaceSpec};
use crate::metrics::{torus_params, wah_rate, WahMetric};
use crate::potentials::{GraphName, NeighborGraph, PotentialSpec, Precision, PrecisionSpec};
use crate::rng::{replica_rng, standard_normal_fill, uniform_open01};
use crate::state::{PhasePoint, TorusPair};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed,
        detail,
    }
}

/// Runs every check; takes well under a second.
pub fn run_all(seed: u64) -> Vec<CheckResult> {
    vec![
        zeta_contraction(seed),
        profile_shape(seed),
        g_positive_definite(seed),
        remark_bi(),
        rejection_frequency(seed),
        harmonic_flow(),
        torus_pair_flow(),
        rate_formulas(),
    ]
}

fn zeta_contraction(seed: u64) -> CheckResult {
    let mut rng = replica_rng(seed, 1);
    let ell = 1.3;
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    for _ in 0..20_000 {
        let z = 20.0 * (uniform_open01(&mut rng) - 0.5);
        let w = uniform_open01(&mut rng) - 0.5;
        let zeta = minimal_difference(z, w, ell);
        let k = ((z - zeta) / ell).round();
        if zeta.abs() > 0.5 * ell || (z - zeta - k * ell).abs() > 1e-9 {
            bad += 1;
        }
        worst = worst.max(zeta.abs() - z.abs());
    }
    check(
        "zeta_contraction",
        bad == 0 && worst <= 1e-12,
        format!("{bad} range/congruence failures, max |ζ|−|z| = {worst:e}"),
    )
}

fn profile_shape(seed: u64) -> CheckResult {
    let mut rng = replica_rng(seed, 2);
    let base = torus_params(1.0, 9.0, 1.0, 1.0, 0.0, 0.0).expect("valid parameters");
    let mut bad = 0;
    for _ in 0..20_000 {
        let r = 3.0 * uniform_open01(&mut rng);
        let s = 3.0 * uniform_open01(&mut rng);
        let (lo, hi) = (r.min(s), r.max(s));
        let mono = base.profile(lo) <= base.profile(hi);
        let concave = base.profile(0.5 * (lo + hi)) + 1e-14 >= 0.5 * (base.profile(lo) + base.profile(hi));
        let bound = base.profile(s) - base.profile(r)
            <= base.profile_left_derivative(r) * (s - r).min(1.0 / base.a) + 1e-12;
        if !(mono && concave && bound) {
            bad += 1;
        }
    }
    check("profile_shape", bad == 0, format!("{bad} failures in 20000 pairs"))
}

fn g_positive_definite(seed: u64) -> CheckResult {
    let mut rng = replica_rng(seed, 3);
    let mut bad = 0;
    for _ in 0..100 {
        let mut entries = vec![0.0; 9];
        standard_normal_fill(&mut rng, &mut entries);
        let a = DMatrix::from_row_slice(3, 3, &entries);
        let c_inv = &a * a.transpose() + DMatrix::identity(3, 3) * 0.1;
        let lambda = 0.05 + 20.0 * uniform_open01(&mut rng);
        let ok = Precision::dense(c_inv)
            .and_then(|p| WahMetric::new(lambda, 1.0, p))
            .map(|m| Cholesky::new(m.matrix()).is_some() && m.kappa() >= 1.0)
            .unwrap_or(false);
        if !ok {
            bad += 1;
        }
    }
    check("g_positive_definite", bad == 0, format!("{bad} of 100 random metrics failed"))
}

fn remark_bi() -> CheckResult {
    let mut checked = 0;
    let mut bad = 0;
    for &beta in &[0.5, 1.0, 2.0] {
        for &l in &[0.0, 0.5, 2.0] {
            for k in 1..=30 {
                let ratio = k as f64;
                let Ok(p) = torus_params(beta, ratio, 1.0, 1.0, l, 0.0) else {
                    bad += 1;
                    continue;
                };
                if !p.cond_lambda_ok {
                    continue;
                }
                checked += 1;
                if p.particle_distance(0.5, 0.0) < p.r_cap || p.r_cap > 2.0 / 3.0 + 1e-12 {
                    bad += 1;
                }
            }
        }
    }
    check(
        "antipodal_set_outside_cap",
        bad == 0 && checked > 0,
        format!("{bad} failures over {checked} admissible parameter sets"),
    )
}

fn rejection_frequency(seed: u64) -> CheckResult {
    let mut rng = replica_rng(seed, 4);
    let (s, draws) = (1.0, 20_000);
    let mut a = [0.0];
    let mut out = [0.0];
    let mut rejects = 0;
    for _ in 0..draws {
        standard_normal_fill(&mut rng, &mut a);
        let u = uniform_open01(&mut rng);
        if !coupled_velocity_into(&a, &[s], u, 1.0, 1.0, &mut out) {
            rejects += 1;
        }
    }
    let p = rejects as f64 / draws as f64;
    let exact = rejection_probability_exact(s);
    let se = (exact * (1.0 - exact) / draws as f64).sqrt();
    check(
        "rejection_frequency",
        (p - exact).abs() <= 4.0 * se && p <= rejection_probability_bound(s) + 4.0 * se,
        format!("frequency {p:.4}, exact {exact:.4}"),
    )
}

fn harmonic_flow() -> CheckResult {
    let space = SpaceSpec::euclidean(1, 2).expect("valid space");
    let potential = PotentialSpec::Quadratic {
        c_inv: PrecisionSpec::Diagonal(vec![1.0, 4.0]),
    }
    .build(&space)
    .expect("valid potential");
    let start = PhasePoint::new(vec![1.0, 0.5], vec![0.0, -1.0]);
    let t = 2.3_f64;
    let out = flow(&start, t, &potential, &space, FlowConfig::Exact).expect("flow runs");
    let x0 = t.cos();
    let x1 = 0.5 * (2.0 * t).cos() - 0.5 * (2.0 * t).sin();
    let err = (out.x[0] - x0).abs().max((out.x[1] - x1).abs());
    check("harmonic_flow", err < 1e-12, format!("max error {err:e}"))
}

fn torus_pair_flow() -> CheckResult {
    // Coincident copies must stay coincident under an interacting potential.
    let space = SpaceSpec::torus(3, 1.0).expect("valid space");
    let potential = PotentialSpec::TorusCosine {
        amp_local: 0.3,
        amp_pair: 0.1,
        neighbors: NeighborGraph::Named(GraphName::Ring),
    }
    .build(&space)
    .expect("valid potential");
    let y = TorusPair {
        x: vec![0.1, 0.4, 0.8],
        v: vec![0.3, -0.2, 0.5],
        z: vec![0.0; 3],
        w: vec![0.0; 3],
    };
    let out = coupled_flow_torus(&y, 1.0, &potential, &space, FlowConfig::verlet(1e-3))
        .expect("flow runs");
    let drift = out.z.iter().chain(&out.w).fold(0.0_f64, |m, v| m.max(v.abs()));
    check("torus_pair_flow", drift == 0.0, format!("max |z|, |w| = {drift:e}"))
}

fn rate_formulas() -> CheckResult {
    let c = wah_rate(4.0 * 5f64.sqrt() / 5.0, 1.0, 1.0, 0.0).c;
    let p = torus_params(1.0, 6.0, 1.0, 1.0, 0.0, 0.0).expect("valid parameters");
    let err = (c - 5f64.sqrt() / 10.0)
        .abs()
        .max((p.c_a - 6.0 / 90.0 * (-3.0f64).exp()).abs());
    check(
        "rate_formulas",
        err < 1e-12 && !p.cond_lambda_ok,
        format!("max deviation {err:e}"),
    )
}
