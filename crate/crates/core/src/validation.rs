//! Cross-module property checks over a standard matrix of configurations,
//! used by the `validate` command.

use std::f64::consts::PI;
use std::fmt;
use std::time::{Duration, Instant};

use nalgebra::Vector2;

use crate::configuration::{maxwell_ring_config, three_body_config, BuiltConfig, RingGeometry};
use crate::continuation::{landmarks, start_branch, trace_branch, verify_loop, Termination, TraceOptions};
use crate::equilibria::{
    equilibria_of, morse_consistency, newton_refine, ring_critical_rays, ring_radial_derivative, Equilibrium,
    EquilibriumKind, InnerPair,
};
use crate::error::Result;
use crate::exec::Execution;
use crate::potential::nu1_squared;
use crate::ring_sum::{check_grid, ring_sum_phi, CheckGrid, RingSumQuery};
use crate::spectral::{
    bifurcation_points, index_jump, planar_bifurcations, routh_bound, spatial_bifurcation, PlanarCase, SymmetryClass,
};

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub failures: Vec<String>,
    pub note: String,
    pub elapsed: Duration,
    pub budget: Option<Duration>,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {} ({:.2?}{})",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed,
            self.budget.map(|b| format!(" / {b:.0?}")).unwrap_or_default()
        )?;
        if !self.note.is_empty() {
            write!(f, ": {}", self.note)?;
        }
        for fail in self.failures.iter().take(10) {
            write!(f, "\n       - {fail}")?;
        }
        Ok(())
    }
}

struct Check {
    failures: Vec<String>,
    note: String,
}

impl Check {
    fn new() -> Self {
        Self { failures: Vec::new(), note: String::new() }
    }

    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }
}

fn run(
    id: u8,
    title: &'static str,
    budget: Option<Duration>,
    body: impl FnOnce(&mut Check) -> Result<()>,
) -> CriterionOutcome {
    let start = Instant::now();
    let mut check = Check::new();
    if let Err(e) = body(&mut check) {
        check.failures.push(format!("error: {e}"));
    }
    let elapsed = start.elapsed();
    if let Some(b) = budget {
        check.require(elapsed <= b, || format!("runtime {elapsed:.2?} exceeds {b:.0?}"));
    }
    CriterionOutcome {
        id,
        title,
        passed: check.failures.is_empty(),
        failures: check.failures,
        note: check.note,
        elapsed,
        budget,
    }
}

/// The standard configurations: three bodies at `mu` in {0.1, 0.3, 0.5};
/// rings with `n` in {2, 3, 5, 7} and `mu` in {0.001, 1, 1000}; empty-centre
/// rings with `n` in {3, 5, 7}. All with `alpha = 2`.
pub fn test_matrix() -> Result<Vec<(String, BuiltConfig)>> {
    let mut out = Vec::new();
    for mu in [0.1, 0.3, 0.5] {
        let config = three_body_config(mu, 2.0)?;
        out.push((format!("three_body mu={mu}"), BuiltConfig { config, ring: None, three_body_mu: Some(mu) }));
    }
    for n in [2, 3, 5, 7] {
        for mu in [0.001, 1.0, 1000.0] {
            let (config, geometry) = maxwell_ring_config(n, mu, 2.0)?;
            out.push((
                format!("ring n={n} mu={mu}"),
                BuiltConfig { config, ring: Some(geometry), three_body_mu: None },
            ));
        }
    }
    for n in [3, 5, 7] {
        let (config, geometry) = maxwell_ring_config(n, 0.0, 2.0)?;
        out.push((format!("ring n={n} mu=0"), BuiltConfig { config, ring: Some(geometry), three_body_mu: None }));
    }
    Ok(out)
}

fn l4(mu: f64) -> Result<Equilibrium> {
    newton_refine(&three_body_config(mu, 2.0)?, Vector2::new(0.5 - mu, 0.75f64.sqrt()))
}

pub fn three_body_census(exec: Execution) -> CriterionOutcome {
    run(1, "three-body census", Some(Duration::from_secs(5)), |c| {
        for mu in [0.1, 0.3, 0.5] {
            let built = BuiltConfig { config: three_body_config(mu, 2.0)?, ring: None, three_body_mu: Some(mu) };
            let eqs = equilibria_of(&built, exec)?;
            c.require(eqs.len() == 5, || format!("mu={mu}: {} equilibria", eqs.len()));
            for sign in [1.0, -1.0] {
                let target = Vector2::new((1.0 - 2.0 * mu) / 2.0, sign * 0.75f64.sqrt());
                let best = eqs.iter().map(|e| (e.position - target).norm()).fold(f64::INFINITY, f64::min);
                c.require(best < 1e-10, || format!("mu={mu}: triangular point off by {best:e}"));
            }
            let report = morse_consistency(&eqs, 2);
            c.require(report.passed() && report.saddles == 3 && report.minima == 2, || format!("mu={mu}: {report}"));
        }
        Ok(())
    })
}

pub fn spectral_closed_forms() -> CriterionOutcome {
    run(2, "triangular-point closed forms", Some(Duration::from_secs(1)), |c| {
        let bound = routh_bound(2.0).expect("bound exists for alpha = 2");
        c.note = format!("mu_R = {bound:.10}");
        for k in 1..=20 {
            let mu = bound * k as f64 / 21.0;
            let e = l4(mu)?;
            let p = planar_bifurcations(&e)?;
            let root = (1.0 - 27.0 * mu * (1.0 - mu)).sqrt();
            let expected = [((1.0 + root) / 2.0).sqrt(), ((1.0 - root) / 2.0).sqrt()];
            c.require(p.points.len() == 2, || format!("mu={mu}: {} planar points", p.points.len()));
            for (b, want) in p.points.iter().zip(expected) {
                c.require((b.nu - want).abs() < 1e-12, || format!("mu={mu}: nu {} vs {want}", b.nu));
            }
            let nu1 = e.nu1_squared().sqrt();
            c.require((nu1 - 1.0).abs() < 1e-12, || format!("mu={mu}: nu1 = {nu1}"));
        }
        let below = planar_bifurcations(&l4(bound - 1e-6)?)?.case;
        let above = planar_bifurcations(&l4(bound + 1e-6)?)?.case;
        c.require(below == PlanarCase::TwoFrequencies, || format!("below bound: {below:?}"));
        c.require(above == PlanarCase::ComplexFrequencies, || format!("above bound: {above:?}"));
        Ok(())
    })
}

fn matrix_equilibria(exec: Execution) -> Result<Vec<(String, BuiltConfig, Vec<Equilibrium>)>> {
    test_matrix()?
        .into_iter()
        .map(|(name, built)| {
            let eqs = equilibria_of(&built, exec)?;
            Ok((name, built, eqs))
        })
        .collect()
}

pub fn index_jumps(exec: Execution) -> CriterionOutcome {
    run(3, "index jumps by definition", None, |c| {
        let mut checked = 0;
        for (name, _, eqs) in matrix_equilibria(exec)? {
            for (i, e) in eqs.iter().enumerate() {
                if e.kind == EquilibriumKind::Degenerate {
                    continue;
                }
                let (planar, points) = bifurcation_points(e, 16)?;
                let expected: Vec<i32> = match (e.kind, planar.case) {
                    (EquilibriumKind::Saddle, _) => vec![-1, -1],
                    (EquilibriumKind::Minimum, PlanarCase::TwoFrequencies) => vec![1, -1, 1],
                    _ => vec![1],
                };
                let got: Vec<i32> = points.iter().map(|b| b.eta).collect();
                c.require(got == expected, || format!("{name} eq {i}: eta {got:?}, expected {expected:?}"));
                for b in &points {
                    let block = b.block();
                    let by_definition = index_jump(e, block, b.nu)?;
                    checked += 1;
                    c.require(by_definition == b.eta, || {
                        format!("{name} eq {i} nu={}: definition {by_definition} vs {}", b.nu, b.eta)
                    });
                }
            }
        }
        c.note = format!("{checked} frequencies");
        Ok(())
    })
}

pub fn ring_structure() -> CriterionOutcome {
    run(4, "ring structure", None, |c| {
        for n in [3, 5, 7, 12] {
            for mu in [0.0, 0.001, 1.0, 1000.0] {
                let g = RingGeometry::new(n, mu, 2.0)?;
                let v = ring_radial_derivative(&g, 1.0, PI / n as f64)?;
                c.require(v < 0.0, || format!("V_r(1, pi/{n}) = {v} at mu={mu}"));
            }
        }
        for mu in [0.3, 1.0, 10.0] {
            let g = RingGeometry::new(2, mu, 2.0)?;
            let alpha = 2.0;
            for k in 0..100 {
                let r = 0.05 + 0.05 * k as f64;
                let lhs = (g.s + mu) * ring_radial_derivative(&g, r, PI / 2.0)?;
                let f = -2.0 * (r * r + 1.0).powf(-(alpha + 1.0) / 2.0);
                let rhs = r * (f + g.s) + mu * (r - r.powf(-alpha));
                c.require((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0), || {
                    format!("n=2 identity at r={r}: {lhs} vs {rhs}")
                });
            }
        }
        let small = ring_critical_rays(&RingGeometry::new(7, 0.001, 2.0)?)?;
        c.require(matches!(small.inner, InnerPair::Present { .. }), || format!("n=7 mu=0.001: {:?}", small.inner));
        let large = ring_critical_rays(&RingGeometry::new(7, 1000.0, 2.0)?)?;
        c.require(matches!(large.inner, InnerPair::Absent), || format!("n=7 mu=1000: {:?}", large.inner));
        let mut last = f64::INFINITY;
        for mu in [10.0, 1e2, 1e3, 1e4] {
            let gap = (ring_critical_rays(&RingGeometry::new(7, mu, 2.0)?)?.r3.r - 1.0).abs();
            c.require(gap < last, || format!("|r3 - 1| = {gap} at mu={mu} did not decrease"));
            last = gap;
        }
        c.note = format!("|r3 - 1| = {last:.3e} at mu = 1e4");
        Ok(())
    })
}

pub fn morse_counting(exec: Execution) -> CriterionOutcome {
    run(5, "Morse counting", None, |c| {
        let mut total = 0;
        for (name, built, eqs) in matrix_equilibria(exec)? {
            let report = morse_consistency(&eqs, built.config.len());
            total += eqs.len();
            c.require(report.passed(), || format!("{name}: {report}"));
        }
        c.note = format!("{total} equilibria");
        Ok(())
    })
}

pub fn ring_sum_oracle(exec: Execution) -> CriterionOutcome {
    run(6, "ring-sum integral representation", Some(Duration::from_secs(30)), |c| {
        let grid = CheckGrid::default();
        let rows = check_grid(&grid, exec)?;
        let worst = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
        c.require(worst < 1e-8, || format!("worst relative error {worst:e}"));
        for &n in &grid.n {
            for &beta in &grid.beta {
                for r in [0.3, 0.5, 0.9] {
                    for k in 0..grid.angles {
                        let q = RingSumQuery::new(n, beta, r, 0.4 * k as f64)?;
                        let inv = crate::ring_sum::direct_sum_s(&q.inverted())?;
                        let scaled = r.powf(beta) * crate::ring_sum::direct_sum_s(&q)?;
                        c.require((inv - scaled).abs() < 1e-10, || format!("inversion n={n} beta={beta} r={r}"));
                    }
                }
            }
        }
        let mut signs = 0;
        for q in grid.queries()? {
            let s = (q.n() as f64 * q.phi()).sin();
            if s.abs() <= 1e-3 {
                continue;
            }
            let d = ring_sum_phi(&q)?;
            signs += 1;
            c.require(d.value.signum() == -s.signum() && d.omega > 0.0, || format!("sign of S_phi at {q:?}"));
        }
        c.note = format!("{} queries, worst rel err {worst:.2e}, {signs} sign checks", rows.len());
        Ok(())
    })
}

pub fn continuation_onset() -> CriterionOutcome {
    run(7, "continuation onset at L4", Some(Duration::from_secs(60)), |c| {
        let config = three_body_config(0.01, 2.0)?;
        let e = l4(0.01)?;
        let mut points = planar_bifurcations(&e)?.points;
        points.push(spatial_bifurcation(&e, 16)?);
        let eps = [1e-2, 1e-3, 1e-4];
        let mut slopes = Vec::new();
        for b in &points {
            let mut dev = Vec::new();
            for &x in &eps {
                let s = start_branch(&config, &e, b, x, 32)?;
                let r = verify_loop(&config, &s.lp)?;
                c.require(r < 1e-9, || format!("nu={} eps={x}: residual {r:e}", b.nu));
                dev.push((s.lp.nu() - b.nu).abs());
                if b.symmetry == SymmetryClass::EightZ2tilde {
                    let n = 1024;
                    let z = s.lp.sample(n);
                    let odd = (0..n / 2).map(|k| (z[k].z + z[k + n / 2].z).abs()).fold(0.0, f64::max);
                    c.require(odd < 1e-10, || format!("eight loop z(t) + z(t + pi) = {odd:e}"));
                    c.require(s.lp.max_abs_z() > 0.0, || "eight loop is planar".into());
                }
            }
            let slope = (dev[0].ln() - dev[2].ln()) / (eps[0].ln() - eps[2].ln());
            slopes.push(slope);
            c.require((slope - 2.0).abs() <= 0.3, || format!("nu={}: slope {slope:.3}", b.nu));
        }
        c.note = format!("slopes {}", slopes.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>().join(", "));
        Ok(())
    })
}

pub fn global_branch(exec: Execution) -> CriterionOutcome {
    run(8, "three-body saddle global branch", Some(Duration::from_secs(600)), |c| {
        let mu = 0.5;
        let built = BuiltConfig { config: three_body_config(mu, 2.0)?, ring: None, three_body_mu: Some(mu) };
        let eqs = equilibria_of(&built, exec)?;
        let (anchor_index, anchor) = eqs
            .iter()
            .enumerate()
            .find(|(_, e)| e.kind == EquilibriumKind::Saddle && e.position.norm() < 1e-9)
            .ok_or_else(|| crate::Error::Domain("no saddle between the primaries".into()))?;
        let bif = planar_bifurcations(anchor)?.points[0].clone();
        let options =
            TraceOptions { landmarks: landmarks(&eqs), anchor_index: Some(anchor_index), ..Default::default() };
        let branch = trace_branch(&built.config, anchor, &bif, &options)?;
        c.note = format!("{} after {} steps", branch.termination, branch.points.len());
        match &branch.termination {
            t if t.is_non_admissible() => {}
            Termination::ReturnToEquilibrium { equilibrium, .. } => {
                c.require(*equilibrium != anchor_index, || "branch returned to its own origin".into());
                c.require(branch.eta_sum() == Some(0), || format!("eta sum {:?}", branch.eta_sum()));
            }
            other => c.failures.push(format!("termination {other} is neither non-admissible nor a return")),
        }
        Ok(())
    })
}

pub fn vertical_family() -> CriterionOutcome {
    run(9, "vertical family at the ring origin", None, |c| {
        let (config, _) = maxwell_ring_config(3, 0.0, 2.0)?;
        let e = newton_refine(&config, Vector2::zeros())?;
        let nu1_sq = nu1_squared(&config, &e.position)?;
        c.require((nu1_sq - 3.0 * 3f64.sqrt()).abs() < 1e-12, || format!("nu1^2 = {nu1_sq}"));
        let bif = spatial_bifurcation(&e, 16)?;
        let s = start_branch(&config, &e, &bif, 1e-4, 32)?;
        let planar_zero = s.lp.coefficients().iter().all(|x| x.x.norm() == 0.0 && x.y.norm() == 0.0);
        c.require(planar_zero, || "planar Fourier content is not zero".into());
        let gap = (s.lp.nu().powi(2) - nu1_sq).abs();
        c.require(gap < 1e-6, || format!("|nu^2 - nu1^2| = {gap:e}"));
        let branch = trace_branch(&config, &e, &bif, &TraceOptions { max_steps: 20, ..Default::default() })?;
        let all_zero =
            branch.points.iter().all(|p| p.lp.coefficients().iter().all(|x| x.x.norm() == 0.0 && x.y.norm() == 0.0));
        c.require(all_zero, || "planar content along the branch".into());
        c.note = format!("|nu^2 - nu1^2| = {gap:.2e}, {} branch points", branch.points.len());
        Ok(())
    })
}

/// All criteria; `include_global` adds the long global-branch trace.
pub fn standard_suite(exec: Execution, include_global: bool) -> Vec<CriterionOutcome> {
    let mut out = vec![
        three_body_census(exec),
        spectral_closed_forms(),
        index_jumps(exec),
        ring_structure(),
        morse_counting(exec),
        ring_sum_oracle(exec),
        continuation_onset(),
    ];
    if include_global {
        out.push(global_branch(exec));
    }
    out.push(vertical_family());
    out
}

/// Checks for a single user configuration: relative-equilibrium residual,
/// Morse identities and index jumps.
pub fn validate_configuration(built: &BuiltConfig, exec: Execution) -> Vec<CriterionOutcome> {
    let residual = run(1, "relative-equilibrium residual", None, |c| {
        let r = built.config.max_residual()?;
        c.note = format!("max residual {r:.3e}");
        c.require(r < crate::configuration::RESIDUAL_TOLERANCE, || format!("residual {r:e} exceeds tolerance"));
        Ok(())
    });
    if !residual.passed {
        return vec![residual];
    }
    let eqs = equilibria_of(built, exec);
    let morse = run(2, "Morse counting", None, |c| {
        let eqs = eqs.as_ref().map_err(|e| crate::Error::Domain(e.to_string()))?;
        let report = morse_consistency(eqs, built.config.len());
        c.note = report.to_string();
        c.require(report.passed(), || report.to_string());
        Ok(())
    });
    let jumps = run(3, "index jumps by definition", None, |c| {
        for (i, e) in eqs.as_ref().map_err(|e| crate::Error::Domain(e.to_string()))?.iter().enumerate() {
            if e.kind == EquilibriumKind::Degenerate {
                continue;
            }
            for b in bifurcation_points(e, 16)?.1 {
                let d = index_jump(e, b.block(), b.nu)?;
                c.require(d == b.eta, || format!("eq {i} nu={}: {d} vs {}", b.nu, b.eta));
            }
        }
        Ok(())
    });
    vec![residual, morse, jumps]
}
