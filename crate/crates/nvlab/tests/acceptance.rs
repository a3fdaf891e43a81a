// Acceptance run: one PASS/FAIL line per criterion. Built with harness = false
// so the report reaches stdout under plain `cargo test`.

use std::time::Instant;

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nvlab::asymptotics_lab::{decay_sweep, fit_constant, ray_lattice, ray_scan, sample_v, SweepConfig};
use nvlab::cplane_quadrature::{GridUse, ResolutionPolicy};
use nvlab::dbar_solver::{direct_apply_a, DbarContext, PotentialSample, SolverConfig};
use nvlab::linearized_flow::{
    born_support_check, check_linearized_pde, decompose_integral, uniform_decay, LinearData,
};
use nvlab::phase_geometry::{
    classify_region, phase_dzeta, phase_dzeta_product, solve_cubic, RegionClass,
};
use nvlab::scattering_data::ScatteringData;
use nvlab::NvError;

const C0: f64 = 0.05;
const WIDTH: f64 = 0.6;
const BUDGET_8_S: f64 = 3600.0;

struct Report {
    failed: Vec<usize>,
}

impl Report {
    fn line(&mut self, n: usize, ok: bool, detail: String, start: Instant) {
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("criterion {n}: {tag} ({detail}) [{:.1} s]", start.elapsed().as_secs_f64());
        if !ok {
            self.failed.push(n);
        }
    }
}

fn data() -> ScatteringData {
    ScatteringData::bump(C0, WIDTH)
}

fn random_u(rng: &mut ChaCha8Rng, r: f64) -> C {
    let rad = r * rng.gen::<f64>().sqrt();
    C::from_polar(rad, rng.gen_range(0.0..std::f64::consts::TAU))
}

fn close(a: C, b: C) -> bool {
    (a - b).norm() < 1e-12
}

fn same_roots(got: [C; 3], want: [C; 3]) -> bool {
    // order-free comparison, anchors may contain repeated roots
    let mut used = [false; 3];
    want.iter().all(|w| {
        if let Some(i) = (0..3).find(|&i| !used[i] && close(got[i], *w)) {
            used[i] = true;
            true
        } else {
            false
        }
    })
}

fn criterion_1(rep: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut bad = 0;
    let (mut interior, mut exterior, mut other) = (0, 0, 0);
    for _ in 0..1000 {
        let u = random_u(&mut rng, 40.0);
        let roots = solve_cubic(u);
        let m = roots.moduli();
        let ok = match classify_region(u) {
            Ok(RegionClass::Interior) => {
                interior += 1;
                m.iter().all(|x| (x - 1.0).abs() < 1e-7)
            }
            Ok(RegionClass::Exterior { .. }) => {
                exterior += 1;
                let x = roots.xi;
                (x[0] * x[2].conj() - 1.0).norm() < 1e-9 && (m[1] - 1.0).abs() < 1e-7
            }
            Ok(_) => {
                other += 1;
                m.iter().all(|x| (x - 1.0).abs() < 1e-6)
            }
            Err(_) => false,
        };
        if !ok {
            bad += 1;
        }
    }
    let s3 = 3f64.sqrt();
    let w = C::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let one = C::new(1.0, 0.0);
    let anchors = [
        (0.0, [one, w, w.conj()], "Interior"),
        (18.0, [one, one, one], "BoundaryCusp"),
        (-6.0, [-one, -one, one], "BoundaryRegular"),
        (30.0, [C::new(2.0 + s3, 0.0), one, C::new(2.0 - s3, 0.0)], "Exterior"),
    ];
    let mut anchors_ok = 0;
    for (u, want, class) in anchors {
        let u = C::new(u, 0.0);
        let r = solve_cubic(u);
        if same_roots(r.xi, want) && classify_region(u).map(|c| c.name() == class).unwrap_or(false) {
            anchors_ok += 1;
        }
    }
    if let Ok(RegionClass::Exterior { omega, .. }) = classify_region(C::new(30.0, 0.0)) {
        if ((2.0 + s3).sqrt() - 1.0 - omega).abs() > 1e-12 {
            anchors_ok -= 1;
        }
    }
    let ok = bad == 0 && anchors_ok == 4 && start.elapsed().as_secs_f64() < 5.0;
    rep.line(
        1,
        ok,
        format!("{bad}/1000 inconsistent; {interior} interior, {exterior} exterior, {other} boundary; anchors {anchors_ok}/4"),
        start,
    );
}

fn criterion_2(rep: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let u = random_u(&mut rng, 40.0);
        let zeta = C::from_polar(rng.gen_range(-1.5f64..1.5).exp(), rng.gen_range(0.0..std::f64::consts::TAU));
        let roots = solve_cubic(u);
        let a = phase_dzeta(u, zeta).unwrap();
        let b = phase_dzeta_product(&roots, zeta).unwrap();
        worst = worst.max((a - b).norm() / a.norm());
    }
    let ok = worst < 1e-9 && start.elapsed().as_secs_f64() < 5.0;
    rep.line(2, ok, format!("max relative difference {worst:.2e} over 10^4 samples"), start);
}

fn criterion_3(rep: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = LinearData::plain(data());
    let policy = ResolutionPolicy::default();
    let mut ok = true;
    let (mut rmin, mut rmax, mut cmin, mut cmax) = (f64::MAX, 0.0f64, f64::MAX, 0.0f64);
    for _ in 0..10 {
        let t = rng.gen_range(0.5..3.0);
        let z = random_u(&mut rng, 8.0);
        match check_linearized_pde(&f, t, z, (0.02, 0.05), &policy) {
            Ok(r) => {
                rmin = rmin.min(r.ratio);
                rmax = rmax.max(r.ratio);
                cmin = cmin.min(r.constraint_ratio);
                cmax = cmax.max(r.constraint_ratio);
                ok &= (3.0..=5.0).contains(&r.ratio) && (3.0..=5.0).contains(&r.constraint_ratio);
            }
            Err(_) => ok = false,
        }
    }
    ok &= start.elapsed().as_secs_f64() < 120.0;
    rep.line(
        3,
        ok,
        format!("residual ratio in [{rmin:.3}, {rmax:.3}], constraint ratio in [{cmin:.3}, {cmax:.3}]"),
        start,
    );
}

fn criterion_4(rep: &mut Report) {
    let start = Instant::now();
    let f = LinearData::plain(data());
    let us: Vec<f64> = (0..40).map(|a| -25.0 + 50.0 * a as f64 / 39.0).collect();
    let ts = [5.0, 10.0, 20.0, 40.0, 80.0];
    // t = 80 over |u| ≤ 25√2 needs ~4.1e7 integral nodes, just past the default budget
    let policy = ResolutionPolicy { max_nodes: 100_000_000, ..Default::default() };
    match uniform_decay(&f, &ts, &us, &us, &policy) {
        Ok(rows) => {
            let base = rows[0].1;
            let worst = rows.iter().map(|r| r.1 / base).fold(0.0, f64::max);
            let list: Vec<String> = rows.iter().map(|r| format!("{:.3e}", r.1)).collect();
            let ok = worst <= 3.0 && start.elapsed().as_secs_f64() < 600.0;
            rep.line(4, ok, format!("normalized max {} ; worst/t5 = {worst:.3}", list.join(" ")), start);
        }
        Err(e) => rep.line(4, false, format!("error: {e}"), start),
    }
}

fn criterion_5(rep: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = LinearData::plain(data());
    let policy = ResolutionPolicy::default();
    let mut worst = 0.0f64;
    let mut errors = 0;
    let mut n = 0;
    while n < 20 {
        let t = rng.gen_range(10.0..40.0);
        let u = random_u(&mut rng, 30.0);
        // a point on the curve has no ε-separated disks; classification tells us
        if classify_region(u).is_err() {
            continue;
        }
        n += 1;
        match decompose_integral(&f, t, u, 1.0 / t, &policy) {
            Ok(d) => worst = worst.max(d.rel_error),
            Err(e) => {
                eprintln!("decomposition failed at t={t}, u={u}: {e}");
                errors += 1;
            }
        }
    }
    let ok = errors == 0 && worst < 1e-3 && start.elapsed().as_secs_f64() < 300.0;
    rep.line(5, ok, format!("max relative error {worst:.2e} over 20 triples, {errors} errors"), start);
}

/// z ∈ {0, 1+0.5i, −3+2i, 8−5i} × t ∈ {0, 0.5, 2, 5} plus two far points.
fn test_lattice() -> Vec<(C, f64)> {
    let zs = [C::new(0.0, 0.0), C::new(1.0, 0.5), C::new(-3.0, 2.0), C::new(8.0, -5.0)];
    let mut out: Vec<(C, f64)> =
        zs.iter().flat_map(|&z| [0.0, 0.5, 2.0, 5.0].map(|t| (z, t))).collect();
    out.push((C::new(30.0, 10.0), 5.0));
    out.push((C::new(100.0, 30.0), 10.0));
    out
}

fn lattice_samples() -> Vec<(C, f64, nvlab::Result<PotentialSample>)> {
    let cfg = SweepConfig::default();
    test_lattice().into_iter().map(|(z, t)| (z, t, sample_v(&data(), z, t, &cfg))).collect()
}

fn criterion_6(rep: &mut Report, samples: &[(C, f64, nvlab::Result<PotentialSample>)], lattice_time: f64) {
    let start = Instant::now();
    let policy = ResolutionPolicy::default();
    let probes_at = [(C::new(2.0, 1.0), 1.0), (C::new(-5.0, 3.0), 3.0)];
    let mut worst = 0.0f64;
    let mut probes = 0;
    let mut ok = true;
    let g_f = |l: C| C::new(1.0, 0.0) + l * 0.3;
    for (pi, &(z, t)) in probes_at.iter().enumerate() {
        let ctx = DbarContext::for_point(data(), WIDTH, &policy, z.norm(), t, SolverConfig::default()).unwrap();
        let g = &ctx.grid;
        let a = ctx.operator(z, t).apply_a(&g.sample(g_f)).unwrap();
        let nodes: Vec<(usize, usize)> = if pi == 0 {
            vec![(g.n_r / 4, 3), (g.n_r / 2 - 10, g.n_theta / 3), (3 * g.n_r / 4, g.n_theta / 2)]
        } else {
            vec![(g.n_r / 2 + 7, 11), (g.n_r - 5, g.n_theta - 7)]
        };
        for (j, k) in nodes {
            let m = 8;
            let direct = direct_apply_a(
                &data(),
                z,
                t,
                WIDTH,
                m * g.n_r,
                m * g.n_theta,
                0.5 * g.dtheta / m as f64,
                g_f,
                g.node(j, k),
            )
            .unwrap();
            worst = worst.max((a[j * g.n_theta + k] - direct).norm() / direct.norm());
            probes += 1;
        }
    }
    ok &= worst < 1e-3;
    let mut max_iter = 0;
    let mut failures = 0;
    for (_, _, s) in samples {
        match s {
            Ok(p) => max_iter = max_iter.max(p.iterations),
            Err(_) => failures += 1,
        }
    }
    ok &= failures == 0 && max_iter <= 50;
    let zero = ScatteringData::bump(0.0, WIDTH);
    let mut zero_exact = true;
    for (z, t) in test_lattice() {
        let ctx = DbarContext::for_point(zero, WIDTH, &policy, z.norm(), t, SolverConfig::default()).unwrap();
        zero_exact &= matches!(ctx.reconstruct_v(z, t), Ok(p) if p.v == C::new(0.0, 0.0));
    }
    ok &= zero_exact;
    let elapsed = start.elapsed().as_secs_f64() + lattice_time;
    ok &= elapsed < 300.0;
    rep.line(
        6,
        ok,
        format!(
            "oracle max rel {worst:.2e} at {probes} probes; max iterations {max_iter}, {failures} failures on {} points; c=0 exact: {zero_exact}",
            samples.len()
        ),
        start,
    );
}

fn criterion_7(rep: &mut Report, samples: &[(C, f64, nvlab::Result<PotentialSample>)], lattice_time: f64) {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut ok = true;
    for (_, _, s) in samples {
        match s {
            Ok(p) => worst = worst.max(p.imag_leak / (1.0 + p.v.norm())),
            Err(_) => ok = false,
        }
    }
    ok &= worst <= 1e-3;
    let f = LinearData::plain(data());
    let born = born_support_check(&f, 1.0, 240.0, 1.0, &ResolutionPolicy::default());
    let detail = match &born {
        Ok(b) => {
            ok &= b.max_in_gap < 5e-2;
            format!("max_in_gap {:.2e}, window edge ratio {:.2e}", b.max_in_gap, b.boundary_ratio)
        }
        Err(e) => {
            ok = false;
            format!("Born check error: {e}")
        }
    };
    ok &= start.elapsed().as_secs_f64() + lattice_time < 300.0;
    rep.line(7, ok, format!("max |Im v|/(1+|v|) {worst:.2e}; {detail}"), start);
}

/// Work units of one sample: operator nodes times log2 of that.
fn units(cfg: &SweepConfig, z: C, t: f64) -> f64 {
    let (n_r, n_t) = cfg.policy.sizes(cfg.s_max, z.norm(), t, GridUse::Operator).unwrap();
    let n = (n_r * n_t) as f64;
    n * n.log2()
}

fn criterion_8(rep: &mut Report) -> bool {
    let start = Instant::now();
    let d = data();
    let cfg = SweepConfig::default();
    let sweep_t = [5.0, 10.0, 20.0, 40.0];
    let ray_t = [10.0, 20.0, 40.0];
    let rays = ray_lattice(9, 30.0);

    // cost model calibrated on a few representative solves
    let mut rate = Vec::new();
    for (z, t) in [(C::new(40.0, 20.0), 5.0), (C::new(-150.0, 60.0), 10.0), (C::new(200.0, -300.0), 20.0)] {
        let s = Instant::now();
        if sample_v(&d, z, t, &cfg).is_err() {
            continue;
        }
        rate.push(s.elapsed().as_secs_f64() / units(&cfg, z, t));
    }
    rate.sort_by(|a, b| a.total_cmp(b));
    let kappa = rate.get(rate.len() / 2).copied().unwrap_or(f64::INFINITY);
    let mut total = 0.0;
    for &t in &sweep_t {
        total += cfg.lattice(t).iter().map(|&z| units(&cfg, z, t)).sum::<f64>();
    }
    for &u in &rays {
        total += ray_t.iter().map(|&t| units(&cfg, u * t, t)).sum::<f64>();
    }
    let threads = rayon::current_num_threads() as f64;
    let projected = kappa * total / threads;

    // cheap partial evidence along the two rays singled out as examples
    let mut info = Vec::new();
    for u in [C::new(0.0, 0.0), C::new(18.0, 0.0)] {
        match ray_scan(&d, u, &[10.0, 20.0, 40.0, 50.0], &cfg) {
            Ok(r) => {
                let v: Vec<String> = r.samples.iter().map(|s| format!("{:.2e}", s.1)).collect();
                let halved = r.samples[3].1 <= 0.5 * r.samples[0].1;
                info.push(format!("u={}: |v| {} (t=50 ≤ half of t=10: {halved})", u.re, v.join(" ")));
            }
            Err(e) => info.push(format!("u={}: {e}", u.re)),
        }
    }
    for line in &info {
        println!("criterion 8 info: {line}");
    }

    let full = std::env::var("NV_ACCEPTANCE_FULL").map(|v| v == "1").unwrap_or(false);
    if !full && projected > BUDGET_8_S {
        rep.line(
            8,
            false,
            format!(
                "not run: projected {:.1} h on {} threads exceeds the 60 min budget; set NV_ACCEPTANCE_FULL=1 to run anyway",
                projected / 3600.0,
                threads
            ),
            start,
        );
        return false;
    }
    let full_start = Instant::now();
    let curve = decay_sweep(&d, &sweep_t, &cfg);
    let mut ok = true;
    let mut detail = String::new();
    match curve.and_then(|c| fit_constant(&c)) {
        Ok(fit) => {
            ok &= fit.bounded;
            detail.push_str(&format!("max ratio {:.3}", fit.max_ratio));
        }
        Err(NvError::InsufficientData { got, .. }) => {
            ok = false;
            detail.push_str(&format!("only {got} sweep entries"));
        }
        Err(e) => {
            ok = false;
            detail.push_str(&format!("sweep error: {e}"));
        }
    }
    let mut decreasing = 0;
    for &u in &rays {
        if ray_scan(&d, u, &ray_t, &cfg).map(|r| r.strictly_decreasing()).unwrap_or(false) {
            decreasing += 1;
        }
    }
    ok &= decreasing == rays.len();
    ok &= full_start.elapsed().as_secs_f64() < BUDGET_8_S;
    detail.push_str(&format!("; {decreasing}/{} rays strictly decreasing", rays.len()));
    rep.line(8, ok, detail, start);
    true
}

fn main() {
    // libtest flags such as --nocapture or a filter may be passed through
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if args.iter().any(|a| !"acceptance".contains(a.as_str())) {
        return;
    }
    let mut rep = Report { failed: Vec::new() };
    criterion_1(&mut rep);
    criterion_2(&mut rep);
    criterion_3(&mut rep);
    criterion_4(&mut rep);
    criterion_5(&mut rep);
    let s = Instant::now();
    let samples = lattice_samples();
    let lattice_time = s.elapsed().as_secs_f64();
    criterion_6(&mut rep, &samples, lattice_time);
    criterion_7(&mut rep, &samples, lattice_time);
    let ran_8 = criterion_8(&mut rep);
    // a criterion 8 that was not run for budget reasons is reported, not fatal
    let fatal: Vec<usize> = rep.failed.iter().copied().filter(|&n| n != 8 || ran_8).collect();
    println!("acceptance: {} of 8 criteria passed", 8 - rep.failed.len());
    if !fatal.is_empty() {
        eprintln!("failed criteria: {fatal:?}");
        std::process::exit(1);
    }
}
