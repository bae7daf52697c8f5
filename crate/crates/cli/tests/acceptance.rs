//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any failed.
//!
//! CSV outputs are written to `$CAPA_ACCEPTANCE_OUT` when set (for plotting),
//! otherwise to a temporary directory.

use std::f64::consts::{FRAC_PI_4, PI};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use capa_cli::commands::{run_sweep, spectrum_csv, sweep_csv};
use capa_cli::ConfigFile;
use capa_core::kernels::fresnel_amplitude;
use capa_core::landau::{landau_tolerance, plateau_prediction};
use capa_core::nystrom::gram_eigenvalues;
use capa_core::{
    build_operator, count_edof, dof_closed_form, gauss_legendre_grid, projected_submatrix_det,
    refine_until_converged, rotation_from_euler, singular_values, water_fill, ApertureSpec,
    Complex64, EulerAngles, KernelKind, LinkGeometry, Medium, PlanePoint, RefineOptions,
};
use rand::{Rng, SeedableRng};

const N: usize = 32;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn medium() -> Medium {
    Medium::from_frequency(2.4e9).unwrap()
}

fn link(med: &Medium, side_wl: f64, dist_wl: f64, angles: EulerAngles) -> LinkGeometry {
    let ap = ApertureSpec::square(side_wl * med.lambda).unwrap();
    LinkGeometry::new(ap, ap, [0.0, dist_wl * med.lambda, 0.0], angles).unwrap()
}

fn rotated() -> EulerAngles {
    EulerAngles::new(FRAC_PI_4, 0.0, FRAC_PI_4).unwrap()
}

fn spectrum(kind: KernelKind, med: &Medium, geom: &LinkGeometry, n: usize) -> Vec<f64> {
    let rx = gauss_legendre_grid(geom.rx(), n).unwrap();
    let tx = gauss_legendre_grid(geom.tx(), n).unwrap();
    let op = build_operator(kind, med, geom, &rx, &tx).unwrap();
    singular_values(&op).unwrap().values().to_vec()
}

/// Largest deviation of `a` from `b`, relative to `b[0]` over all values and
/// relative to each value over the leading ten.
fn spectral_gap(a: &[f64], b: &[f64]) -> (f64, f64) {
    let lead = b[0];
    let global = a.iter().zip(b).map(|(x, y)| (x - y).abs() / lead).fold(0.0, f64::max);
    let top = a.iter().zip(b).take(10).map(|(x, y)| (x - y).abs() / y).fold(0.0, f64::max);
    (global, top)
}

struct Ctx {
    med: Medium,
    out_dir: PathBuf,
    parallel_fresnel: Vec<f64>,
    rotated_fresnel: Vec<f64>,
}

fn closed_form_dof(ctx: &Ctx) -> Outcome {
    let med = &ctx.med;
    let par = dof_closed_form(med, &link(med, 10.0, 50.0, EulerAngles::ZERO));
    let rot = dof_closed_form(med, &link(med, 10.0, 50.0, rotated()));
    let near = dof_closed_form(med, &link(med, 10.0, 25.0, EulerAngles::ZERO));
    // cos^2(pi/4) is 0.5 + 1 ulp in binary64; allow that rounding and nothing more.
    check(
        par == 4.0 && near == 16.0 && (rot - 2.0).abs() <= 4.0 * f64::EPSILON,
        format!("parallel {par}, rotated {rot}, D=25λ {near}"),
    )
}

fn determinant_law(_: &Ctx) -> Outcome {
    let grid: Vec<f64> = (0..10).map(|i| -PI + 2.0 * PI * (i as f64 + 0.5) / 10.0).collect();
    let mut worst = 0.0_f64;
    let mut largest = 0.0_f64;
    for &a in &grid {
        for &b in &grid {
            for &g in &grid {
                let e = rotation_from_euler(&EulerAngles::new(a, b, g).unwrap()).unwrap();
                let det = projected_submatrix_det(&e);
                let want = (a.cos() * g.cos() + a.sin() * g.sin() * b.sin()).abs();
                worst = worst.max((det - want).abs());
                largest = largest.max(det);
            }
        }
    }
    check(
        worst <= 1e-12 && largest <= 1.0,
        format!("max |error| {worst:.2e}, max det {largest:.15}"),
    )
}

fn unitary_equivalence(ctx: &Ctx) -> Outcome {
    let med = &ctx.med;
    let mut details = Vec::new();
    let mut ok = true;
    for (name, angles, fresnel) in [
        ("parallel", EulerAngles::ZERO, &ctx.parallel_fresnel),
        ("rotated", rotated(), &ctx.rotated_fresnel),
    ] {
        let geom = link(med, 10.0, 50.0, angles);
        let amp = fresnel_amplitude(med, &geom);
        let scaled: Vec<f64> = spectrum(KernelKind::Reduced, med, &geom, N)
            .iter()
            .map(|s| amp * s)
            .collect();
        let (global, top) = spectral_gap(fresnel, &scaled);
        ok &= global <= 1e-10 && top <= 1e-10;
        details.push(format!("{name}: {global:.1e} of σ1, top-10 {top:.1e}"));
    }
    check(ok, details.join("; "))
}

fn step_polarization(ctx: &Ctx) -> Outcome {
    let par = count_edof(&ctx.parallel_fresnel, 0.5).unwrap();
    let rot = count_edof(&ctx.rotated_fresnel, 0.5).unwrap();
    check(
        (2..=6).contains(&par) && (1..=4).contains(&rot) && rot <= par,
        format!("parallel count {par} (predicted 4), rotated count {rot} (predicted 2)"),
    )
}

fn plateau_level(ctx: &Ctx) -> Outcome {
    let med = &ctx.med;
    let geom = link(med, 10.0, 50.0, EulerAngles::ZERO);
    let dof = dof_closed_form(med, &geom);
    let take = ((dof / 2.0).floor() as usize).max(1);
    let mean = ctx.parallel_fresnel[..take].iter().sum::<f64>() / take as f64;
    let want = plateau_prediction(med, geom.det_eprime()).unwrap();
    let rel = (mean - want).abs() / want;
    check(
        rel <= 0.15,
        format!("mean of top {take} = {mean:.3} Ω vs {want:.3} Ω ({:.1}% off)", 100.0 * rel),
    )
}

fn distance_monotonicity(ctx: &Ctx) -> Outcome {
    let cfg = ConfigFile::parse(
        "[sweep]\nparameter = \"distance\"\nvalues = [\"25lambda\", \"50lambda\", \"100lambda\"]\n",
    )
    .unwrap();
    let rows = run_sweep(cfg.sweep.as_ref().unwrap(), false).map_err(|e| e.to_string())?;
    write(&ctx.out_dir.join("distance_sweep.csv"), &sweep_csv(&rows));
    let counts: Vec<usize> = rows.iter().map(|r| r.edof_count).collect();
    let dofs: Vec<f64> = rows.iter().map(|r| r.dof_formula).collect();
    let monotone = counts.windows(2).all(|w| w[1] <= w[0]);
    let within = rows
        .iter()
        .all(|r| (r.edof_count as f64 - r.dof_formula).abs() <= landau_tolerance(r.dof_formula));
    check(
        monotone && within && dofs == [16.0, 4.0, 1.0],
        format!("counts {counts:?} vs predicted {dofs:?}"),
    )
}

fn scaling_relation(ctx: &Ctx) -> Outcome {
    let med = &ctx.med;
    let geom = link(med, 10.0, 50.0, EulerAngles::ZERO);
    let ep = geom.rotation().projected_submatrix();
    let bilinear = |coupling: f64| {
        move |r: PlanePoint, t: PlanePoint| {
            let er = [ep[0][0] * r[0] + ep[0][1] * r[1], ep[1][0] * r[0] + ep[1][1] * r[1]];
            Complex64::cis(coupling * (t[0] * er[0] + t[1] * er[1]))
        }
    };
    let coupling = med.k0 / geom.distance();
    let upsilon = coupling.sqrt();
    let grids = |rx: &ApertureSpec, tx: &ApertureSpec| {
        (gauss_legendre_grid(rx, N).unwrap(), gauss_legendre_grid(tx, N).unwrap())
    };
    let (rx, tx) = grids(geom.rx(), geom.tx());
    let base = capa_core::nystrom::build_operator_with(&rx, &tx, bilinear(coupling));
    let (rx_s, tx_s) = grids(&geom.rx().scaled(upsilon).unwrap(), &geom.tx().scaled(upsilon).unwrap());
    let scaled = capa_core::nystrom::build_operator_with(&rx_s, &tx_s, bilinear(1.0));
    let base = singular_values(&base).unwrap();
    let scaled = singular_values(&scaled).unwrap();
    let worst = scaled
        .values()
        .iter()
        .zip(base.values())
        .take(8)
        .map(|(s, b)| (s - upsilon * upsilon * b).abs() / (upsilon * upsilon * b))
        .fold(0.0, f64::max);
    check(worst <= 1e-8, format!("max relative error on top 8: {worst:.1e}"))
}

fn exact_vs_fresnel(ctx: &Ctx) -> Outcome {
    let med = &ctx.med;
    let geom = link(med, 10.0, 50.0, EulerAngles::ZERO);
    let exact = spectrum(KernelKind::Exact, med, &geom, N);
    write(&ctx.out_dir.join("exact_parallel.csv"), &spectrum_csv(&exact).unwrap());
    let worst = exact
        .iter()
        .zip(&ctx.parallel_fresnel)
        .take(4)
        .map(|(e, f)| (e - f).abs() / f)
        .fold(0.0, f64::max);
    check(worst <= 0.05, format!("max relative difference on top 4: {:.2}%", 100.0 * worst))
}

fn nystrom_convergence(ctx: &Ctx) -> Outcome {
    let med = &ctx.med;
    let geom = link(med, 10.0, 50.0, EulerAngles::ZERO);
    let opts = RefineOptions {
        n_start: 8,
        tol: 1e-6,
        k_track: 10,
        n_cap: 128,
    };
    let refined = refine_until_converged(KernelKind::Fresnel, med, &geom, &opts).unwrap();
    let n = refined.n_per_dim();

    let rx = gauss_legendre_grid(geom.rx(), N).unwrap();
    let tx = gauss_legendre_grid(geom.tx(), N).unwrap();
    let op = build_operator(KernelKind::Fresnel, med, &geom, &rx, &tx).unwrap();
    let squares: Vec<f64> = ctx.parallel_fresnel.iter().map(|s| s * s).collect();
    let eig = gram_eigenvalues(&op).unwrap();
    let (global, top) = spectral_gap(&eig, &squares);
    check(
        refined.converged() && n <= 48 && global <= 1e-10 && top <= 1e-10,
        format!(
            "converged={} at n={n}; Gram vs σ²: {global:.1e} of σ1², top-10 {top:.1e}",
            refined.converged()
        ),
    )
}

fn water_filling(_: &Ctx) -> Outcome {
    let res = water_fill(&[1.0, 0.25], 3.0).map_err(|e| e.to_string())?;
    let example = res.allocations == [3.0, 0.0] && res.capacity_bits == 2.0 && res.water_level == 4.0;

    let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
    let mut failures = 0;
    for _ in 0..1000 {
        let m = rng.gen_range(1..=32);
        let mut gains: Vec<f64> = (0..m)
            .map(|_| if rng.gen_bool(0.1) { 0.0 } else { 10f64.powf(rng.gen_range(-3.0..3.0)) })
            .collect();
        gains.push(10f64.powf(rng.gen_range(-3.0..3.0)));
        let power = 10f64.powf(rng.gen_range(-4.0..4.0));
        let r = water_fill(&gains, power).unwrap();
        let total: f64 = r.allocations.iter().sum();
        let mu = r.water_level;
        let kkt = gains.iter().zip(&r.allocations).all(|(&g, &p)| {
            if p < 0.0 {
                false
            } else if p > 0.0 {
                (p + 1.0 / g - mu).abs() <= 1e-9 * mu
            } else {
                g == 0.0 || 1.0 / g >= mu * (1.0 - 1e-9)
            }
        });
        if !(kkt && (total - power).abs() <= 1e-9 * power) {
            failures += 1;
        }
    }
    check(
        example && failures == 0,
        format!(
            "example p={:?} C={} bits; {failures}/1000 random instances violate KKT or budget",
            res.allocations, res.capacity_bits
        ),
    )
}

fn determinism(ctx: &Ctx) -> Outcome {
    let run = |threads: &str| -> Result<Vec<u8>, String> {
        let out = ctx.out_dir.join(format!("determinism_{threads}.csv"));
        let o = Command::new(env!("CARGO_BIN_EXE_capa"))
            .args(["--threads", threads, "spectrum", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !o.status.success() {
            return Err(String::from_utf8_lossy(&o.stderr).into_owned());
        }
        std::fs::read(&out).map_err(|e| e.to_string())
    };
    let one = run("1")?;
    let four = run("4")?;
    check(
        one == four,
        format!("1 vs 4 threads: {} bytes, identical = {}", one.len(), one == four),
    )
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn main() {
    let _tmp;
    let out_dir = match std::env::var_os("CAPA_ACCEPTANCE_OUT") {
        Some(dir) => {
            let dir = PathBuf::from(dir);
            std::fs::create_dir_all(&dir).unwrap();
            dir
        }
        None => {
            _tmp = tempfile::TempDir::new().unwrap();
            _tmp.path().to_path_buf()
        }
    };

    let med = medium();
    let parallel_fresnel = spectrum(KernelKind::Fresnel, &med, &link(&med, 10.0, 50.0, EulerAngles::ZERO), N);
    let rotated_fresnel = spectrum(KernelKind::Fresnel, &med, &link(&med, 10.0, 50.0, rotated()), N);
    write(&out_dir.join("fresnel_parallel.csv"), &spectrum_csv(&parallel_fresnel).unwrap());
    write(&out_dir.join("fresnel_rotated.csv"), &spectrum_csv(&rotated_fresnel).unwrap());
    let ctx = Ctx {
        med,
        out_dir,
        parallel_fresnel,
        rotated_fresnel,
    };

    let criteria: [(&str, fn(&Ctx) -> Outcome); 11] = [
        ("closed-form DOF", closed_form_dof),
        ("determinant law", determinant_law),
        ("unitary equivalence", unitary_equivalence),
        ("step polarization", step_polarization),
        ("plateau level", plateau_level),
        ("distance monotonicity", distance_monotonicity),
        ("scaling relation", scaling_relation),
        ("exact vs fresnel", exact_vs_fresnel),
        ("nystrom convergence", nystrom_convergence),
        ("water-filling", water_filling),
        ("determinism", determinism),
    ];

    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = f(&ctx);
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name:<22} {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name:<22} {detail} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
