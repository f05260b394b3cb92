use nalgebra::DMatrix;
use peripheral::certify::{
    density_certificate, lower_bound_r, lyapunov_certificate, Certificate, DensityVariant,
};
use peripheral::decomposition::AlphaCurve;
use peripheral::qsd::{
    conditioned_law, conditioned_limit, conditioned_path, convergence_rate, lazy_chain_certificate,
    qsd_from_decomposition, simulate_absorbed, ConvergenceRate, ModelVariant,
};
use peripheral::semigroup::{
    continuous_decomposition, propagation_check, PropagationCheck, SemigroupReport,
};
use peripheral::{
    peel_decomposition, verify_decomposition, FunctionV, Kernel, MeasureV, PeripheralDecomposition,
};
use serde::Serialize;

use crate::model::load_model;
use crate::output::{float, say, write_csv, write_json};
use crate::{
    CertificateChoice, CertifyArgs, CliError, DecomposeArgs, QsdArgs, SemigroupArgs, SimulateArgs,
};

const MAX_HORIZON: usize = 1_000_000;

fn check_range<T: PartialOrd + std::fmt::Display>(
    name: &str,
    value: T,
    lo: T,
    hi: T,
) -> Result<(), CliError> {
    if value < lo || value > hi {
        return Err(CliError::usage(format!(
            "--{name} must lie in [{lo}, {hi}], got {value}"
        )));
    }
    Ok(())
}

fn check_state(name: &str, state: usize, dim: usize) -> Result<(), CliError> {
    if state >= dim {
        return Err(CliError::usage(format!(
            "--{name}: state {state} out of range for a {dim}-state model"
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct DecomposeReport<'a> {
    decomposition: &'a PeripheralDecomposition,
    horizon: usize,
    alpha_at_horizon: Option<f64>,
}

pub fn decompose(args: &DecomposeArgs) -> Result<(), CliError> {
    check_range("horizon", args.horizon, 1, 10_000)?;
    let p = load_model(&args.io.model)?.kernel()?;
    let dec = peel_decomposition(&p).map_err(CliError::compute)?;
    let curve: AlphaCurve = verify_decomposition(&p, &dec, args.horizon);
    let alpha_at_horizon = curve.at(args.horizon);
    write_json(
        &args.io.out,
        "decomposition.json",
        &DecomposeReport {
            decomposition: &dec,
            horizon: args.horizon,
            alpha_at_horizon,
        },
    )?;
    let rows = curve
        .points
        .iter()
        .map(|pt| {
            vec![
                pt.n.to_string(),
                pt.k.to_string(),
                (pt.n * dec.d + pt.k).to_string(),
                float(pt.alpha),
            ]
        })
        .collect();
    write_csv(&args.io.out, "alpha.csv", &["n", "k", "m", "alpha"], rows)?;
    say(&format!(
        "r = {}  d = {}  items = {}  max j = {}  alpha(n = {}) = {}",
        float(dec.r),
        dec.d,
        dec.items.len(),
        dec.j.iter().max().copied().unwrap_or(0),
        args.horizon,
        alpha_at_horizon.map_or("n/a".into(), float)
    ));
    Ok(())
}

fn e_k(args: &CertifyArgs, dim: usize, required: bool) -> Result<Vec<usize>, CliError> {
    match &args.ek {
        Some(states) => {
            for &x in states {
                check_state("ek", x, dim)?;
            }
            Ok(states.clone())
        }
        None if required => Err(CliError::usage("--ek is required for this certificate")),
        None => Ok((0..dim).collect()),
    }
}

fn verdict_table(cert: &Certificate) -> String {
    let show = |v: Option<f64>| v.map_or("-".to_string(), float);
    let mut lines = vec![
        format!("{:<12} {:?}", "kind", cert.kind),
        format!("{:<12} {}", "valid", cert.valid),
        format!("{:<12} {}", "strict", cert.strict),
        format!("{:<12} {}", "r_lower", show(cert.r_lower())),
        format!("{:<12} {}", "r_ess_upper", show(cert.r_ess_upper())),
        format!("{:<12} {}", "margin", show(cert.margin)),
    ];
    for (name, value) in &cert.parameters {
        if name != "r_lower" && name != "r_ess_upper" {
            lines.push(format!("{name:<12} {}", float(*value)));
        }
    }
    lines.join("\n")
}

pub fn certify(args: &CertifyArgs) -> Result<(), CliError> {
    let model = load_model(&args.io.model)?;
    let p = model.kernel()?;
    let n = p.dim();
    let cert = match args.kind {
        CertificateChoice::Lazy => {
            let absorbed = model.absorbed()?;
            let ModelVariant::LazyChain(chain) = &absorbed.variant else {
                return Err(CliError::usage("--kind lazy needs a lazy_chain model"));
            };
            let mu = MeasureV::uniform(p.space().clone());
            // Density of R with respect to the uniform measure.
            let a = chain.r.iter().flatten().copied().fold(0.0, f64::max) * n as f64;
            lazy_chain_certificate(absorbed, &mu, a).map_err(CliError::compute)?
        }
        CertificateChoice::Lyapunov => {
            let ek = e_k(args, n, true)?;
            lyapunov_certificate(&p, &ek, &p).map_err(CliError::compute)?
        }
        CertificateChoice::Lower => lower_bound_r(&p, &FunctionV::constant(p.space().clone(), 1.0))
            .map_err(CliError::compute)?,
        CertificateChoice::Density => {
            let absorbed = model.absorbed()?;
            let ModelVariant::Density { density, masses } = &absorbed.variant else {
                return Err(CliError::usage("--kind density needs a density model"));
            };
            let ek = e_k(args, n, false)?;
            let dens = DMatrix::from_fn(n, n, |x, y| density[x][y]);
            let nu =
                MeasureV::new(p.space().clone(), masses.clone()).map_err(CliError::invariant)?;
            density_certificate(&p, &dens, &nu, &ek, DensityVariant::Integrable, None)
                .map_err(CliError::compute)?
        }
    };
    write_json(&args.io.out, "certificate.json", &cert)?;
    say(&verdict_table(&cert));
    if args.strict && !cert.strict {
        return Err(CliError::NotStrict);
    }
    Ok(())
}

#[derive(Serialize)]
struct QsdEntry {
    class: usize,
    masses: Vec<f64>,
    /// `max_y |νP(y) − r ν(y)|`.
    residual: f64,
}

#[derive(Serialize)]
struct QsdReport {
    r: f64,
    d: usize,
    start: usize,
    qsds: Vec<QsdEntry>,
    limit: Vec<f64>,
    convergence: ConvergenceRate,
    survival_at_horizon: f64,
}

fn fixed_point_residual(p: &Kernel, r: f64, nu: &MeasureV) -> f64 {
    p.left_apply(nu)
        .as_slice()
        .iter()
        .zip(nu.as_slice())
        .map(|(a, b)| (a - r * b).abs())
        .fold(0.0, f64::max)
}

pub fn qsd(args: &QsdArgs) -> Result<(), CliError> {
    check_range("horizon", args.horizon, 1, MAX_HORIZON)?;
    let p = load_model(&args.io.model)?.kernel()?;
    check_state("start", args.start, p.dim())?;
    let dec = peel_decomposition(&p).map_err(CliError::compute)?;
    let qsds = qsd_from_decomposition(&dec).map_err(CliError::compute)?;
    let mu0 = MeasureV::dirac(p.space().clone(), args.start);
    let path = conditioned_path(&mu0, &p, args.horizon).map_err(CliError::compute)?;
    let limit = conditioned_limit(&dec, &mu0).map_err(CliError::compute)?;
    let window_end = (args.horizon / dec.d).max(1);
    let convergence =
        convergence_rate(&p, &dec, &mu0, 1..=window_end).map_err(CliError::compute)?;
    let entries = qsds
        .iter()
        .zip(distinct_classes(&dec))
        .map(|(nu, class)| QsdEntry {
            class,
            masses: nu.as_slice().to_vec(),
            residual: fixed_point_residual(&p, dec.r, nu),
        })
        .collect();
    write_json(
        &args.io.out,
        "qsd.json",
        &QsdReport {
            r: dec.r,
            d: dec.d,
            start: args.start,
            qsds: entries,
            limit,
            convergence,
            survival_at_horizon: path.last().expect("horizon ≥ 1").survival,
        },
    )?;
    let rows = path
        .iter()
        .flat_map(|law| {
            law.masses.iter().enumerate().map(move |(x, m)| {
                vec![
                    law.n.to_string(),
                    x.to_string(),
                    float(*m),
                    float(law.survival),
                ]
            })
        })
        .collect();
    write_csv(
        &args.io.out,
        "conditioned.csv",
        &["n", "state", "mass", "survival"],
        rows,
    )?;
    say(&format!(
        "r = {}  d = {}  qsds = {}",
        float(dec.r),
        dec.d,
        qsds.len()
    ));
    Ok(())
}

/// Classes of the items in order of first appearance (one QSD per class).
fn distinct_classes(dec: &PeripheralDecomposition) -> Vec<usize> {
    let mut seen = Vec::new();
    for item in &dec.items {
        if !seen.contains(&item.class) {
            seen.push(item.class);
        }
    }
    seen
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    check_range("horizon", args.horizon, 1, MAX_HORIZON)?;
    check_range("paths", args.paths, 1, 1_000_000_000)?;
    let p = load_model(&args.io.model)?.kernel()?;
    check_state("start", args.start, p.dim())?;
    let sim = simulate_absorbed(&p, args.start, args.horizon, args.paths, args.seed, None)
        .map_err(CliError::compute)?;
    write_json(&args.io.out, "simulation.json", &sim)?;
    let survival = sim
        .survival_curve
        .iter()
        .enumerate()
        .map(|(n, s)| vec![n.to_string(), float(*s)])
        .collect();
    write_csv(&args.io.out, "simulation.csv", &["n", "survival"], survival)?;

    let mu0 = MeasureV::dirac(p.space().clone(), args.start);
    let mut rows = Vec::new();
    for checkpoint in &sim.checkpoints {
        let Some(law) = &checkpoint.law else { continue };
        let exact = conditioned_law(&mu0, &p, checkpoint.n).map_err(CliError::compute)?;
        for (x, (emp, ex)) in law.iter().zip(&exact.masses).enumerate() {
            rows.push(vec![
                checkpoint.n.to_string(),
                x.to_string(),
                float(*emp),
                float(*ex),
            ]);
        }
    }
    write_csv(
        &args.io.out,
        "simulation_law.csv",
        &["n", "state", "empirical", "exact"],
        rows,
    )?;
    let last = sim.checkpoints.last();
    say(&format!(
        "paths = {}  seed = {}  survivors at n = {}: {}",
        sim.paths,
        sim.seed,
        last.map_or(0, |c| c.n),
        last.map_or(0, |c| c.survivors)
    ));
    Ok(())
}

#[derive(Serialize)]
struct SemigroupOutput {
    report: SemigroupReport,
    propagation: PropagationCheck,
}

pub fn semigroup(args: &SemigroupArgs) -> Result<(), CliError> {
    if !(args.time > 0.0 && args.time.is_finite()) {
        return Err(CliError::usage(format!(
            "--time must be positive, got {}",
            args.time
        )));
    }
    check_range("tol", args.tol, 1e-16, 1e-3)?;
    let [t1, t2] = args.propagate[..] else {
        return Err(CliError::usage("--propagate takes two times"));
    };
    let l = load_model(&args.io.model)?.generator_model()?;
    let report = continuous_decomposition(&l, args.time, args.tol).map_err(CliError::compute)?;
    let propagation = propagation_check(&l, t1, t2, args.tol).map_err(CliError::compute)?;
    let alpha = report
        .alpha_t
        .iter()
        .map(|a| vec![float(a.t), float(a.alpha)])
        .collect();
    write_csv(&args.io.out, "alpha_t.csv", &["t", "alpha"], alpha)?;
    let flow = report
        .flow
        .iter()
        .map(|f| vec![float(f.h), float(f.residual)])
        .collect();
    write_csv(&args.io.out, "flow.csv", &["h", "residual"], flow)?;
    say(&format!(
        "d = {}  items = {}  r(P_1) = {}  max flow residual = {}  propagation consistent = {}",
        report.decomposition.d,
        report.decomposition.items.len(),
        float(report.r1),
        float(report.max_flow_residual),
        propagation.consistent
    ));
    write_json(
        &args.io.out,
        "semigroup.json",
        &SemigroupOutput {
            report,
            propagation,
        },
    )?;
    Ok(())
}
