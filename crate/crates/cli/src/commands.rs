use std::fmt::Write as _;

use num_complex::Complex64;
use serde_json::json;
use solstab::construction::{build_sharp_example, ConstructionOptions};
use solstab::decomposition::{fit_modulation, FitMode, FitOptions};
use solstab::fields::{read_snapshot, write_snapshot, SolitonConfig};
use solstab::geometry::{project_points, verify_projection};
use solstab::interactions::{scan, InteractionKind};
use solstab::special::{PhiPsi, StabilityModulus};
use solstab::spectral::{estimate_kappa, sector_spectrum, SpectralOptions};
use solstab::verifier::{
    chain, default_grid, records_to_csv, scaled_soliton_sweep, sharp_sweep, summarize, verify_complex_multi,
    verify_complex_single, verify_log_correction, ComplexOptions, ComplexReport, Status,
};
use solstab::ProblemParams;

use crate::output::{sibling, Run};
use crate::range::{parse_points, parse_points_csv, parse_values};
use crate::*;

pub fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    let config = serde_json::to_value(&cli.command)?;
    let mut run = Run::new(cli.command.name(), config, cli.cache_dir.clone());
    let (out, code) = match &cli.command {
        Command::GroundState(a) => (&a.out, ground_state(&mut run, a, cli.quiet)?),
        Command::SpecialFn(a) => (&a.out, special_fn(&mut run, a, cli.quiet)?),
        Command::InteractionScan(a) => (&a.out, interaction_scan(&mut run, a, cli.quiet)?),
        Command::SharpExample(a) => (&a.out, sharp_example(&mut run, a, cli.quiet)?),
        Command::Decompose(a) => (&a.out, decompose(&mut run, a, cli.quiet)?),
        Command::Verify(a) => (&a.out, verify(&mut run, a, cli.quiet)?),
        Command::ProjectPoints(a) => (&a.out, project(&mut run, a, cli.quiet)?),
        Command::Spectrum(a) => (&a.out, spectrum(&mut run, a, cli.quiet)?),
    };
    run.finish(out, rayon::current_num_threads())?;
    Ok(code)
}

fn say(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        println!("{}", msg.as_ref());
    }
}

fn ground_state(run: &mut Run, a: &GroundStateArgs, quiet: bool) -> Result<i32, CliError> {
    let gs = run.ground_state(&a.profile)?;
    run.output(&a.out, &gs.to_json()?)?;
    if let Some(path) = &a.csv {
        let mut s = String::from("r,Q,dQ\n");
        for ((r, q), dq) in gs.r.iter().zip(&gs.q).zip(&gs.dq) {
            let _ = writeln!(s, "{},{},{}", num(*r), num(*q), num(*dq));
        }
        run.output(path, &s)?;
    }
    say(quiet, format!("Q(0) = {}  c_Q = {}  r_max = {}", gs.q0, gs.c_q, gs.r_max));
    Ok(EXIT_OK)
}

/// Shortest round-trip text, in exponent form away from moderate magnitudes.
fn num(x: f64) -> String {
    if x == 0.0 || (1e-4..1e16).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn cell(v: solstab::Result<f64>) -> String {
    match v {
        Ok(x) if x.is_finite() => num(x),
        _ => "nan".into(),
    }
}

fn special_fn(run: &mut Run, a: &SpecialFnArgs, quiet: bool) -> Result<i32, CliError> {
    let ss: Vec<f64> = parse_values(&a.log10_s)?.into_iter().map(|e| 10f64.powf(e)).collect();
    let mut s = String::new();
    if a.branches {
        // One representative (d, p) per branch of F.
        let reps = [(1, 3.0), (1, 2.0), (2, 2.0), (3, 2.0), (1, 1.5)];
        let fms: Vec<StabilityModulus> =
            reps.iter().map(|&(d, p)| StabilityModulus::new(ProblemParams::new(d, p)?)).collect::<solstab::Result<_>>()?;
        s.push_str("s");
        for fm in &fms {
            let _ = write!(s, ",{}", fm.branch.name());
        }
        s.push('\n');
        for &x in &ss {
            let _ = write!(s, "{}", num(x));
            for fm in &fms {
                let v = if x < fm.monotone_limit() { fm.eval(x) } else { Ok(f64::NAN) };
                let _ = write!(s, ",{}", cell(v));
            }
            s.push('\n');
        }
    } else {
        let (d, p) = (a.d.unwrap_or(1), a.p.unwrap_or(2.0));
        let fm = StabilityModulus::new(ProblemParams::new(d, p)?)?;
        let pp = PhiPsi::new(d);
        s.push_str("s,psi,F\n");
        for &x in &ss {
            let psi = if x < pp.s_max() { pp.psi(x) } else { Ok(f64::NAN) };
            let f = if x < fm.monotone_limit() { fm.eval(x) } else { Ok(f64::NAN) };
            let _ = writeln!(s, "{},{},{}", num(x), cell(psi), cell(f));
        }
        say(quiet, format!("branch {} on s < {}", fm.branch.name(), fm.monotone_limit()));
    }
    run.output(&a.out, &s)?;
    say(quiet, format!("{} rows -> {}", ss.len(), a.out.display()));
    Ok(EXIT_OK)
}

fn interaction_scan(run: &mut Run, a: &ScanArgs, quiet: bool) -> Result<i32, CliError> {
    let rs = parse_values(&a.r)?;
    let gs = run.ground_state(&a.profile)?;
    let kind = match a.kind {
        ScanKind::Overlap => InteractionKind::Overlap { alpha: a.alpha.unwrap_or(a.profile.p), beta: a.beta.unwrap_or(1.0) },
        ScanKind::SquareSquare => InteractionKind::SquareSquare,
        ScanKind::Subquadratic => InteractionKind::Subquadratic,
        ScanKind::Gradient => InteractionKind::Gradient,
    };
    let sc = scan(&gs, kind, &rs)?;
    run.output(&a.out, &sc.to_csv())?;
    run.output(&sibling(&a.out, ".fit.json"), &sc.summary_json()?)?;
    say(
        quiet,
        format!(
            "rate {} (law {})  power {} (law {})  rms {}{}",
            sc.fit.rate,
            sc.law.rate,
            sc.fit.power,
            sc.law.power,
            sc.fit.rms_residual,
            if sc.fit.unreliable { "  [unreliable]" } else { "" }
        ),
    );
    Ok(EXIT_OK)
}

fn sharp_example(run: &mut Run, a: &SharpArgs, quiet: bool) -> Result<i32, CliError> {
    let gs = run.ground_state(&a.profile)?;
    let cfg = chain(gs.params, a.m, a.r)?;
    let reach = cfg.centers.iter().map(|y| y[0].abs()).fold(0.0, f64::max);
    let grid = default_grid(gs.params.d, reach, a.n)?;
    run.grid(grid);
    let opts = ConstructionOptions { dealias: a.dealias, separation_floor: a.floor, ..ConstructionOptions::default() };
    let ex = build_sharp_example(&gs, &cfg, grid, &opts)?;
    run.output(&a.out, &ex.report.to_json()?)?;
    if let Some(path) = &a.snapshot {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        write_snapshot(path, &ex.u, "sharp example u = sigma + rho")?;
        run.record_output(path);
    }
    let r = &ex.report;
    say(
        quiet,
        format!(
            "|rho|_H1 = {}  ratio to projected f = {}  Gamma(u) = {}  outer iterations = {}",
            r.rho_h1, r.rho_over_projected_f, r.gamma_u, r.outer_iterations
        ),
    );
    Ok(EXIT_OK)
}

fn phases_from(s: Option<&str>, m: usize) -> Result<Vec<Complex64>, CliError> {
    let angles = match s {
        Some(s) => parse_values(s)?,
        None => vec![0.0; m],
    };
    if angles.len() != m {
        return Err(CliError::Usage(format!("{} phases given for {m} centers", angles.len())));
    }
    Ok(angles.into_iter().map(|t| Complex64::from_polar(1.0, t)).collect())
}

fn decompose(run: &mut Run, a: &DecomposeArgs, quiet: bool) -> Result<i32, CliError> {
    let u = read_snapshot(&a.input)?;
    run.grid(u.grid);
    let centers = parse_points(&a.centers)?;
    if centers[0].len() != u.grid.d {
        return Err(CliError::Usage(format!("centers have dimension {} but the snapshot has d = {}", centers[0].len(), u.grid.d)));
    }
    let gs = run.ground_state_for(u.grid.d, a.p, a.tol, None)?;
    let phases = phases_from(a.phases.as_deref(), centers.len())?;
    let init = SolitonConfig::new(gs.params, centers, phases)?;
    let mode = match a.mode {
        ModeArg::Translations => FitMode::Translations,
        ModeArg::Phases => FitMode::Phases,
        ModeArg::Amplitudes => FitMode::Amplitudes,
    };
    let opts = FitOptions { tol: a.fit_tol, ..FitOptions::with_mode(mode) };
    let res = fit_modulation(&gs, &u, &init, &opts)?;
    run.output(&a.out, &res.to_json()?)?;
    say(
        quiet,
        format!("dist = {}  Gamma(u) = {}  iterations = {}  max orthogonality residual = {}", res.norms.rho_h1, res.norms.gamma_u, res.iterations, res.max_residual()),
    );
    Ok(EXIT_OK)
}

fn status_code(s: Status) -> i32 {
    if s == Status::Fail {
        EXIT_FAIL
    } else {
        EXIT_OK
    }
}

fn complex_csv(rep: &ComplexReport) -> String {
    let mut s = String::from("epsilon,dist,Gamma_u,ratio,gauge_dist_change,gauge_gamma_change,amplitudes\n");
    for r in &rep.records {
        let amps: Vec<String> = r.amplitudes.iter().map(|&v| num(v)).collect();
        let cols = [r.epsilon, r.dist, r.gamma_u, r.ratio, r.gauge_dist_change, r.gauge_gamma_change].map(num);
        let _ = writeln!(s, "{},{}", cols.join(","), amps.join(";"));
    }
    s
}

fn verify(run: &mut Run, a: &VerifyArgs, quiet: bool) -> Result<i32, CliError> {
    if !(a.bracket > 1.0) {
        return Err(CliError::Usage("--bracket must exceed 1".into()));
    }
    let gs = run.ground_state(&a.profile)?;
    let summary_path = sibling(&a.out, ".summary.json");
    let status = match a.case {
        VerifyCase::Sharp | VerifyCase::Scaled => {
            let records = if let VerifyCase::Sharp = a.case {
                let rs = parse_values(&a.r)?;
                sharp_sweep(&gs, a.m, &rs, a.n, &ConstructionOptions::default())?
            } else {
                scaled_soliton_sweep(&gs, &parse_values(&a.eps)?, a.n)?
            };
            let summary = summarize(&records, a.bracket)?;
            run.output(&a.out, &records_to_csv(&records))?;
            run.output(&summary_path, &summary.to_json()?)?;
            say(quiet, format!("upper bound: {:?} (spread {})", summary.upper_bound.status, summary.upper_bound.spread));
            say(quiet, format!("lower bounds: {:?}", summary.lower_bounds.status));
            say(quiet, format!("intermediate: {:?}", summary.intermediate.status));
            summary.status
        }
        VerifyCase::ComplexSingle | VerifyCase::ComplexMulti => {
            let opts = ComplexOptions { c: a.threshold, strict: a.strict, bracket: a.bracket, n: a.n, ..ComplexOptions::default() };
            let eps = parse_values(&a.eps)?;
            let rep = if let VerifyCase::ComplexSingle = a.case {
                verify_complex_single(&gs, a.theta, &eps, &opts)?
            } else {
                let rs = parse_values(&a.r)?;
                let phases = phases_from(Some(&a.phases), a.m)?;
                let centers = chain(gs.params, a.m, rs[0])?.centers;
                verify_complex_multi(&gs, &SolitonConfig::new(gs.params, centers, phases)?, &eps, &opts)?
            };
            run.output(&a.out, &complex_csv(&rep))?;
            run.output(&summary_path, &serde_json::to_string_pretty(&rep)?)?;
            say(quiet, format!("ratio spread {}  gauge change {}", rep.ratio.spread, rep.gauge_max_change));
            rep.status
        }
        VerifyCase::LogCorrection => {
            let rep = verify_log_correction(&gs, &parse_values(&a.r)?)?;
            let csv = format!("plain_rms,log_rms,improvement\n{},{},{}\n", num(rep.plain_rms), num(rep.log_rms), num(rep.improvement));
            run.output(&a.out, &csv)?;
            run.output(&summary_path, &serde_json::to_string_pretty(&rep)?)?;
            rep.status
        }
    };
    let label = serde_json::to_value(status)?.as_str().unwrap_or("UNKNOWN").to_string();
    run.status(&label);
    say(quiet, label);
    Ok(status_code(status))
}

fn project(run: &mut Run, a: &ProjectArgs, quiet: bool) -> Result<i32, CliError> {
    let points = match (&a.points, &a.input) {
        (Some(s), _) => parse_points(s)?,
        (None, Some(path)) => parse_points_csv(&std::fs::read_to_string(path)?)?,
        (None, None) => return Err(CliError::Usage("give --points or --input".into())),
    };
    let res = project_points(&points, a.delta)?;
    let worst = verify_projection(&res, res.c_achieved)?;
    let doc = json!({
        "format": "solstab.projection",
        "version": 1,
        "result": res,
        "verified_min_ratio": worst,
    });
    run.output(&a.out, &serde_json::to_string_pretty(&doc)?)?;
    say(quiet, format!("c = {}  delta = {}  meets target: {}", res.c_achieved, res.delta, res.meets_target));
    Ok(EXIT_OK)
}

fn spectrum(run: &mut Run, a: &SpectrumArgs, quiet: bool) -> Result<i32, CliError> {
    let gs = run.ground_state(&a.profile)?;
    let opts = SpectralOptions { h: a.h, r_max: a.radius, ..SpectralOptions::default() };
    let rep = sector_spectrum(&gs, a.ell, a.n_eigs, &opts)?;
    let kappa = if a.kappa { Some(estimate_kappa(&gs, &opts)?) } else { None };
    let doc = json!({
        "format": "solstab.spectrum",
        "version": 1,
        "d": rep.d,
        "p": rep.p,
        "sector": rep.sector,
        "h": a.h,
        "r_max": a.radius,
        "eigenvalues": rep.eigenvalues,
        "kappa": kappa,
    });
    run.output(&a.out, &serde_json::to_string_pretty(&doc)?)?;
    if let Some(path) = &a.vectors {
        run.output(path, &rep.eigenvectors_csv(a.n_eigs))?;
    }
    say(quiet, format!("eigenvalues {:?}", rep.eigenvalues));
    if let Some(k) = kappa {
        say(quiet, format!("kappa = {}", k.kappa));
    }
    Ok(EXIT_OK)
}
