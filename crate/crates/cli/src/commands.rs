//! Subcommand implementations.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use mcs_qkd::fock_oracle::{max_deviation_by_formula, verify_closed_forms, VerifyOptions};
use mcs_qkd::key_rate::to_db;
use mcs_qkd::optimizer::{cutoff_distance, optimize_param, rate_at, sweep_distance};
use mcs_qkd::{Error, FamilyRegistry, RateBreakdown, Scenario, SourceFamily};

use crate::config::RunConfig;
use crate::output::{num, Csv};
use crate::svg::{Plot, Series};
use crate::{CliError, EXIT_OK, EXIT_VERIFY_FAILED};

fn families(cfg: &RunConfig) -> Result<Vec<Arc<dyn SourceFamily>>, CliError> {
    let registry = FamilyRegistry::builtin();
    if cfg.families.is_empty() {
        return Ok(registry.iter().cloned().collect());
    }
    cfg.families
        .iter()
        .map(|name| {
            registry.get(name).map_err(|_| {
                let known: Vec<_> = registry.names().collect();
                CliError::Config(format!(
                    "key `family`: unknown family `{name}` (known: {})",
                    known.join(", ")
                ))
            })
        })
        .collect()
}

fn scenario(
    cfg: &RunConfig,
    family: Arc<dyn SourceFamily>,
    distance: f64,
) -> Result<Scenario, CliError> {
    cfg.search.validate()?;
    Ok(Scenario {
        family,
        channel: cfg.channel(distance)?,
        detector: cfg.detector()?,
        f_policy: cfg.f_policy.clone(),
        sign: cfg.sign,
        search: cfg.search,
    })
}

fn settings_comment(cfg: &RunConfig) -> String {
    format!(
        "sign={} f_policy={} a={} receiver_loss={} eta_d={} pd={} c={}",
        cfg.sign,
        cfg.f_policy_spec,
        cfg.loss_coeff,
        cfg.receiver_loss,
        cfg.eta_d,
        cfg.dark_prob,
        cfg.baseline_error
    )
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
}

fn out_err(e: std::io::Error) -> CliError {
    CliError::io(Path::new("<stdout>"), e)
}

fn fixed_param(cfg: &RunConfig, family: &dyn SourceFamily) -> Option<f64> {
    match family.param_name() {
        "alpha2" => cfg.alpha2,
        "nu" => cfg.nu,
        _ => None,
    }
}

/// `rate`: one CSV row per family and distance on stdout.
pub fn rate(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let mut csv = Csv::new();
    csv.comment(&settings_comment(cfg));
    csv.row([
        "family",
        "l_km",
        "eta",
        "param_name",
        "param",
        "optimized",
        "p_s",
        "p_s_bar",
        "p_m",
        "e",
        "rho",
        "tau",
        "h",
        "f",
        "R",
        "R_raw",
    ]);
    for family in families(cfg)? {
        for &l in &cfg.distances {
            let sc = scenario(cfg, family.clone(), l)?;
            let (param, optimized, b) = match fixed_param(cfg, family.as_ref()) {
                Some(p) => (p, false, rate_at(&sc, p)?),
                None => {
                    let opt = optimize_param(&sc)?;
                    (opt.point().param, true, opt.point().breakdown)
                }
            };
            csv.row([
                family.name().to_string(),
                num(l),
                num(sc.eta()),
                family.param_name().to_string(),
                num(param),
                optimized.to_string(),
                num(b.p_s),
                num(b.p_s_bar),
                num(b.p_m),
                num(b.e),
                num(b.rho),
                num(b.tau),
                num(b.h),
                num(b.f),
                num(b.rate),
                num(b.rate_raw),
            ]);
        }
    }
    stdout.write_all(csv.as_str().as_bytes()).map_err(out_err)?;
    Ok(EXIT_OK)
}

fn breakdown_cells(b: &RateBreakdown) -> [String; 7] {
    [
        num(b.p_s),
        num(b.p_s_bar),
        num(b.p_m),
        num(b.e),
        num(b.rho),
        num(b.tau),
        num(b.rate),
    ]
}

/// `figure1`: rate against the source parameter at one distance.
pub fn figure1(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let l = cfg.distances[0];
    let fams = families(cfg)?;
    let n = cfg.fig1_points;
    let params: Vec<f64> = (0..n)
        .map(|i| cfg.fig1_param_max * i as f64 / (n - 1) as f64)
        .collect();

    let probe = scenario(cfg, fams[0].clone(), l)?;
    let eta = probe.eta();
    let mut csv = Csv::new();
    csv.comment(&format!(
        "rate per pulse versus source parameter at l = {l} km"
    ));
    csv.comment(&format!("eta = {} ({:.3} dB)", num(eta), to_db(eta)));
    csv.comment(&settings_comment(cfg));
    csv.row([
        "family", "param", "p_s", "p_s_bar", "p_m", "e", "rho", "tau", "R",
    ]);

    writeln!(stdout, "l = {l} km, eta = {eta:.6e} ({:.3} dB)", to_db(eta)).map_err(out_err)?;
    let mut series = Vec::new();
    for family in fams {
        let sc = scenario(cfg, family.clone(), l)?;
        let mut points = Vec::with_capacity(n);
        let mut best = (0.0, f64::NEG_INFINITY);
        for &p in &params {
            let b = rate_at(&sc, p)?;
            let mut row = vec![family.name().to_string(), num(p)];
            row.extend(breakdown_cells(&b));
            csv.row(row);
            points.push((p, b.rate));
            if b.rate > best.1 {
                best = (p, b.rate);
            }
        }
        writeln!(
            stdout,
            "{}: max R = {:.6e} at {} = {:.4}",
            family.name(),
            best.1,
            family.param_name(),
            best.0
        )
        .map_err(out_err)?;
        series.push(Series {
            label: family.label().to_string(),
            points,
        });
    }
    let plot = Plot {
        title: format!("Secure rate at l = {l} km (eta = {:.2} dB)", to_db(eta)),
        x_label: "source parameter (|alpha|^2 or nu)".into(),
        y_label: "secure key rate per pulse".into(),
        log_y: false,
        series,
    };
    write_file(&cfg.out_dir, "figure1.csv", csv.as_str())?;
    write_file(&cfg.out_dir, "figure1.svg", &plot.render())?;
    Ok(EXIT_OK)
}

/// `figure2`: optimal rate against distance, plus cutoff distances.
pub fn figure2(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let grid = cfg.distance_grid();
    let mut csv = Csv::new();
    csv.comment("optimal rate per pulse versus distance");
    csv.comment(&settings_comment(cfg));
    csv.row([
        "family", "l_km", "eta", "eta_db", "param", "p_s", "p_s_bar", "p_m", "e", "R", "R_raw",
        "secure",
    ]);
    let mut cut = Csv::new();
    cut.comment(&format!(
        "largest secure distance to 0.01 km, searched up to {} km",
        cfg.l_max
    ));
    cut.row(["family", "cutoff_km", "status"]);

    let mut series = Vec::new();
    let mut at_zero = Vec::new();
    let mut cutoffs = Vec::new();
    for family in families(cfg)? {
        let template = scenario(cfg, family.clone(), 0.0)?;
        let sweep = sweep_distance(&template, &grid)?;
        let mut points = Vec::with_capacity(sweep.points.len());
        for p in &sweep.points {
            let o = p.optimum;
            let b = o.point().breakdown;
            csv.row([
                family.name().to_string(),
                num(p.distance),
                num(p.eta),
                num(to_db(p.eta)),
                num(o.point().param),
                num(b.p_s),
                num(b.p_s_bar),
                num(b.p_m),
                num(b.e),
                num(o.rate()),
                num(o.rate_raw()),
                o.is_secure().to_string(),
            ]);
            points.push((p.distance, o.rate()));
        }
        if let Some(first) = sweep.points.first().filter(|p| p.distance == 0.0) {
            at_zero.push((family.name(), first.optimum.rate()));
        }
        let (cutoff, status) = match cutoff_distance(&template, cfg.l_max) {
            Ok(l) if l >= cfg.l_max => (Some(l), "secure-at-l_max"),
            Ok(l) => (Some(l), "cutoff"),
            Err(Error::DegenerateInput(_)) => (None, "insecure-at-zero"),
            Err(e) => return Err(e.into()),
        };
        cut.row([
            family.name().to_string(),
            cutoff.map_or("nan".into(), num),
            status.to_string(),
        ]);
        cutoffs.push((family.name(), cutoff));
        series.push(Series {
            label: family.label().to_string(),
            points,
        });
    }

    for (name, r) in &at_zero {
        writeln!(stdout, "{name}: R(l=0) = {r:.6e}").map_err(out_err)?;
    }
    for w in at_zero.windows(2) {
        if w[0].1 > 0.0 && w[1].1 > 0.0 {
            writeln!(
                stdout,
                "gap {} -> {}: {:.3} dB",
                w[0].0,
                w[1].0,
                10.0 * (w[1].1 / w[0].1).log10()
            )
            .map_err(out_err)?;
        }
    }
    for (name, c) in &cutoffs {
        match c {
            Some(l) => writeln!(stdout, "{name}: cutoff = {l:.2} km"),
            None => writeln!(stdout, "{name}: no secure operation at l = 0"),
        }
        .map_err(out_err)?;
    }
    for w in cutoffs.windows(2) {
        if let (Some(a), Some(b)) = (w[0].1, w[1].1) {
            if a > 0.0 {
                writeln!(stdout, "cutoff ratio {} / {}: {:.3}", w[1].0, w[0].0, b / a)
                    .map_err(out_err)?;
            }
        }
    }

    let plot = Plot {
        title: "Optimal secure rate versus distance".into(),
        x_label: "distance (km)".into(),
        y_label: "secure key rate per pulse".into(),
        log_y: true,
        series,
    };
    write_file(&cfg.out_dir, "figure2.csv", csv.as_str())?;
    write_file(&cfg.out_dir, "cutoffs.csv", cut.as_str())?;
    write_file(&cfg.out_dir, "figure2.svg", &plot.render())?;
    Ok(EXIT_OK)
}

/// `verify`: closed forms against the oracles. Exit 1 on any deviation.
pub fn verify(
    cfg: &RunConfig,
    inject_error: f64,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, CliError> {
    if cfg.verify_grid.is_empty() {
        return Err(CliError::Config("verification grid is empty".into()));
    }
    let opts = VerifyOptions {
        closed_form_offset: inject_error,
        ..VerifyOptions::default()
    };
    let reports = verify_closed_forms(&cfg.verify_grid, &opts)?;

    let mut csv = Csv::new();
    csv.row([
        "formula",
        "method",
        "alpha",
        "nu",
        "eta",
        "closed_form",
        "oracle",
        "abs_diff",
        "tolerance",
        "resolution",
        "pass",
    ]);
    for r in &reports {
        csv.row([
            r.formula.to_string(),
            r.method.to_string(),
            num(r.alpha),
            num(r.nu),
            r.eta.map_or(String::new(), num),
            num(r.closed_form_value),
            num(r.oracle_value),
            num(r.abs_diff),
            num(r.method.tolerance()),
            r.resolution.to_string(),
            r.passed().to_string(),
        ]);
    }
    write_file(&cfg.out_dir, "verify.csv", csv.as_str())?;

    for (formula, method, dev) in max_deviation_by_formula(&reports) {
        writeln!(stdout, "{formula} [{method}]: max |diff| = {dev:.3e}").map_err(out_err)?;
    }
    let failed: Vec<_> = reports.iter().filter(|r| !r.passed()).collect();
    for r in &failed {
        let _ = writeln!(
            stderr,
            "FAIL {} [{}] alpha={} nu={} eta={}: closed={:.12e} oracle={:.12e} diff={:.3e}",
            r.formula,
            r.method,
            r.alpha,
            r.nu,
            r.eta.map_or("-".into(), |e| e.to_string()),
            r.closed_form_value,
            r.oracle_value,
            r.abs_diff
        );
    }
    writeln!(stdout, "{} checks, {} failed", reports.len(), failed.len()).map_err(out_err)?;
    Ok(if failed.is_empty() {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    })
}
