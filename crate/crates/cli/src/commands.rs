use std::io::Write;
use std::path::{Path, PathBuf};

use entswap::adversary::AdversaryKind;
use entswap::analysis::{
    analytic_detection, analytic_guess, efficiency_for, monte_carlo, EfficiencyReport, MCReport,
};
use entswap::bell::{swap_partner, BellIndex};
use entswap::protocol::{run_session, SessionConfig, SessionReport, Verdict};
use entswap::seed::derive_seed;
use entswap::statevector::{make_bell, make_ghz3, tensor};
use entswap::{AnalysisError, ProtocolError};
use serde::Serialize;

use crate::config::{CliConfig, Format};
use crate::CliError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ABORT: i32 = 3;
pub const EXIT_ORACLE_FAILURE: i32 = 4;

fn usage_from_protocol(e: ProtocolError) -> CliError {
    match e {
        ProtocolError::InvalidConfig(_) | ProtocolError::UnsupportedAdversary { .. } => {
            CliError::Usage(e.to_string())
        }
        other => CliError::Internal(other.to_string()),
    }
}

fn usage_from_analysis(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::Protocol(p) => usage_from_protocol(p),
        other => CliError::Internal(other.to_string()),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report types serialize");
    bytes.push(b'\n');
    bytes
}

/// Writes `json` and/or `csv` to `out` (a file path), or to stdout when no
/// path is given. With both formats the file stem gets `.json` and `.csv`.
fn emit(
    out: Option<&Path>,
    format: Format,
    json: impl FnOnce() -> Vec<u8>,
    csv: impl FnOnce() -> Result<Vec<u8>, CliError>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let mut targets: Vec<(Option<PathBuf>, Vec<u8>)> = Vec::new();
    let path_for = |ext: &str| {
        out.map(|p| match format {
            Format::Both => p.with_extension(ext),
            _ => p.to_owned(),
        })
    };
    if format.json() {
        targets.push((path_for("json"), json()));
    }
    if format.csv() {
        targets.push((path_for("csv"), csv()?));
    }
    for (path, bytes) in targets {
        match path {
            Some(p) => write_file(&p, &bytes)?,
            None => stdout.write_all(&bytes).map_err(CliError::Stdout)?,
        }
    }
    Ok(())
}

/// One row of the sweep summary.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub strategy: String,
    pub n_groups: usize,
    pub k_checked: usize,
    pub trials: u64,
    pub detection_rate: f64,
    pub ci: f64,
    pub analytic: f64,
    pub eve_key_rate: f64,
    pub agreement_rate: f64,
}

pub const SUMMARY_HEADER: &str =
    "strategy,n_groups,k_checked,trials,detection_rate,ci,analytic,eve_key_rate,agreement_rate";

impl SummaryRow {
    pub fn from_report(r: &MCReport) -> Self {
        Self {
            strategy: r.strategy.name().to_owned(),
            n_groups: r.n_groups,
            k_checked: r.k_checked,
            trials: r.trials,
            detection_rate: r.detection_rate.rate,
            ci: r.detection_rate.half_width,
            analytic: analytic_detection(r.strategy, r.k_checked as u32),
            eve_key_rate: r.eve_key_rate.rate,
            agreement_rate: r.key_agreement_rate.rate,
        }
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(SUMMARY_HEADER.split(','))
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    for row in rows {
        w.serialize(row)
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    w.into_inner()
        .map_err(|e| CliError::Internal(e.to_string()))
}

/// JSON body for one Monte Carlo grid point.
#[derive(Debug, Serialize)]
pub struct AttackReport {
    pub monte_carlo: MCReport,
    pub analytic_detection: f64,
    pub analytic_guess: Option<f64>,
    pub efficiency: EfficiencyReport,
}

fn attack_report(
    session: &SessionConfig,
    kind: AdversaryKind,
    trials: u64,
    seed: u64,
) -> Result<AttackReport, CliError> {
    let mc = monte_carlo(session, kind, trials, seed).map_err(usage_from_analysis)?;
    Ok(AttackReport {
        analytic_detection: analytic_detection(kind, mc.k_checked as u32),
        analytic_guess: analytic_guess(kind, session.n_groups as u32)
            .map_err(usage_from_analysis)?,
        efficiency: efficiency_for(session.n_groups, mc.k_checked),
        monte_carlo: mc,
    })
}

pub fn cmd_run(cfg: &CliConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let report: SessionReport =
        run_session(cfg.session.clone(), cfg.adversary).map_err(usage_from_protocol)?;
    let summary = format!(
        "verdict={} key_bits={} keys_equal={}\n",
        match report.verdict {
            Verdict::Accept => "accept",
            Verdict::Abort => "abort",
        },
        report.alice_key.len(),
        report.keys_equal
    );
    let csv = || {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["group_index", "checked", "alice_fragment", "bob_fragment"])
            .and_then(|_| {
                report.groups.iter().try_for_each(|g| {
                    let frag = |f: &Option<entswap::bell::KeyFragment>| {
                        f.as_ref().map(|f| f.bits.clone()).unwrap_or_default()
                    };
                    w.write_record([
                        g.group_index.to_string(),
                        g.checked.to_string(),
                        frag(&g.alice_fragment),
                        frag(&g.bob_fragment),
                    ])
                })
            })
            .map_err(|e| CliError::Internal(e.to_string()))?;
        w.into_inner()
            .map_err(|e| CliError::Internal(e.to_string()))
    };
    emit(
        cfg.output_path.as_deref(),
        cfg.format,
        || to_json(&report),
        csv,
        stdout,
    )?;
    if cfg.output_path.is_some() {
        stdout
            .write_all(summary.as_bytes())
            .map_err(CliError::Stdout)?;
    } else {
        eprint!("{summary}");
    }
    Ok(match report.verdict {
        Verdict::Accept => EXIT_OK,
        Verdict::Abort => EXIT_ABORT,
    })
}

pub fn cmd_attack(cfg: &CliConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let report = attack_report(&cfg.session, cfg.adversary, cfg.trials, cfg.session.seed)?;
    let row = SummaryRow::from_report(&report.monte_carlo);
    emit(
        cfg.output_path.as_deref(),
        cfg.format,
        || to_json(&report),
        || summary_csv(std::slice::from_ref(&row)),
        stdout,
    )?;
    if cfg.output_path.is_some() {
        writeln!(
            stdout,
            "{} k={} detection={:.6} ±{:.6} analytic={:.6}",
            row.strategy, row.k_checked, row.detection_rate, row.ci, row.analytic
        )
        .map_err(CliError::Stdout)?;
    }
    Ok(EXIT_OK)
}

/// Every adversary (or just the named one) against k = 1..=n checked groups.
/// Grid point `p` uses master seed `derive_seed(seed, p)`.
pub fn cmd_sweep(cfg: &CliConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let kinds: Vec<AdversaryKind> = if cfg.adversary_explicit {
        vec![cfg.adversary]
    } else {
        AdversaryKind::ALL.to_vec()
    };
    let n = cfg.session.n_groups;
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for kind in kinds {
        for k in 1..=n {
            let point = rows.len() as u64;
            let session = cfg.session.clone().with_check_fraction(k as f64 / n as f64);
            let report = attack_report(
                &session,
                kind,
                cfg.trials,
                derive_seed(cfg.session.seed, point),
            )?;
            rows.push(SummaryRow::from_report(&report.monte_carlo));
            points.push((format!("{}_k{}.json", kind.name(), k), report));
        }
    }
    let csv = summary_csv(&rows)?;
    match &cfg.output_path {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
                path: dir.clone(),
                source,
            })?;
            if cfg.format.csv() {
                write_file(&dir.join("summary.csv"), &csv)?;
            }
            if cfg.format.json() {
                for (name, report) in &points {
                    write_file(&dir.join(name), &to_json(report))?;
                }
            }
            for row in &rows {
                writeln!(
                    stdout,
                    "{:<6} k={:<3} detection={:.6} ±{:.6} analytic={:.6}",
                    row.strategy, row.k_checked, row.detection_rate, row.ci, row.analytic
                )
                .map_err(CliError::Stdout)?;
            }
        }
        None => {
            if cfg.format.json() {
                let all: Vec<&AttackReport> = points.iter().map(|(_, r)| r).collect();
                stdout.write_all(&to_json(&all)).map_err(CliError::Stdout)?;
            }
            if cfg.format.csv() {
                stdout.write_all(&csv).map_err(CliError::Stdout)?;
            }
        }
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
pub struct OracleCheckReport {
    pub passed: bool,
    pub checks: Vec<CheckLine>,
    pub failures: Vec<String>,
    pub example_state: serde_json::Value,
}

#[derive(Debug, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub detail: String,
    pub pass: bool,
}

const EXACT: f64 = 1e-9;

/// Runs the exhaustive oracle checks. Never fails on a mismatch; mismatches
/// are reported in the result.
pub fn oracle_check() -> Result<OracleCheckReport, CliError> {
    let internal = |e: entswap::OracleError| CliError::Internal(e.to_string());
    let mut checks = Vec::new();
    let mut failures = Vec::new();

    for (name, measured, remote) in [
        ("swap rule (1,3) -> (2,4)", ("1", "3"), ("2", "4")),
        ("swap rule (2,3) -> (1,4)", ("2", "3"), ("1", "4")),
    ] {
        let mut ok = 0;
        for a in BellIndex::ALL {
            for b in BellIndex::ALL {
                let state = tensor(
                    &make_bell(a, "1", "2").map_err(internal)?,
                    &make_bell(b, "3", "4").map_err(internal)?,
                )
                .map_err(internal)?;
                for m in BellIndex::ALL {
                    let (_, post) = state
                        .measure_bell_forced(measured.0, measured.1, m)
                        .map_err(internal)?;
                    let found = post.identify_bell(remote.0, remote.1).map_err(internal)?;
                    let expected = swap_partner(a, b, m);
                    if found == Some(expected) {
                        ok += 1;
                    } else {
                        failures.push(format!(
                            "{name}: init ({a}, {b}) outcome {m}: expected {expected}, oracle {}",
                            found.map_or("none".to_owned(), |f| f.to_string())
                        ));
                    }
                }
            }
        }
        checks.push(CheckLine {
            name: name.to_owned(),
            detail: format!("{ok}/64"),
            pass: ok == 64,
        });
    }

    let mut uniform = 0;
    for a in BellIndex::ALL {
        for b in BellIndex::ALL {
            let state = tensor(
                &make_bell(a, "1", "2").map_err(internal)?,
                &make_bell(b, "3", "4").map_err(internal)?,
            )
            .map_err(internal)?;
            let d = state.outcome_distribution("1", "3").map_err(internal)?;
            if d.iter().all(|p| (p - 0.25).abs() < EXACT) {
                uniform += 1;
            } else {
                failures.push(format!("uniformity: init ({a}, {b}) gives {d:?}"));
            }
        }
    }
    checks.push(CheckLine {
        name: "uniform (1,3) outcomes".into(),
        detail: format!("{uniform}/16 at (1/4, 1/4, 1/4, 1/4)"),
        pass: uniform == 16,
    });

    // Worked example: φ+ on (1,2), ψ+ on (3,4), outcome ψ+ on (1,3).
    let example = tensor(
        &make_bell(BellIndex::PhiPlus, "1", "2").map_err(internal)?,
        &make_bell(BellIndex::PsiPlus, "3", "4").map_err(internal)?,
    )
    .map_err(internal)?;
    let (_, post) = example
        .measure_bell_forced("1", "3", BellIndex::PsiPlus)
        .map_err(internal)?;
    let partner = post.identify_bell("2", "4").map_err(internal)?;
    let example_ok = partner == Some(BellIndex::PhiPlus);
    if !example_ok {
        failures.push(format!(
            "worked example: partner {partner:?}, expected phi+"
        ));
    }
    checks.push(CheckLine {
        name: "worked example (phi+, psi+) outcome psi+".into(),
        detail: format!(
            "partner {} {}",
            partner.map_or("none".to_owned(), |p| p.to_string()),
            if example_ok { "confirmed" } else { "MISMATCH" }
        ),
        pass: example_ok,
    });

    // GHZ channel: Bob's distribution given Alice, and Eve pinned by both.
    let ghz = tensor(
        &make_ghz3("1", "2", "5").map_err(internal)?,
        &make_ghz3("3", "4", "6").map_err(internal)?,
    )
    .map_err(internal)?;
    let mut ghz_ok = true;
    let mut detail = String::new();
    for alice in BellIndex::ALL {
        let (_, after) = ghz.measure_bell_forced("1", "3", alice).map_err(internal)?;
        let bob = after.outcome_distribution("2", "4").map_err(internal)?;
        let support: Vec<BellIndex> = BellIndex::ALL
            .into_iter()
            .filter(|b| bob[b.index()] > EXACT)
            .collect();
        let halves = support.len() == 2
            && support
                .iter()
                .all(|b| (bob[b.index()] - 0.5).abs() < EXACT && b.parity() == alice.parity());
        if !halves {
            ghz_ok = false;
            failures.push(format!(
                "ghz: given alice {alice}, bob distribution {bob:?}"
            ));
        }
        for b in &support {
            let (_, after_bob) = after.measure_bell_forced("2", "4", *b).map_err(internal)?;
            if after_bob
                .identify_bell("5", "6")
                .map_err(internal)?
                .is_none()
            {
                ghz_ok = false;
                failures.push(format!(
                    "ghz: alice {alice}, bob {b}: eve pair not a Bell state"
                ));
            }
        }
        if alice == BellIndex::PhiPlus {
            detail = support
                .iter()
                .map(|b| format!("{b}: {:.3}", bob[b.index()]))
                .collect::<Vec<_>>()
                .join(", ");
        }
    }
    checks.push(CheckLine {
        name: "ghz bob | alice=phi+".into(),
        detail: format!("{{{detail}}}, eve fixed by (alice, bob)"),
        pass: ghz_ok,
    });

    Ok(OracleCheckReport {
        passed: failures.is_empty(),
        checks,
        failures,
        example_state: post.to_json(),
    })
}

pub fn cmd_oracle_check(cfg: &CliConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let report = oracle_check()?;
    let mut table = String::new();
    for c in &report.checks {
        table.push_str(&format!(
            "{:<44} {:<40} {}\n",
            c.name,
            c.detail,
            if c.pass { "pass" } else { "FAIL" }
        ));
    }
    for f in &report.failures {
        table.push_str(&format!("failure: {f}\n"));
    }
    stdout
        .write_all(table.as_bytes())
        .map_err(CliError::Stdout)?;
    if let Some(dir) = &cfg.output_path {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
        write_file(&dir.join("oracle_check.json"), &to_json(&report))?;
    }
    Ok(if report.passed {
        EXIT_OK
    } else {
        EXIT_ORACLE_FAILURE
    })
}
