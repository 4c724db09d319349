use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::io::Write;
use std::path::Path;

use faithlab_core::causal::{enumerate_and_classify, lhv_chsh_bound, perturb_and_test, quantum_setup};
use faithlab_core::corestats::{correlation, operational_equivalence, uniform_grid, Angle};
use faithlab_core::inference::{
    chsh_empirical, chsh_exact, correlation_from_counts, nosignalling_suite, CITestResult, ChshReport,
    ContingencyTable, Estimate, Verdict,
};
use faithlab_core::sampler::{project_observables, sample, BatchMeta, EventBatch};
use serde::Serialize;

use crate::config::{
    AnalyzeConfig, ChshConfig, EquivalenceConfig, FinetuneConfig, RunConfig, SimulateConfig, TriadConfig,
};
use crate::error::{CliError, CliResult};
use crate::svg::{Plot, Point};

pub const EVENTS_STEM: &str = "events";

pub fn run(config: &RunConfig) -> CliResult<()> {
    config.echo()?;
    match config {
        RunConfig::Simulate(c) => simulate(c),
        RunConfig::Analyze(c) => analyze(c),
        RunConfig::Chsh(c) => chsh(c),
        RunConfig::Triad(c) => triad(c),
        RunConfig::Finetune(c) => finetune(c),
        RunConfig::Equivalence(c) => equivalence(c),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn simulate(c: &SimulateConfig) -> CliResult<()> {
    let full = sample(c.experiment, &c.grid, c.policy, c.demon, c.n, c.seed)?;
    let batch = project_observables(&full, &c.demon);
    batch.save(&c.out, EVENTS_STEM)?;

    let counts = ContingencyTable::from_batch(&batch)?;
    let first = batch.has_first_outcome().then(|| batch.first_variable());
    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "{} events of {} (seed {}) written to {}",
        batch.len(),
        c.experiment.label(),
        c.seed,
        c.out.join(format!("{EVENTS_STEM}.csv")).display()
    )?;
    writeln!(
        stdout,
        "alpha_idx beta_idx alpha      beta       n          B=1{}",
        if first.is_some() { "        a=1" } else { "" }
    )?;
    let per_pair = if first.is_some() { 4 } else { 2 };
    for (i, a) in c.grid.alpha.iter().enumerate() {
        for (j, b) in c.grid.beta.iter().enumerate() {
            let base = (i * c.grid.beta.len() + j) * per_pair;
            let cell = &counts.counts()[base..base + per_pair];
            let n: u64 = cell.iter().sum();
            let b1: u64 = cell.iter().skip(1).step_by(2).sum();
            let mut line = format!(
                "{i:<9} {j:<8} {:<10.6} {:<10.6} {n:<10} {b1:<10}",
                a.radians(),
                b.radians()
            );
            if first.is_some() {
                line.push_str(&format!(" {}", cell[2] + cell[3]));
            }
            writeln!(stdout, "{}", line.trim_end())?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct PairRow {
    alpha_idx: usize,
    beta_idx: usize,
    alpha: f64,
    beta: f64,
    n: u64,
    e_hat: f64,
    std_error: f64,
    e_exact: f64,
}

#[derive(Serialize)]
struct AnalyzeReport<'a> {
    batch: BatchMeta,
    level: f64,
    nosignalling: &'a [CITestResult],
    signalling_detected: bool,
    correlations: &'a [PairRow],
}

fn pair_rows(counts: &ContingencyTable, batch: &EventBatch) -> CliResult<Vec<PairRow>> {
    let mut rows = Vec::new();
    if !batch.has_first_outcome() {
        return Ok(rows);
    }
    for (i, a) in batch.grid.alpha.iter().enumerate() {
        for (j, b) in batch.grid.beta.iter().enumerate() {
            let Estimate { value, std_error, n } = correlation_from_counts(counts, i, j)?;
            rows.push(PairRow {
                alpha_idx: i,
                beta_idx: j,
                alpha: a.radians(),
                beta: b.radians(),
                n,
                e_hat: value,
                std_error,
                e_exact: correlation(*a, *b),
            });
        }
    }
    Ok(rows)
}

fn analyze(c: &AnalyzeConfig) -> CliResult<()> {
    let batch = EventBatch::load(&c.batch)?;
    let suite = nosignalling_suite(&batch, c.level)?;
    let counts = ContingencyTable::from_batch(&batch)?;
    let pairs = pair_rows(&counts, &batch)?;

    let mut w = csv::Writer::from_path(c.out.join("nosignalling.csv"))?;
    w.write_record(["statement", "statistic", "dof", "p_value", "level", "n", "verdict"])?;
    for r in &suite {
        w.write_record([
            r.statement.to_string(),
            r.statistic.to_string(),
            r.dof.to_string(),
            r.p_value.to_string(),
            r.level.to_string(),
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            verdict_label(r.verdict).into(),
        ])?;
    }
    w.flush()?;
    if !pairs.is_empty() {
        let mut w = csv::Writer::from_path(c.out.join("correlations.csv"))?;
        for row in &pairs {
            w.serialize(row)?;
        }
        w.flush()?;
    }

    let signalling = suite.iter().any(|r| r.verdict == Verdict::Dependent);
    write_json(
        &c.out.join("report.json"),
        &AnalyzeReport {
            batch: batch.meta(),
            level: c.level,
            nosignalling: &suite,
            signalling_detected: signalling,
            correlations: &pairs,
        },
    )?;

    for r in &suite {
        println!(
            "{}: G = {:.4}, dof = {}, p = {:.4} -> {}",
            r.statement,
            r.statistic,
            r.dof,
            r.p_value,
            verdict_label(r.verdict)
        );
    }
    for p in &pairs {
        println!(
            "E(alpha={:.4}, beta={:.4}) = {:.4} ± {:.4} (exact {:.4}, n = {})",
            p.alpha, p.beta, p.e_hat, p.std_error, p.e_exact, p.n
        );
    }
    Ok(())
}

fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::Independent => "independent",
        Verdict::Dependent => "dependent",
    }
}

/// `alpha − beta` folded into `[−π/2, π/2)`, the period of `cos 2Δ`.
fn folded_difference(alpha: Angle, beta: Angle) -> f64 {
    (alpha.radians() - beta.radians() + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2
}

#[derive(Serialize)]
struct ChshOutput<'a> {
    report: &'a ChshReport,
    classical_bound: f64,
    quantum_value: f64,
    tsirelson_bound: f64,
}

fn chsh(c: &ChshConfig) -> CliResult<()> {
    let exact = chsh_exact(&c.spec);
    let (report, points) = match &c.batch {
        None => {
            let pts = exact
                .pairs
                .iter()
                .map(|p| Point {
                    x: folded_difference(p.alpha, p.beta),
                    y: p.e,
                    err: 0.0,
                })
                .collect();
            (exact.clone(), pts)
        }
        Some(path) => {
            let batch = EventBatch::load(path)?;
            let report = chsh_empirical(&batch, &c.spec)?;
            let counts = ContingencyTable::from_batch(&batch)?;
            let mut pts = Vec::new();
            for (i, a) in batch.grid.alpha.iter().enumerate() {
                for (j, b) in batch.grid.beta.iter().enumerate() {
                    if let Ok(e) = correlation_from_counts(&counts, i, j) {
                        pts.push(Point {
                            x: folded_difference(*a, *b),
                            y: e.value,
                            err: e.std_error,
                        });
                    }
                }
            }
            (report, pts)
        }
    };
    let bound = lhv_chsh_bound(&c.spec);
    let output = ChshOutput {
        report: &report,
        classical_bound: bound,
        quantum_value: exact.s,
        tsirelson_bound: 2.0 * 2f64.sqrt(),
    };
    write_json(&c.out.join("chsh.json"), &output)?;

    let curve = (0..=200)
        .map(|k| {
            let d = -FRAC_PI_2 + PI * k as f64 / 200.0;
            (d, (2.0 * d).cos())
        })
        .collect();
    let label = if c.batch.is_some() { "sampled" } else { "CHSH settings" };
    let svg = Plot::new(
        "Correlation vs angle difference",
        "alpha - beta (rad)",
        "E",
        (-FRAC_PI_2, FRAC_PI_2),
        (-1.05, 1.05),
    )
    .line("cos 2(alpha - beta)", curve)
    .points(label, points)
    .render();
    fs::write(c.out.join("correlation.svg"), svg)?;

    println!("S = {:.6}", report.s);
    if c.batch.is_some() {
        println!("|S| = {:.6} ± {:.6}", report.abs_s, report.std_error);
    } else {
        println!("|S| = {:.6}", report.abs_s);
    }
    println!("classical bound: {bound}");
    println!("quantum value: {:.6}", exact.s);
    Ok(())
}

fn triad(c: &TriadConfig) -> CliResult<()> {
    let setup = quantum_setup(&c.first, c.include_latent, c.settings_exogenous);
    let report = enumerate_and_classify(
        &setup.nodes,
        &setup.constraints,
        &setup.pattern,
        c.bell_violated,
        &setup.wings,
    )?;

    let mut w = csv::Writer::from_path(c.out.join("triad.csv"))?;
    w.write_record([
        "index",
        "nodes",
        "edges",
        "markov_ok",
        "faithful_ok",
        "bell_excluded",
        "verdict",
    ])?;
    for e in &report.entries {
        let nodes: Vec<&str> = e.dag.nodes().iter().map(|n| n.name.as_str()).collect();
        w.write_record([
            e.index.to_string(),
            nodes.join(" "),
            e.dag.edge_string(),
            e.markov_ok.to_string(),
            e.faithful_ok.to_string(),
            e.bell_excluded.to_string(),
            e.verdict.label().into(),
        ])?;
    }
    w.flush()?;
    write_json(&c.out.join("triad.json"), &report)?;

    let s = &report.summary;
    println!("DAGs: {}", s.total);
    println!("markov: {}", s.markov_ok);
    println!("not-markov: {}", s.not_markov);
    println!("bell-excluded: {}", s.bell_excluded);
    println!("fine-tuned: {}", s.fine_tuned);
    println!("explanatory-and-faithful: {}", s.explanatory_and_faithful);
    Ok(())
}

#[derive(Serialize)]
struct DependenceRow {
    epsilon: f64,
    dependence: f64,
    closed_form: f64,
}

fn finetune(c: &FinetuneConfig) -> CliResult<()> {
    if c.epsilons.iter().any(|e| !e.is_finite()) {
        return Err(CliError::Usage("epsilons must be finite".into()));
    }
    let model = c.model.build()?;
    let report = perturb_and_test(&model, &c.model.path(), &c.epsilons, &c.model.statement())?;
    write_json(&c.out.join("stability.json"), &report)?;

    let rows: Vec<DependenceRow> = report
        .results
        .iter()
        .map(|r| DependenceRow {
            epsilon: r.epsilon,
            dependence: r.dependence,
            closed_form: c.model.closed_form(r.epsilon),
        })
        .collect();
    let mut w = csv::Writer::from_path(c.out.join("dependence.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;

    let lo = c.epsilons.iter().cloned().fold(0.0, f64::min);
    let hi = c.epsilons.iter().cloned().fold(0.0, f64::max);
    let pad = ((hi - lo) * 0.05).max(1e-3);
    let x_range = (lo - pad, hi + pad);
    let y_max = rows.iter().map(|r| r.dependence.max(r.closed_form)).fold(0.0, f64::max);
    let curve = (0..=100)
        .map(|k| {
            let e = x_range.0 + (x_range.1 - x_range.0) * k as f64 / 100.0;
            (e, c.model.closed_form(e))
        })
        .filter(|&(_, d)| d.is_finite())
        .collect();
    let svg = Plot::new(
        &format!("Dependence under perturbation: {}", model.id),
        "epsilon",
        "max total-variation dependence",
        x_range,
        (0.0, (y_max * 1.1).max(1e-3)),
    )
    .line("closed form", curve)
    .points(
        "measured",
        rows.iter()
            .map(|r| Point {
                x: r.epsilon,
                y: r.dependence,
                err: 0.0,
            })
            .collect(),
    )
    .render();
    fs::write(c.out.join("dependence.svg"), svg)?;

    println!(
        "{} on {}: baseline dependence {:.3e}",
        report.statement, model.id, report.baseline_dependence
    );
    for r in &rows {
        println!(
            "epsilon {:+.4}: dependence {:.6e} (closed form {:.6e})",
            r.epsilon, r.dependence, r.closed_form
        );
    }
    println!(
        "verdict: {}",
        match report.verdict {
            faithlab_core::causal::StabilityVerdict::Stable => "stable",
            faithlab_core::causal::StabilityVerdict::FineTuned => "fine-tuned",
        }
    );
    Ok(())
}

#[derive(Serialize)]
struct EquivalenceReport {
    density: usize,
    cells: usize,
    equivalent: bool,
    max_discrepancy: f64,
}

fn equivalence(c: &EquivalenceConfig) -> CliResult<()> {
    if c.density < 2 {
        return Err(CliError::Usage(format!(
            "density must be at least 2, got {}",
            c.density
        )));
    }
    let grid = uniform_grid(c.density);
    let mut w = csv::Writer::from_path(c.out.join("equivalence.csv"))?;
    w.write_record(["alpha", "beta", "max_discrepancy", "equivalent"])?;
    let mut worst: f64 = 0.0;
    let mut all = true;
    for &a in &grid {
        for &b in &grid {
            let e = operational_equivalence(a, b);
            worst = worst.max(e.max_discrepancy);
            all &= e.equivalent;
            w.write_record([
                a.radians().to_string(),
                b.radians().to_string(),
                e.max_discrepancy.to_string(),
                e.equivalent.to_string(),
            ])?;
        }
    }
    w.flush()?;
    let report = EquivalenceReport {
        density: c.density,
        cells: grid.len() * grid.len(),
        equivalent: all,
        max_discrepancy: worst,
    };
    write_json(&c.out.join("equivalence.json"), &report)?;
    println!("{}x{} settings grid", c.density, c.density);
    println!("max discrepancy: {worst:.3e}");
    println!("equivalent: {all}");
    Ok(())
}
