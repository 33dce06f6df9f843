//! The batch commands behind each CLI subcommand.

use serde::Serialize;

use polariton_core::diagrams::{dyson_partial_sum, enumerate_walks, evaluate_walk, WalkClass};
use polariton_core::engines::{
    self, cf_full, cf_truncated, d1, dense_green, expansion_sum, Engine, GreenResult,
};
use polariton_core::model::EnsembleSpec;
use polariton_core::spectra::{
    compute_spectrum, find_peaks, polariton_modes, sum_rule, DEFAULT_MIN_HEIGHT,
    DEFAULT_MIN_PROMINENCE,
};
use polariton_core::{chi, diagrams};

use crate::config::{parse_engine, preset_spec_for_count, RunConfig};
use crate::output::{
    write_atomic, write_json, write_modes, write_peaks, write_spectrum, Manifest, ModesRecord,
    SpecHash, SumRuleRecord,
};
use crate::CliError;

fn numeric(e: engines::EngineError) -> CliError {
    use engines::EngineError::*;
    match &e {
        Model(_) | TruncationDepth { .. } | EnsembleTooSmall { .. } | Grid => {
            CliError::config(e.to_string())
        }
        SolveFailure { .. } => CliError::numeric(e.to_string()),
    }
}

pub fn evaluate_engine(
    spec: &EnsembleSpec,
    grid: &[f64],
    engine: Engine,
    dyson_m_max: usize,
) -> Result<GreenResult, CliError> {
    match engine {
        Engine::Dense => dense_green(spec, grid),
        Engine::ContinuedFraction => cf_full(spec, grid),
        Engine::Truncated(k) => cf_truncated(spec, grid, k),
        Engine::ExpansionTerm(0) => engines::d0(spec, grid),
        Engine::ExpansionTerm(1) => d1(spec, grid),
        Engine::ExpansionTerm(2) => engines::d2_x2(spec, grid),
        Engine::ExpansionTerm(k) => {
            return Err(CliError::config(format!("no closed form for d{k}")))
        }
        Engine::ExpansionSum(k) => expansion_sum(spec, grid, k),
        Engine::Dyson(m) => dyson_partial_sum(spec, grid, m.min(dyson_m_max.max(m))),
    }
    .map_err(numeric)
}

/// The (label, ensemble) pairs a config expands to: one per swept molecule
/// count, or a single unlabeled entry.
fn runs(config: &RunConfig) -> Result<Vec<(String, EnsembleSpec)>, CliError> {
    let base = config.ensemble.clone().expect("config is resolved");
    match (&config.sweep_n, &config.preset) {
        (Some(counts), Some(name)) => counts
            .iter()
            .map(|&n| Ok((format!("_N{n}"), preset_spec_for_count(name, n)?)))
            .collect(),
        (Some(counts), None) => {
            // sweeping a bespoke ensemble rescales the first species count and
            // the coupling so λ√N stays fixed
            counts
                .iter()
                .map(|&n| {
                    let mut spec = base.clone();
                    if spec.species.len() != 1 {
                        return Err(CliError::config(
                            "sweep-N on an inline ensemble requires a single species".into(),
                        ));
                    }
                    let coupling = spec.collective_coupling();
                    spec.species[0].count = n;
                    spec.lambda = coupling / (n as f64).sqrt();
                    Ok((format!("_N{n}"), spec))
                })
                .collect()
        }
        (None, _) => Ok(vec![(String::new(), base)]),
    }
}

pub fn run_spectrum(config: &RunConfig) -> Result<(), CliError> {
    let grid = config.grid.samples();
    let dir = &config.out_dir;
    let mut files = Vec::new();
    let mut hashes = Vec::new();
    let mut warnings = Vec::new();
    let mut sum_rules = Vec::new();

    for (suffix, spec) in runs(config)? {
        hashes.push(SpecHash {
            label: if suffix.is_empty() { "run".into() } else { suffix.trim_start_matches('_').into() },
            hash: spec.fingerprint(),
        });
        let mut tables = Vec::new();
        for token in &config.engines {
            let engine = parse_engine(token)?;
            let green = evaluate_engine(&spec, &grid, engine, config.dyson_m_max)?;
            for w in &green.warnings {
                warnings.push(format!(
                    "{}{suffix}: ill-conditioned inner solve at ω = {} (rcond {:.2e})",
                    engine.label(),
                    w.omega,
                    w.rcond
                ));
            }
            let spectrum = compute_spectrum(&green, spec.cavity.kappa);
            let path = write_spectrum(dir, &suffix, &green, &spectrum)?;
            files.push(path.file_name().unwrap().to_string_lossy().into_owned());
            if config.analyses.peaks {
                tables.push(find_peaks(&spectrum, DEFAULT_MIN_HEIGHT, DEFAULT_MIN_PROMINENCE));
            }
            if config.analyses.sum_rule {
                sum_rules.push(SumRuleRecord::new(
                    format!("{}{suffix}", engine.label()),
                    sum_rule(&green, &spec.cavity),
                ));
            }
        }
        if config.analyses.peaks {
            let path = write_peaks(dir, &suffix, &tables)?;
            files.push(path.file_name().unwrap().to_string_lossy().into_owned());
        }
        if config.analyses.modes {
            let records = mode_records(&spec)?;
            let path = write_modes(dir, &suffix, &records)?;
            files.push(path.file_name().unwrap().to_string_lossy().into_owned());
        }
        if config.analyses.chi {
            let path = dir.join(format!("chi{suffix}.csv"));
            write_atomic(&path, &chi_table(&spec, &grid)?)?;
            files.push(path.file_name().unwrap().to_string_lossy().into_owned());
        }
        if config.analyses.dyson {
            let path = dir.join(format!("dyson{suffix}.json"));
            write_json(&path, &dyson_report(&spec, &grid, config.dyson_m_max)?)?;
            files.push(path.file_name().unwrap().to_string_lossy().into_owned());
        }
    }

    if config.analyses.sum_rule {
        let path = dir.join("sum_rules.json");
        write_json(&path, &sum_rules)?;
        files.push("sum_rules.json".into());
    }

    let manifest = Manifest {
        config,
        spec_hashes: hashes,
        version: env!("CARGO_PKG_VERSION"),
        files,
        warnings,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(())
}

fn mode_records(spec: &EnsembleSpec) -> Result<Vec<ModesRecord>, CliError> {
    let mut records = Vec::new();
    for order in 0..=1usize {
        if spec.total_count() < order + 1 {
            continue;
        }
        let modes = polariton_modes(spec, order).map_err(|e| CliError::numeric(e.to_string()))?;
        if modes.eigenvalues.is_empty() {
            continue; // vibrationless species have no depth-1 pair
        }
        records.push(ModesRecord {
            order,
            eigenvalues: modes.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
        });
    }
    Ok(records)
}

#[derive(Serialize)]
struct PairReport {
    a: String,
    b: String,
    max_rel_diff: f64,
    mean_rel_diff: f64,
}

#[derive(Serialize)]
struct CompareReport<'a> {
    config: &'a RunConfig,
    version: &'static str,
    runs: Vec<CompareRun>,
}

#[derive(Serialize)]
struct CompareRun {
    label: String,
    spec_hash: String,
    pairs: Vec<PairReport>,
}

pub fn run_compare(config: &RunConfig) -> Result<(), CliError> {
    if config.engines.len() < 2 {
        return Err(CliError::config(
            "compare needs at least two engines".into(),
        ));
    }
    let grid = config.grid.samples();
    let mut report_runs = Vec::new();
    for (suffix, spec) in runs(config)? {
        let results: Vec<GreenResult> = config
            .engines
            .iter()
            .map(|token| evaluate_engine(&spec, &grid, parse_engine(token)?, config.dyson_m_max))
            .collect::<Result<_, _>>()?;
        let mut pairs = Vec::new();
        for i in 0..results.len() {
            for j in i + 1..results.len() {
                let (a, b) = (&results[i], &results[j]);
                let rel: Vec<f64> = a
                    .values
                    .iter()
                    .zip(&b.values)
                    .map(|(x, y)| (x - y).norm() / y.norm())
                    .collect();
                pairs.push(PairReport {
                    a: a.engine.label(),
                    b: b.engine.label(),
                    max_rel_diff: rel.iter().cloned().fold(0.0, f64::max),
                    mean_rel_diff: rel.iter().sum::<f64>() / rel.len() as f64,
                });
            }
        }
        report_runs.push(CompareRun {
            label: if suffix.is_empty() { "run".into() } else { suffix.trim_start_matches('_').into() },
            spec_hash: spec.fingerprint(),
            pairs,
        });
    }
    let report = CompareReport {
        config,
        version: env!("CARGO_PKG_VERSION"),
        runs: report_runs,
    };
    write_json(&config.out_dir.join("compare.json"), &report)?;
    Ok(())
}

/// Per-frequency susceptibility table with the self-energy-series prefactors.
fn chi_table(spec: &EnsembleSpec, grid: &[f64]) -> Result<String, CliError> {
    let mut out = String::from(
        "omega,re_chi1,im_chi1,re_chi3,im_chi3,re_chi5_a,im_chi5_a,re_chi5_b,im_chi5_b\n",
    );
    for &omega in grid {
        let c1 = chi::chi_term(spec, omega, 0).map_err(|e| CliError::numeric(e.to_string()))?;
        let c3 = chi::chi_term(spec, omega, 1).map_err(|e| CliError::numeric(e.to_string()))?;
        let c5 = chi::chi_term(spec, omega, 2).map_err(|e| CliError::numeric(e.to_string()))?;
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            omega,
            c1.value.re,
            c1.value.im,
            c3.value.re,
            c3.value.im,
            c5.contributions[0].re,
            c5.contributions[0].im,
            c5.contributions[1].re,
            c5.contributions[1].im,
        ));
    }
    Ok(out)
}

pub fn run_chi(config: &RunConfig) -> Result<(), CliError> {
    let grid = config.grid.samples();
    for (suffix, spec) in runs(config)? {
        let path = config.out_dir.join(format!("chi{suffix}.csv"));
        write_atomic(&path, &chi_table(&spec, &grid)?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct WalkRecord {
    ladder: String,
    class: &'static str,
    scaling_exponent: usize,
    values: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct OrderRecord {
    m: usize,
    walk_count: usize,
    walks: Vec<WalkRecord>,
}

#[derive(Serialize)]
struct DysonReport {
    m_max: usize,
    omegas: Vec<f64>,
    orders: Vec<OrderRecord>,
}

fn dyson_report(spec: &EnsembleSpec, grid: &[f64], m_max: usize) -> Result<DysonReport, CliError> {
    let mut orders = Vec::new();
    for m in 1..=m_max {
        let walks = enumerate_walks(m, spec.total_count());
        let mut records = Vec::new();
        for walk in &walks {
            let mut values = Vec::with_capacity(grid.len());
            for &omega in grid {
                let term = evaluate_walk(spec, walk, omega).map_err(numeric)?;
                values.push([term.value.re, term.value.im]);
            }
            records.push(WalkRecord {
                ladder: walk.ladder(),
                class: match diagrams::classify_walk(walk) {
                    WalkClass::Reducible => "reducible",
                    WalkClass::Irreducible => "irreducible",
                },
                scaling_exponent: walk.scaling_exponent(),
                values,
            });
        }
        orders.push(OrderRecord {
            m,
            walk_count: walks.len(),
            walks: records,
        });
    }
    Ok(DysonReport {
        m_max,
        omegas: grid.to_vec(),
        orders,
    })
}

pub fn run_dyson(config: &RunConfig) -> Result<(), CliError> {
    let grid = config.grid.samples();
    for (suffix, spec) in runs(config)? {
        let report = dyson_report(&spec, &grid, config.dyson_m_max)?;
        write_json(&config.out_dir.join(format!("dyson{suffix}.json")), &report)?;
    }
    Ok(())
}

pub fn run_modes(config: &RunConfig) -> Result<(), CliError> {
    for (suffix, spec) in runs(config)? {
        let records = mode_records(&spec)?;
        write_modes(&config.out_dir, &suffix, &records)?;
    }
    Ok(())
}
