//! Subcommand dispatch.

use clusterperm::dyadic::GridConfig;
use clusterperm::missing::{
    biclique_decompose, max_biclique_exact, max_biclique_greedy, prepare_procedure2, EXACT_CAP,
};
use clusterperm::multiway::{
    irregular_test, layout_test, panel_test, select_l0, threeway_test, IrregularConfig, MultiIndexDataset,
};
use clusterperm::sim::{
    biclique_growth_experiment, dyadic_replicate, mc_rejection_rate, CovTransform, DyadicDgp, IrregularDgp,
    IrregularStudy, ReplicateExtras, SemiSyntheticError,
};
use clusterperm::{build_two_way_group, default_num_perms, rng, PreparedTest, RankTol, Solver, TestReport};
use nalgebra::DVector;

use crate::args::{
    BicliqueArgs, CiArgs, Command, DataArgs, Format, IrregularArgs, MissingArgs, Panel, RunConfig, SimulateArgs,
    SolverArgs, SolverKind, TestArgs,
};
use crate::error::CliError;
use crate::ingest::{ingest_csv, read_mask, to_dyadic, to_multi};
use crate::report::{
    BicliqueResult, CiResult, IrregularResult, MissingResult, Payload, Real, Report, SimRow, SimulationResult,
    Software, TestResult, SCHEMA_VERSION,
};

/// Digest of the configuration with output-only knobs cleared.
pub fn config_digest(config: &RunConfig) -> String {
    let mut canonical = config.clone();
    canonical.global.out = None;
    canonical.global.format = Format::Json;
    canonical.global.threads = None;
    rng::hex_digest(serde_json::to_string(&canonical).expect("config serializes").as_bytes())
}

fn policy(config: &RunConfig) -> RankTol {
    config.global.rank_tol.map_or(RankTol::Default, RankTol::Relative)
}

fn solver(args: &SolverArgs, seed: u64) -> Solver {
    match args.biclique_solver {
        SolverKind::Exact => Solver::Exact,
        SolverKind::Greedy => Solver::Greedy { restarts: args.restarts, seed: rng::sub_seed(seed, "biclique", 0) },
    }
}

/// Runs the configured subcommand and assembles its report.
pub fn run(config: &RunConfig) -> Result<Report, CliError> {
    let g = &config.global;
    if !(g.alpha > 0.0 && g.alpha < 1.0) {
        return Err(CliError::Config(format!("alpha = {} must lie in (0, 1)", g.alpha)));
    }
    if g.num_perms == Some(0) {
        return Err(CliError::Config("--num-perms must be at least 1".into()));
    }
    let mut notes = Vec::new();
    let result = match &config.command {
        Command::Test(args) => run_test(config, args, &mut notes)?,
        Command::Ci(args) => run_ci(config, args, &mut notes)?,
        Command::TestMissing(args) => run_missing(config, args, &mut notes)?,
        Command::TestThreeway(args) => run_multi(config, args, "threeway", threeway_test, &mut notes)?,
        Command::TestPanel(args) => run_multi(config, args, "panel", panel_test, &mut notes)?,
        Command::TestLayout(args) => run_multi(config, args, "layout", layout_test, &mut notes)?,
        Command::TestIrregular(args) => run_irregular(config, args, &mut notes)?,
        Command::Simulate(args) => run_simulate(config, args)?,
        Command::Biclique(args) => run_biclique(config, args)?,
    };
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        software: Software::current(),
        config: config.clone(),
        config_digest: config_digest(config),
        result,
        notes,
    })
}

fn floor_note(alpha: f64, k: usize, notes: &mut Vec<String>) {
    let floor = 1.0 / (k + 1) as f64;
    if alpha < floor {
        notes.push(format!("alpha = {alpha} is below the smallest attainable p-value {floor}; the test cannot reject"));
    }
}

fn load_dyadic(
    config: &RunConfig,
    data: &DataArgs,
    notes: &mut Vec<String>,
) -> Result<(PreparedTest, usize), CliError> {
    let table = ingest_csv(&data.data, data)?;
    let (array, _) = to_dyadic(&table, data)?;
    let design = array.stack_all()?;
    let (m, n) = (array.n_rows(), array.n_cols());
    let k = config.global.num_perms.unwrap_or_else(|| default_num_perms(&[m, n]));
    if m < k + 1 || n < k + 1 {
        notes.push(format!("array is {m}x{n}; sides shorter than K + 1 = {} are partly fixed", k + 1));
    }
    let family = build_two_way_group(m, n, k, config.global.seed)?;
    let prepared = PreparedTest::from_family(&design.x, &design.d, &design.y, &family, policy(config))?;
    Ok((prepared, k))
}

fn run_test(config: &RunConfig, args: &TestArgs, notes: &mut Vec<String>) -> Result<Payload, CliError> {
    let (prepared, k) = load_dyadic(config, &args.data, notes)?;
    let b0 = args.b0.clone().unwrap_or_else(|| vec![0.0; prepared.d_dim()]);
    let report = prepared.test(&DVector::from_vec(b0.clone()))?;
    floor_note(config.global.alpha, k, notes);
    notes.extend(report.notes.iter().cloned());
    Ok(Payload::Test(TestResult::from_report(
        "dyadic",
        &report,
        config.global.alpha,
        prepared.n_obs(),
        b0,
        config.global.seed,
    )))
}

fn run_ci(config: &RunConfig, args: &CiArgs, notes: &mut Vec<String>) -> Result<Payload, CliError> {
    let (prepared, k) = load_dyadic(config, &args.data, notes)?;
    let grid = GridConfig {
        points: args.grid_points,
        half_width_scales: args.half_width,
        max_expansions: args.max_expansions,
        refine_steps: args.refine_steps,
    };
    let ci = prepared.invert_ci(config.global.alpha, &grid)?;
    notes.extend(prepared.notes().iter().cloned());
    if ci.open_lower || ci.open_upper {
        notes.push("the accepted set reaches the edge of the widest grid; open sides are reported as infinite".into());
    }
    Ok(Payload::Ci(CiResult {
        lower: Real(ci.lower),
        upper: Real(ci.upper),
        alpha: ci.alpha,
        num_perms: k,
        open_lower: ci.open_lower,
        open_upper: ci.open_upper,
        empty: ci.empty,
        estimate: Real(ci.grid.center),
        scale: Real(ci.grid.scale),
        grid_half_width: Real(ci.grid.half_width),
        grid_points: ci.grid.points,
        expansions: ci.grid.expansions,
        seed: config.global.seed,
    }))
}

fn run_missing(config: &RunConfig, args: &MissingArgs, notes: &mut Vec<String>) -> Result<Payload, CliError> {
    let table = ingest_csv(&args.data.data, &args.data)?;
    let (array, observed) = to_dyadic(&table, &args.data)?;
    let mask = match &args.mask {
        Some(path) => read_mask(path, Some(array.n_rows()), Some(array.n_cols()))?,
        None => observed,
    };
    let seed = config.global.seed;
    let cover = biclique_decompose(&mask, solver(&args.solver, seed), args.solver.min_block)?;
    let largest = cover
        .blocks
        .iter()
        .map(|b| b.rows.len().max(b.cols.len()))
        .max()
        .ok_or_else(|| CliError::Core(clusterperm::Error::DegenerateInput("no fully observed block found".into())))?;
    let k = config.global.num_perms.unwrap_or_else(|| default_num_perms(&[largest]));
    let (prepared, block_notes) = prepare_procedure2(&array, &mask, &cover, k, seed, policy(config))?;
    let report: TestReport = prepared.test(&DVector::zeros(array.d_dim()))?;
    floor_note(config.global.alpha, k, notes);
    notes.extend(block_notes);
    notes.extend(report.notes.iter().cloned());
    Ok(Payload::Missing(MissingResult {
        test: TestResult::from_report("missing", &report, config.global.alpha, cover.cell_count(), vec![0.0; array.d_dim()], seed),
        cell_count: cover.cell_count(),
        observed_cells: mask.count(),
        blocks: cover.blocks,
    }))
}

fn run_multi(
    config: &RunConfig,
    args: &DataArgs,
    design: &str,
    test: fn(&MultiIndexDataset, usize, u64) -> clusterperm::Result<TestReport>,
    notes: &mut Vec<String>,
) -> Result<Payload, CliError> {
    let table = ingest_csv(&args.data, args)?;
    let data = to_multi(&table, args)?;
    let (m, n, l) = data.dims();
    let k = config.global.num_perms.unwrap_or_else(|| match design {
        "threeway" => default_num_perms(&[m, n, l]),
        "panel" => default_num_perms(&[m, n]),
        _ => default_num_perms(&[l]),
    });
    let report = test(&data, k, config.global.seed)?;
    floor_note(config.global.alpha, k, notes);
    notes.extend(report.notes.iter().cloned());
    Ok(Payload::Test(TestResult::from_report(
        design,
        &report,
        config.global.alpha,
        data.records().len(),
        vec![0.0; data.d_dim()],
        config.global.seed,
    )))
}

fn run_irregular(config: &RunConfig, args: &IrregularArgs, notes: &mut Vec<String>) -> Result<Payload, CliError> {
    let table = ingest_csv(&args.data.data, &args.data)?;
    let data = to_multi(&table, &args.data)?;
    let l0 = match args.l0 {
        Some(l0) => l0,
        None => {
            let l0 = select_l0(&data)?;
            notes.push(format!("L0 = {l0} chosen by grid search over retained observations"));
            l0
        }
    };
    let (m, n, _) = data.dims();
    let k = config.global.num_perms.unwrap_or_else(|| default_num_perms(&[m.max(n).max(l0)]));
    let seed = config.global.seed;
    let irregular = IrregularConfig {
        l0,
        num_perms: k,
        repeats: args.repeats,
        solver: solver(&args.solver, seed),
        min_block: args.solver.min_block,
    };
    let out = irregular_test(&data, &irregular, seed)?;
    floor_note(config.global.alpha, k, notes);
    if let Some(first) = out.reports.first() {
        notes.extend(first.notes.iter().cloned());
    }
    Ok(Payload::Irregular(IrregularResult {
        median_pval: out.median_pval,
        reject: out.median_pval <= config.global.alpha,
        alpha: config.global.alpha,
        l0,
        num_perms: k,
        repeats: args.repeats,
        pvals: out.reports.iter().map(|r| r.pval).collect(),
        retained_obs: out.cover.cell_count() * l0,
        blocks: out.cover.blocks,
        eligible_cells: out.mask_cells,
        seed,
    }))
}

fn run_simulate(config: &RunConfig, args: &SimulateArgs) -> Result<Payload, CliError> {
    let g = &config.global;
    if args.reps == 0 {
        return Err(CliError::Config("--reps must be positive".into()));
    }
    let mut rows = Vec::new();
    let mut cell = 0u64;
    let mut next_seed = || {
        cell += 1;
        rng::sub_seed(g.seed, "simulate", cell)
    };
    let digest = config_digest(config);
    match args.panel {
        Panel::Table1 => {
            let phi2s = args.phi2.clone().unwrap_or_else(|| vec![0.15, 0.9]);
            for (cov, cov_name) in [(CovTransform::Normal, "normal"), (CovTransform::Lognormal, "lognormal")] {
                for &phi2 in &phi2s {
                    for &n in &args.n {
                        let dgp = DyadicDgp::table1(n, cov, phi2);
                        let summary = mc_rejection_rate(
                            |s| Ok(dyadic_replicate(&dgp, g.num_perms, &ReplicateExtras::default(), s)?.pval),
                            args.reps,
                            g.alpha,
                            next_seed(),
                            &digest,
                        )?;
                        rows.push(SimRow {
                            label: format!("{cov_name} cov., phi2 = {phi2}"),
                            n,
                            beta: Some(0.0),
                            phi2: Some(phi2),
                            rho: None,
                            summary: Some(summary),
                            median_side: None,
                        });
                    }
                }
            }
        }
        Panel::Table4 => {
            let phi2s = args.phi2.clone().unwrap_or_else(|| vec![0.1]);
            let betas = args
                .beta
                .clone()
                .unwrap_or_else(|| (1..=15).map(|t| f64::from(t) / 100.0).collect());
            for &phi2 in &phi2s {
                for &n in &args.n {
                    for &beta in &betas {
                        let dgp = DyadicDgp::table4(n, beta, phi2);
                        let summary = mc_rejection_rate(
                            |s| Ok(dyadic_replicate(&dgp, g.num_perms, &ReplicateExtras::default(), s)?.pval),
                            args.reps,
                            g.alpha,
                            next_seed(),
                            &digest,
                        )?;
                        rows.push(SimRow {
                            label: format!("phi2 = {phi2}, beta = {beta}"),
                            n,
                            beta: Some(beta),
                            phi2: Some(phi2),
                            rho: None,
                            summary: Some(summary),
                            median_side: None,
                        });
                    }
                }
            }
        }
        Panel::Table3 => {
            let k = g.num_perms.unwrap_or(19);
            for (kind, name) in [(SemiSyntheticError::I, "I"), (SemiSyntheticError::II, "II"), (SemiSyntheticError::III, "III")] {
                let dgp = IrregularDgp::desk_scale(kind);
                let mut irregular = IrregularConfig::new(3, k);
                irregular.repeats = args.repeats;
                let study = IrregularStudy::new(dgp, irregular, next_seed());
                let summary = mc_rejection_rate(|s| study.replicate(s), args.reps, g.alpha, next_seed(), &digest)?;
                rows.push(SimRow {
                    label: format!("error type {name}"),
                    n: study.dgp.m,
                    beta: Some(0.0),
                    phi2: None,
                    rho: None,
                    summary: Some(summary),
                    median_side: None,
                });
            }
        }
        Panel::Growth => {
            if let Some(&n) = args.n.iter().find(|&&n| n > EXACT_CAP) {
                return Err(clusterperm::Error::CapExceeded { rows: n, cols: n, cap: EXACT_CAP }.into());
            }
            for row in biclique_growth_experiment(&args.n, &args.rho, args.reps, g.seed)? {
                rows.push(SimRow {
                    label: format!("rho = {}", row.rho),
                    n: row.n,
                    beta: None,
                    phi2: None,
                    rho: Some(row.rho),
                    summary: None,
                    median_side: Some(row.median_side),
                });
            }
        }
    }
    let panel = match args.panel {
        Panel::Table1 => "table1",
        Panel::Table3 => "table3",
        Panel::Table4 => "table4",
        Panel::Growth => "growth",
    };
    Ok(Payload::Simulation(SimulationResult { panel: panel.into(), num_perms: g.num_perms, rows }))
}

fn run_biclique(config: &RunConfig, args: &BicliqueArgs) -> Result<Payload, CliError> {
    let mask = read_mask(&args.mask, args.n_rows, args.n_cols)?;
    let seed = config.global.seed;
    let largest = match args.solver.biclique_solver {
        SolverKind::Exact => max_biclique_exact(&mask)?,
        SolverKind::Greedy => max_biclique_greedy(&mask, args.solver.restarts, rng::sub_seed(seed, "largest", 0))?,
    };
    let cover = biclique_decompose(&mask, solver(&args.solver, seed), args.solver.min_block)?;
    Ok(Payload::Biclique(BicliqueResult {
        n_rows: mask.n_rows(),
        n_cols: mask.n_cols(),
        observed_cells: mask.count(),
        largest,
        cell_count: cover.cell_count(),
        blocks: cover.blocks,
    }))
}
