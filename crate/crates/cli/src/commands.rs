use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use lattice_dp::coupling::time_grid;
use lattice_dp::io::{summarize, write_draws_csv, write_histogram_csv, write_summary_csv};
use lattice_dp::mechanism::build_target;
use lattice_dp::sampler::{run_independent_chains, stream_rng};
use lattice_dp::{
    compile, lattice_basis, meeting_times, noise_replicates, privatize, psrf_per_coordinate, smith_normal_form,
    tv_bound_curve, ConstraintSet, DoubleGeometric, Error, Histogram, Init, IntMatrix, MechanismContext, MechanismSpec,
    MeetingConfig, ProposalSpec, Release, VERSION,
};
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{DataFormat, ExperimentConfig};
use crate::county::load_county_csv;
use crate::error::{file_error, CliError, Context};

// ---------------------------------------------------------------- snf

/// Reads an integer matrix from a header-less CSV.
pub fn read_matrix_csv(path: &Path) -> Result<IntMatrix, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| file_error(path, e))?;
    let parse_err = |line: usize, message: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rows: Vec<Vec<BigInt>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<BigInt>()
                    .map_err(|_| parse_err(i + 1, format!("{:?} is not an integer", f.trim())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    i + 1,
                    format!("expected {} entries, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(1, "matrix is empty".into()));
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(IntMatrix::from_vec(r, c, rows.into_iter().flatten().collect()))
}

/// Entries that fit in an `i64` become JSON numbers, larger ones strings.
fn big_json(x: &BigInt) -> Value {
    match x.to_i64() {
        Some(v) => json!(v),
        None => json!(x.to_string()),
    }
}

fn matrix_json(m: &IntMatrix) -> Value {
    Value::Array(
        (0..m.rows())
            .map(|i| Value::Array(m.row(i).iter().map(big_json).collect()))
            .collect(),
    )
}

pub fn snf(matrix: &Path) -> Result<Value, CliError> {
    let a = read_matrix_csv(matrix)?;
    let dec = smith_normal_form(&a).context("Smith normal form")?;
    let basis = match lattice_basis(&dec) {
        Ok(b) => Some(b),
        Err(Error::EmptyLattice) => None,
        Err(e) => return Err(e).context("lattice basis"),
    };
    Ok(json!({
        "rows": a.rows(),
        "cols": a.cols(),
        "rank": dec.rank,
        "invariant_factors": dec.invariant_factors().iter().map(big_json).collect::<Vec<_>>(),
        "U": matrix_json(&dec.u),
        "D": matrix_json(&dec.d_mat),
        "V": matrix_json(&dec.v),
        "basis": basis.as_ref().map(|b| matrix_json(&b.basis)),
        "gram_det": basis.as_ref().map(|b| big_json(&b.gram_det)),
    }))
}

pub fn run_snf(matrix: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let value = snf(matrix)?;
    let text = serde_json::to_string_pretty(&value).expect("JSON values serialize");
    match out {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| file_error(p, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------- shared

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| file_error(path, e))
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir).map_err(|e| file_error(&dir, e))?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| file_error(path, e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| file_error(path, e))
}

fn lib_write(path: &Path, f: impl FnOnce(BufWriter<File>) -> lattice_dp::Result<()>) -> Result<(), CliError> {
    f(create(path)?).map_err(|e| file_error(path, e))
}

/// One-column CSV with the given header.
fn write_column(path: &Path, header: &str, values: &[i64]) -> Result<(), CliError> {
    let mut w = create(path)?;
    let mut text = format!("{header}\n");
    for v in values {
        text.push_str(&v.to_string());
        text.push('\n');
    }
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| file_error(path, e))
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    command: &'static str,
    constraints: Option<&'a str>,
    dimension: usize,
    independent_constraints: usize,
    lattice_dim: usize,
    degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    gram_det: Option<String>,
    mechanism: &'a MechanismSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c_a: Option<f64>,
    budget: lattice_dp::Budget,
    #[serde(skip_serializing_if = "Value::is_null")]
    extra: Value,
}

fn manifest<'a>(
    command: &'static str,
    cfg: &'a ExperimentConfig,
    ctx: &MechanismContext,
    spec: &'a MechanismSpec,
) -> Result<Manifest<'a>, CliError> {
    let (_, gaussian) = build_target(ctx, spec).context("building target")?;
    Ok(Manifest {
        version: VERSION,
        command,
        constraints: cfg.constraints.as_deref(),
        dimension: ctx.constraints.dimension(),
        independent_constraints: ctx.kept_rows.len(),
        lattice_dim: ctx.lattice_dim(),
        degenerate: ctx.is_degenerate(),
        gram_det: ctx.gram_det().map(BigInt::to_string),
        mechanism: spec,
        sigma: gaussian.map(|g| g.sigma),
        c_a: gaussian.map(|g| g.c_a),
        budget: spec.budget(),
        extra: Value::Null,
    })
}

fn compile_ctx(cs: &ConstraintSet) -> Result<MechanismContext, CliError> {
    compile(cs).context("compiling constraints")
}

// ---------------------------------------------------------------- privatize

pub fn run_privatize(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let format = cfg.data.as_ref().map(|d| d.format).unwrap_or_default();
    match format {
        DataFormat::Histogram => privatize_histogram(cfg),
        DataFormat::County => privatize_counties(cfg),
    }
}

fn check_margins(cs: &ConstraintSet, x: &Histogram, release: &Release) -> Result<(), CliError> {
    let held = cs.equivalent(x, &release.output).context("checking invariants")?;
    if held {
        Ok(())
    } else {
        Err(Error::InvariantViolated).context("release")
    }
}

fn privatize_histogram(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let cs = cfg.constraint_set()?;
    let path = cfg.data_path()?;
    let values = File::open(&path)
        .map_err(|e| file_error(&path, e))
        .and_then(|f| lattice_dp::io::read_histogram_csv(f).map_err(|e| file_error(&path, e)))?;
    let x = Histogram::new(values).context(format!("reading {}", path.display()))?;
    let ctx = compile_ctx(&cs)?;
    let spec = cfg.mechanism_spec(1)?;
    let release = privatize(&ctx, &x, &spec).context("privatize")?;
    check_margins(&cs, &x, &release)?;

    let dir = out_dir(cfg)?;
    lib_write(&dir.join("output.csv"), |w| write_histogram_csv(w, &release.output))?;
    write_column(&dir.join("noise.csv"), "noise", &release.noise)?;
    write_json(&dir.join("manifest.json"), &manifest("privatize", cfg, &ctx, &spec)?)?;
    eprintln!(
        "released {} cells (lattice dimension {}) to {}",
        x.len(),
        ctx.lattice_dim(),
        dir.display()
    );
    Ok(())
}

/// Each state is released on its own with the state total held fixed.
/// State `i` (in file order) uses seed `seed + i`.
fn privatize_counties(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let path = cfg.data_path()?;
    let states = load_county_csv(&path)?;
    let base = cfg.mechanism_spec(1)?;

    let releases = states
        .par_iter()
        .enumerate()
        .map(|(i, st)| {
            let cs = ConstraintSet::total(st.histogram.len()).context(format!("state {}", st.state))?;
            let ctx = compile_ctx(&cs)?;
            let mut spec = base.clone();
            spec.chain.seed = base.chain.seed.wrapping_add(i as u64);
            let release = privatize(&ctx, &st.histogram, &spec).context(format!("state {}", st.state))?;
            check_margins(&cs, &st.histogram, &release)?;
            Ok(release)
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let dir = out_dir(cfg)?;
    let out_path = dir.join("output.csv");
    let mut w = csv::Writer::from_writer(create(&out_path)?);
    let csv_err = |e: csv::Error| file_error(&out_path, e);
    w.write_record(["state", "county", "population", "released", "noise"])
        .map_err(csv_err)?;
    for (st, rel) in states.iter().zip(&releases) {
        for (j, county) in st.counties.iter().enumerate() {
            w.write_record([
                st.state.as_str(),
                county,
                &st.histogram.values()[j].to_string(),
                &rel.output[j].to_string(),
                &rel.noise[j].to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| file_error(&out_path, e))?;

    let sum_path = dir.join("summary.csv");
    let mut w = csv::Writer::from_writer(create(&sum_path)?);
    let csv_err = |e: csv::Error| file_error(&sum_path, e);
    w.write_record(["state", "counties", "total", "released_total", "max_abs_noise", "seed"])
        .map_err(csv_err)?;
    for (i, (st, rel)) in states.iter().zip(&releases).enumerate() {
        let total: i64 = st.histogram.values().iter().sum();
        let released: i64 = rel.output.iter().sum();
        let max_abs = rel.noise.iter().map(|z| z.abs()).max().unwrap_or(0);
        w.write_record([
            st.state.clone(),
            st.counties.len().to_string(),
            total.to_string(),
            released.to_string(),
            max_abs.to_string(),
            base.chain.seed.wrapping_add(i as u64).to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| file_error(&sum_path, e))?;

    let manifest = json!({
        "version": VERSION,
        "command": "privatize",
        "data": path,
        "states": states.len(),
        "constraints": "state totals",
        "mechanism": base,
        "seeds": "state i (file order, from 0) uses seed + i",
        // States are disjoint, so the per-state budget is the total spend.
        "budget": base.budget(),
        "gaussian": releases.first().and_then(|r| r.diagnostics.gaussian),
    });
    write_json(&dir.join("manifest.json"), &manifest)?;
    eprintln!("released {} states to {}", states.len(), dir.display());
    Ok(())
}

// ---------------------------------------------------------------- replicates

pub fn run_replicates(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let count = cfg.diagnostics.replicates;
    if count == 0 {
        return Err(CliError::Config("replicates must be at least 1".into()));
    }
    let ctx = compile_ctx(&cfg.constraint_set()?)?;
    let spec = cfg.mechanism_spec(count as u64)?;
    let draws = noise_replicates(&ctx, &spec, count).context("drawing replicates")?;
    let dir = out_dir(cfg)?;
    lib_write(&dir.join("noise_draws.csv"), |w| write_draws_csv(w, &draws))?;
    lib_write(&dir.join("summary.csv"), |w| write_summary_csv(w, &summarize(&draws)))?;
    let mut m = manifest("replicates", cfg, &ctx, &spec)?;
    m.extra = json!({ "replicates": count });
    write_json(&dir.join("manifest.json"), &m)?;
    eprintln!("{count} draws written to {}", dir.display());
    Ok(())
}

// ---------------------------------------------------------------- couple

pub fn run_couple(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let diag = &cfg.diagnostics;
    if diag.replicates == 0 || diag.lags.is_empty() || diag.lags.contains(&0) {
        return Err(CliError::Config(
            "couple needs positive lags and at least one replicate".into(),
        ));
    }
    let ctx = compile_ctx(&cfg.constraint_set()?)?;
    let spec = cfg.mechanism_spec(1)?;
    let (target, _) = build_target(&ctx, &spec).context("building target")?;
    let ps = ProposalSpec::uniform(spec.proposal_ratio, ctx.lattice_dim()).context("proposal")?;
    let dir = out_dir(cfg)?;

    let (mut failed, mut total) = (0, 0);
    for &lag in &diag.lags {
        let mc = MeetingConfig {
            max_iterations: diag.max_iterations,
            ..MeetingConfig::new(lag)
        };
        let results = meeting_times(&mc, diag.replicates, cfg.seed(), &target, &ps, &ctx.lattice);
        let mut taus = Vec::with_capacity(results.len());
        let mut timeouts = 0;
        for r in results {
            match r {
                Ok(t) => taus.push(t),
                Err(Error::MeetingTimeout { .. }) => timeouts += 1,
                Err(e) => return Err(e).context(format!("coupling at lag {lag}")),
            }
        }
        failed += timeouts;
        total += diag.replicates;
        write_json(
            &dir.join(format!("meeting_times_L{lag}.json")),
            &json!({
                "lag": lag,
                "replicates": diag.replicates,
                "timeouts": timeouts,
                "max_iterations": diag.max_iterations,
                "seed": cfg.seed(),
                "tau": taus.iter().map(|t| t.tau).collect::<Vec<_>>(),
            }),
        )?;
        if taus.is_empty() {
            eprintln!("lag {lag}: every replicate timed out");
            continue;
        }
        let max_tau = taus.iter().map(|t| t.tau).max().unwrap_or(0);
        let l_max = diag.l_max.unwrap_or(max_tau);
        let l_step = diag.l_step.unwrap_or((l_max / 100).max(1));
        let curve = tv_bound_curve(&taus, &time_grid(l_max, l_step)).context("TV bound")?;
        lib_write(&dir.join(format!("tv_bound_L{lag}.csv")), |w| curve.write_csv(w))?;
        eprintln!(
            "lag {lag}: {} meetings, max tau {max_tau}, bound at 0 = {:.4}",
            taus.len(),
            curve.bounds[0]
        );
    }
    if failed > 0 {
        return Err(CliError::PartialTimeout { failed, total });
    }
    Ok(())
}

// ---------------------------------------------------------------- psrf

pub fn run_psrf(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let chains = cfg.diagnostics.chains;
    if chains < 2 {
        return Err(CliError::Config("psrf needs at least two chains".into()));
    }
    let ctx = compile_ctx(&cfg.constraint_set()?)?;
    let spec = cfg.mechanism_spec(cfg.diagnostics.replicates.max(2) as u64)?;
    let (target, _) = build_target(&ctx, &spec).context("building target")?;
    let ps = ProposalSpec::uniform(spec.proposal_ratio, ctx.lattice_dim()).context("proposal")?;

    // Overdispersed starting points in reduced coordinates.
    let wide = cfg.diagnostics.overdispersed_epsilon.unwrap_or(spec.epsilon / 10.0);
    let start = DoubleGeometric::new((-wide).exp()).context("overdispersed start")?;
    // streams 0..chains drive the chains themselves
    let mut rng = stream_rng(cfg.seed(), chains as u64);
    let rank = ctx.lattice.rank();
    let inits: Vec<Init> = (0..chains)
        .map(|_| {
            let mut v = vec![0; ctx.lattice.dim()];
            for x in &mut v[rank..] {
                *x = start.sample(&mut rng);
            }
            Init::Reduced(v)
        })
        .collect();

    let traces = run_independent_chains(&spec.chain, &inits, &target, &ps, &ctx.lattice).context("chains")?;
    let r = psrf_per_coordinate(&traces).context("PSRF")?;
    let dir = out_dir(cfg)?;
    let path = dir.join("psrf.csv");
    let mut text = String::from("coordinate,psrf\n");
    for (i, v) in r.iter().enumerate() {
        text.push_str(&format!("{i},{v}\n"));
    }
    std::fs::write(&path, text).map_err(|e| file_error(&path, e))?;
    let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("max_psrf={max}");
    Ok(())
}
