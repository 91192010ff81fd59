//! Command implementations behind the `tmest` binary.
//!
//! Every command that writes files also writes a manifest next to its
//! primary output. `tmest rerun <manifest>` replays the recorded config and
//! fails unless each output hashes to its recorded value.

pub mod args;
pub mod manifest;

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use tmest::backend::{BackendKind, PRNG_NAME};
use tmest::characterize::{correlator_report, measure_all_single_qubit_t, measure_full_t, t_prod, Family};
use tmest::correct::{compare_matrices, correct_constrained, correct_direct_inverse};
use tmest::error::ErrorKind;
use tmest::estimate::{
    assemble_t_mean, assemble_t_pair, circuit_budget, estimate_t, mean_field_preparations, pair_preparations,
    select_k,
};
use tmest::geometry::all_neighborhoods;
use tmest::norm::single_qubit_spam_error;
use tmest::{presets, Backend, BitString, Counts, Dataset, NoiseModel, NoiseModelSpec, ProbDist, RegisterGeometry, Session, TransitionMatrix};

pub use args::{Cli, Command};
pub use manifest::Manifest;

use args::*;
use manifest::{default_manifest_path, sha256_file, Recorder, SeedInfo};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] tmest::Error),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: {source}")]
    File {
        path: String,
        source: Box<CliError>,
    },
    #[error("rerun does not reproduce {path}: recorded {recorded}, got {actual}")]
    Mismatch {
        path: String,
        recorded: String,
        actual: String,
    },
}

impl CliError {
    /// 2 validation, 3 missing replay data, 4 numerical failure, 1 other.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e.kind() {
                ErrorKind::Validation => 2,
                ErrorKind::MissingData => 3,
                ErrorKind::Numerical => 4,
                ErrorKind::Io => 1,
            },
            CliError::Usage(_) => 2,
            CliError::File { source, .. } => source.exit_code(),
            CliError::Io(_) | CliError::Mismatch { .. } => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Name the file behind an input failure.
fn reading<T>(path: &Path, f: impl FnOnce() -> CliResult<T>) -> CliResult<T> {
    f().map_err(|e| CliError::File {
        path: path.display().to_string(),
        source: Box::new(e),
    })
}

/// Parse `args` (including the program name) and run.
pub fn run_args<I, T>(args: I, stdout: &mut dyn Write) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
    run(cli.command, stdout)
}

pub fn run(command: Command, stdout: &mut dyn Write) -> CliResult<()> {
    let mut rec = Recorder::default();
    let manifest_target = match &command {
        Command::GenModel(a) => Some(gen_model(a, &mut rec, stdout).map(|()| &a.out)),
        Command::CalibrateFull(a) => Some(calibrate_full(a, &mut rec, stdout).map(|()| &a.out)),
        Command::Estimate(a) => Some(estimate(a, &mut rec, stdout).map(|()| &a.out)),
        Command::Correlators(a) => Some(correlators(a, &mut rec, stdout).map(|()| &a.out)),
        Command::Tprod(a) => Some(tprod(a, &mut rec, stdout).map(|()| &a.out)),
        Command::Compare(a) => Some(compare(a, &mut rec, stdout).map(|()| &a.out)),
        Command::Correct(a) => Some(correct(a, &mut rec, stdout).map(|()| &a.out)),
        Command::ExportDataset(a) => Some(export_dataset(a, &mut rec, stdout).map(|()| &a.out)),
        Command::Budget(a) => {
            let (s1, s2) = circuit_budget(a.n, a.k);
            writeln!(stdout, "{s1}, {s2}")?;
            None
        }
        Command::Rerun(a) => {
            rerun(&a.manifest, stdout)?;
            None
        }
    };
    if let Some(out) = manifest_target {
        let out = out?;
        let path = out.manifest.clone().unwrap_or_else(|| default_manifest_path(&out.out));
        rec.finish(command.clone(), &path)?;
    }
    Ok(())
}

fn rerun(path: &Path, stdout: &mut dyn Write) -> CliResult<()> {
    let recorded = Manifest::read(path)?;
    if matches!(recorded.config, Command::Rerun(_) | Command::Budget(_)) {
        return Err(CliError::Usage("manifest does not describe a file-producing run".into()));
    }
    run(recorded.config.clone(), &mut std::io::sink())?;
    for (out, hash) in &recorded.outputs {
        let actual = sha256_file(Path::new(out))?;
        if &actual != hash {
            return Err(CliError::Mismatch {
                path: out.clone(),
                recorded: hash.clone(),
                actual,
            });
        }
    }
    writeln!(stdout, "reproduced {} output(s) from {}", recorded.outputs.len(), path.display())?;
    Ok(())
}

fn load_model(a: &ModelArgs, rec: &mut Recorder) -> CliResult<Option<NoiseModel>> {
    if let Some(path) = &a.model {
        return reading(path, || {
            rec.input(path)?;
            Ok(Some(NoiseModel::from_json_str(&std::fs::read_to_string(path)?)?))
        });
    }
    match &a.preset {
        Some(name) => Ok(Some(presets::by_name(name, a.n, a.eps)?)),
        None => Ok(None),
    }
}

fn parse_geometry(s: &str, n: usize) -> CliResult<RegisterGeometry> {
    if s == "chain" {
        return Ok(RegisterGeometry::chain(n)?);
    }
    let dims = s
        .strip_prefix("grid:")
        .and_then(|d| d.split_once('x'))
        .and_then(|(r, c)| Some((r.parse::<usize>().ok()?, c.parse::<usize>().ok()?)));
    match dims {
        Some((r, c)) => Ok(RegisterGeometry::grid(r, c)?),
        None => Err(CliError::Usage(format!("geometry {s:?}: expected \"chain\" or \"grid:RxC\""))),
    }
}

fn open_backend(a: &BackendArgs, rec: &mut Recorder) -> CliResult<(Backend, RegisterGeometry)> {
    let model = load_model(&a.model, rec)?;
    let need_model = || CliError::Usage("exact and sampled backends need --model or --preset".into());
    let backend = match a.kind {
        BackendChoice::Exact => Backend::exact(model.clone().ok_or_else(need_model)?).with_seed(a.seed),
        BackendChoice::Sampled => Backend::sampled(model.clone().ok_or_else(need_model)?, a.shots, a.seed)?,
        BackendChoice::Replay => {
            let path = a
                .dataset
                .as_ref()
                .ok_or_else(|| CliError::Usage("replay backend needs --dataset".into()))?;
            reading(path, || {
                rec.input(path)?;
                Ok(Backend::ingest(path)?)
            })?
        }
    };
    if !matches!(backend.kind(), BackendKind::Replay(_)) {
        rec.seeds = Some(SeedInfo {
            seed: a.seed,
            prng: PRNG_NAME.to_string(),
        });
    }
    let geometry = match (&a.geometry, &model) {
        (Some(g), _) => parse_geometry(g, backend.n())?,
        (None, Some(m)) => m.geometry().clone(),
        (None, None) => RegisterGeometry::chain(backend.n())?,
    };
    if geometry.n() != backend.n() {
        return Err(CliError::Usage(format!(
            "geometry has {} qubits, backend has {}",
            geometry.n(),
            backend.n()
        )));
    }
    rec.report("backend", backend.descriptor());
    Ok((backend, geometry))
}

fn write_matrix(t: &TransitionMatrix, path: &Path, rec: &mut Recorder) -> CliResult<()> {
    t.write_json(path)?;
    rec.output(path)
}

fn write_matrix_csv(t: &TransitionMatrix, path: &Path, rec: &mut Recorder) -> CliResult<()> {
    t.write_csv(std::fs::File::create(path)?)?;
    rec.output(path)
}

fn gen_model(a: &GenModelArgs, rec: &mut Recorder, stdout: &mut dyn Write) -> CliResult<()> {
    let model = match &a.spec {
        Some(path) => reading(path, || {
            rec.input(path)?;
            let spec: NoiseModelSpec =
                serde_json::from_str(&std::fs::read_to_string(path)?).map_err(tmest::Error::from)?;
            Ok(NoiseModel::from_spec(spec)?)
        })?,
        None => load_model(&a.model, rec)?
            .ok_or_else(|| CliError::Usage("gen-model needs --preset, --model or --spec".into()))?,
    };
    std::fs::write(&a.out.out, model.to_json_string()? + "\n")?;
    rec.output(&a.out.out)?;
    rec.report("n", model.n());
    writeln!(stdout, "validated {}-qubit model written to {}", model.n(), a.out.out.display())?;
    Ok(())
}

fn calibrate_full(a: &CalibrateArgs, rec: &mut Recorder, stdout: &mut dyn Write) -> CliResult<()> {
    let (mut backend, _) = open_backend(&a.backend, rec)?;
    let mut session = Session::new(&mut backend);
    let t = measure_full_t(&mut session, a.backend.oracle_limit)?;
    let circuits = session.circuits_used();
    write_matrix(&t, &a.out.out, rec)?;
    if let Some(csv) = &a.csv {
        write_matrix_csv(&t, csv, rec)?;
    }
    rec.report("circuits_used", circuits);
    writeln!(stdout, "measured {circuits} columns")?;
    Ok(())
}

fn estimate(a: &EstimateArgs, rec: &mut Recorder, stdout: &mut dyn Write) -> CliResult<()> {
    let (mut backend, geometry) = open_backend(&a.backend, rec)?;
    let mut session = Session::new(&mut backend);
    let k = if a.k == "auto" {
        select_k(&mut session, &geometry, a.auto_threshold)?
    } else {
        a.k.parse()
            .map_err(|_| CliError::Usage(format!("--k {:?}: expected a size or \"auto\"", a.k)))?
    };
    let est = estimate_t(&mut session, &geometry, k)?;
    let issued = session.circuits_used();
    let t = if a.clip { est.t_est.clipped() } else { est.t_est.clone() };
    write_matrix(&t, &a.out.out, rec)?;
    if let Some(csv) = &a.csv {
        write_matrix_csv(&t, csv, rec)?;
    }
    if let Some(path) = &a.tables {
        est.tables.write_json(path)?;
        rec.output(path)?;
    }
    if let Some(path) = &a.t_mean {
        write_matrix(&assemble_t_mean(&est.tables)?, path, rec)?;
    }
    if let Some(path) = &a.t_pair {
        write_matrix(&assemble_t_pair(&est.tables)?, path, rec)?;
    }
    let b = &est.budget;
    rec.report("k", k);
    rec.report("budget", b);
    rec.report("circuits_issued", issued);
    rec.report("clipped", a.clip);
    writeln!(stdout, "k = {k}, bounds {} + {}", b.step1_bound, b.step2_bound)?;
    writeln!(
        stdout,
        "distinct preparations: step 1 {}, step 2 {}, both {}",
        b.step1_circuits, b.step2_circuits, b.circuits_used
    )?;
    Ok(())
}

fn correlators(a: &CorrelatorArgs, rec: &mut Recorder, stdout: &mut dyn Write) -> CliResult<()> {
    let (mut backend, _) = open_backend(&a.backend, rec)?;
    let n = backend.n();
    let states = if a.c_states.is_empty() {
        vec![BitString::zeros(n)]
    } else {
        a.c_states.iter().map(|s| BitString::parse(s)).collect::<tmest::Result<Vec<_>>>()?
    };
    let mut session = Session::new(&mut backend);
    let report = correlator_report(&mut session, &states)?;
    std::fs::write(&a.out.out, serde_json::to_string_pretty(&report).map_err(tmest::Error::from)? + "\n")?;
    rec.output(&a.out.out)?;
    if let Some(path) = &a.a_csv {
        report.write_a_csv(std::fs::File::create(path)?)?;
        rec.output(path)?;
    }
    rec.report("circuits_used", report.circuits_used);
    if let Some((i, j, v)) = report.max_a() {
        writeln!(stdout, "max |A|: A[{i}][{j}] = {v:.3e}")?;
    }
    if let Some(e) = report.max_b() {
        writeln!(stdout, "max |B|: B[{}][{}][{}] = {:.3e}", e.i, e.j, e.l, e.value)?;
    }
    if let Some(e) = report.max_c() {
        writeln!(stdout, "max |C|: C[{}][{}]({}) = {:.3e}", e.i, e.j, e.xprime, e.value)?;
    }
    Ok(())
}

fn tprod(a: &TprodArgs, rec: &mut Recorder, stdout: &mut dyn Write) -> CliResult<()> {
    let family: Family = a.family.parse()?;
    let (mut backend, geometry) = open_backend(&a.backend, rec)?;
    let mut session = Session::new(&mut backend);
    let singles = measure_all_single_qubit_t(&mut session, &geometry, family)?;
    let t = t_prod(&singles)?;
    write_matrix(&t, &a.out.out, rec)?;
    if let Some(csv) = &a.csv {
        write_matrix_csv(&t, csv, rec)?;
    }
    let eps = singles
        .iter()
        .map(|s| single_qubit_spam_error(&s.matrix))
        .collect::<tmest::Result<Vec<_>>>()?;
    rec.report("family", family.to_string());
    rec.report("epsilon", &eps);
    rec.report("circuits_used", session.circuits_used());
    for (q, e) in eps.iter().enumerate() {
        writeln!(stdout, "qubit {q}: epsilon {:.1}%", e * 100.0)?;
    }
    Ok(())
}

fn read_matrix(path: &Path, rec: &mut Recorder) -> CliResult<TransitionMatrix> {
    reading(path, || {
        rec.input(path)?;
        Ok(TransitionMatrix::read_json(path)?)
    })
}

fn compare(a: &CompareArgs, rec: &mut Recorder, stdout: &mut dyn Write) -> CliResult<()> {
    let mut candidates = Vec::new();
    for c in &a.candidates {
        let (name, path) = c
            .rsplit_once('=')
            .ok_or_else(|| CliError::Usage(format!("--candidate {c:?}: expected NAME=PATH")))?;
        candidates.push((name.to_string(), read_matrix(Path::new(path), rec)?));
    }
    let reference = if a.reference == "identity" {
        TransitionMatrix::identity(candidates[0].1.n())
    } else {
        read_matrix(Path::new(&a.reference), rec)?
    };
    let report = compare_matrices(&candidates, &a.reference_name, &reference)?;
    std::fs::write(&a.out.out, report.to_csv()?)?;
    rec.output(&a.out.out)?;
    let text = report.to_text(&a.norm.norms());
    if let Some(path) = &a.text {
        std::fs::write(path, &text)?;
        rec.output(path)?;
    }
    write!(stdout, "{text}")?;
    Ok(())
}

fn read_raw(path: &Path, rec: &mut Recorder) -> CliResult<(ProbDist, Option<u64>)> {
    reading(path, || read_raw_inner(path, rec))
}

fn read_raw_inner(path: &Path, rec: &mut Recorder) -> CliResult<(ProbDist, Option<u64>)> {
    rec.input(path)?;
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(tmest::Error::from)?;
    if value.get("counts").is_some() {
        let counts: Counts = serde_json::from_value(value).map_err(tmest::Error::from)?;
        // reuse dataset validation for the histogram checks
        let n = counts.prepared.n();
        Dataset::new(n, vec![counts.clone()])?;
        Ok((ProbDist::from_counts(&counts), Some(counts.shots)))
    } else {
        Ok((ProbDist::from_json(serde_json::from_value(value).map_err(tmest::Error::from)?)?, None))
    }
}

fn correct(a: &CorrectArgs, rec: &mut Recorder, stdout: &mut dyn Write) -> CliResult<()> {
    let t = read_matrix(&a.matrix, rec)?;
    let (raw, shots) = read_raw(&a.input, rec)?;
    let result = match a.method {
        MethodChoice::Constrained => correct_constrained(&t, &raw, a.tol)?,
        MethodChoice::DirectInverse => correct_direct_inverse(&t, &raw)?,
    };
    result.to_dist(raw.n())?.write_json(&a.out.out)?;
    rec.output(&a.out.out)?;
    rec.report("method", result.method);
    rec.report("residual", result.residual);
    rec.report("iterations", result.iterations);
    rec.report("negative_mass_removed", result.negative_mass_removed);
    if let Some(s) = shots {
        rec.report("shots", s);
    }
    writeln!(
        stdout,
        "residual {:.3e} after {} iteration(s), negative mass {:.3e}",
        result.residual, result.iterations, result.negative_mass_removed
    )?;
    Ok(())
}

fn export_dataset(a: &ExportArgs, rec: &mut Recorder, stdout: &mut dyn Write) -> CliResult<()> {
    let (mut backend, geometry) = open_backend(&a.backend, rec)?;
    let n = backend.n();
    let states: BTreeSet<BitString> = match a.states {
        StateSet::Full => {
            if n > a.backend.oracle_limit {
                return Err(tmest::Error::OracleLimit {
                    n,
                    limit: a.backend.oracle_limit,
                }
                .into());
            }
            BitString::all(n).collect()
        }
        StateSet::Estimate => {
            let k = a.k.expect("clap requires --k with --states estimate");
            let nbs = all_neighborhoods(&geometry, k)?;
            let mut s = mean_field_preparations(&nbs, n);
            s.extend(pair_preparations(&nbs, n));
            s
        }
    };
    let records = states
        .iter()
        .map(|&x| backend.sample_counts(x, a.backend.shots))
        .collect::<tmest::Result<Vec<_>>>()?;
    let dataset = Dataset::new(n, records)?;
    dataset.write(&a.out.out)?;
    rec.output(&a.out.out)?;
    rec.report("records", states.len());
    writeln!(stdout, "exported {} records", states.len())?;
    Ok(())
}
