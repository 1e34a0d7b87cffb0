// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use routinecd::llm::LlmConfig;
use routinecd::metrics::{SubjectOutcome, cohort_aggregate};
use routinecd::model::{BehavioralSeries, DimensionConfig, load_dimension_config, load_feature_table};
use routinecd::pipeline::{
    AnalysisOptions, AnalysisResult, LlmOptions, SweepParameter, analyze, render_report_markdown, sweep_csv,
};
use routinecd::synthgen::{
    CohortTemplate, RandomScenarioConfig, ScenarioSpec, SyntheticSubject, event_scenario, generate_cohort,
    generate_subject, random_scenario,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::output::{path_component, read_json, to_json, write_atomic};
use crate::{CohortArgs, LlmArgs, RunArgs, SweepArgs, SynthArgs, SynthCohortArgs};

fn analysis_options(llm: &LlmArgs, seed: u64) -> AnalysisOptions {
    let llm = (!llm.no_llm).then(|| LlmOptions {
        config: LlmConfig {
            base_url: llm.llm_url.clone(),
            model: llm.llm_model.clone(),
            timeout: Duration::from_secs(llm.llm_timeout),
            seed: Some(seed),
            ..LlmConfig::default()
        }
        .with_env_key(),
        verbosity: llm.verbosity.into(),
    });
    AnalysisOptions {
        llm,
        ..AnalysisOptions::default()
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

/// One subject × dimension analysis to perform.
struct Job {
    subject_id: String,
    config: DimensionConfig,
    table: PathBuf,
}

/// Runs the job and writes `result.json` and `report.md` under `out/<subject>/<dimension>/`.
fn run_job(job: &Job, out: &Path, options: &AnalysisOptions, require_llm: bool) -> Result<AnalysisResult> {
    let table = load_feature_table(&job.table, &job.config)?;
    let result = analyze(&job.subject_id, &job.config, &table, options)?;
    let dir = out
        .join(path_component(&job.subject_id))
        .join(path_component(&job.config.dimension_name));
    write_atomic(&dir.join("result.json"), &result.to_json_string())?;
    write_atomic(&dir.join("report.md"), &render_report_markdown(&result))?;
    let unavailable = result.narrative_unavailable();
    eprintln!(
        "{}/{}: {} change point(s){} -> {}",
        job.subject_id,
        job.config.dimension_name,
        result.changepoints.len(),
        if unavailable { ", narrative unavailable" } else { "" },
        dir.display()
    );
    if require_llm && unavailable {
        return Err(CliError::LlmRequired(format!(
            "{}/{}",
            job.subject_id, job.config.dimension_name
        )));
    }
    Ok(result)
}

/// Runs every job on the pool; results keep job order. The first failure decides the exit code.
fn run_jobs(
    jobs: &[Job],
    out: &Path,
    options: &AnalysisOptions,
    require_llm: bool,
    workers: usize,
) -> Result<Vec<AnalysisResult>> {
    let results: Vec<Result<AnalysisResult>> =
        pool(workers)?.install(|| jobs.par_iter().map(|j| run_job(j, out, options, require_llm)).collect());
    let mut ok = Vec::with_capacity(results.len());
    let mut first_err = None;
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok(r) => ok.push(r),
            Err(e) => {
                eprintln!("{}: {e}", job.subject_id);
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(ok),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "subject".into())
}

pub fn run(args: RunArgs) -> Result<()> {
    if args.subject.is_some() && args.table.len() > 1 {
        return Err(CliError::Usage("--subject needs exactly one --table".into()));
    }
    let config = load_dimension_config(&args.config)?;
    config.validate()?;
    let jobs: Vec<Job> = args
        .table
        .iter()
        .map(|t| Job {
            subject_id: args.subject.clone().unwrap_or_else(|| stem(t)),
            config: config.clone(),
            table: t.clone(),
        })
        .collect();
    let options = analysis_options(&args.llm, args.seed);
    run_jobs(&jobs, &args.out, &options, args.llm.require_llm, args.workers).map(|_| ())
}

/// Parses `start:stop:step` into the inclusive grid it describes.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let bad = || CliError::Usage(format!("invalid range `{spec}`, expected start:stop:step"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
        return Err(bad());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let parameter: SweepParameter = args.parameter.parse()?;
    let values = match (&args.range, &args.values) {
        (Some(r), _) => parse_range(r)?,
        (None, Some(v)) => v.clone(),
        (None, None) => return Err(CliError::Usage("either --range or --values is required".into())),
    };
    if values.is_empty() {
        return Err(CliError::Usage("no sweep values".into()));
    }
    let config = load_dimension_config(&args.config)?;
    config.validate()?;
    let table = load_feature_table(&args.table, &config)?;
    let series = BehavioralSeries::build(stem(&args.table), &config, &table)?;
    let rows = routinecd::pipeline::sweep(&series, &config.params, parameter, &values)?;
    let csv = sweep_csv(parameter, &rows);
    match &args.out {
        Some(path) => write_atomic(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

/// Writes `table.csv`, `config.json`, `truth.json` and `scenario.json` into `dir`.
fn write_subject(dir: &Path, subject: &SyntheticSubject) -> Result<()> {
    write_atomic(&dir.join("table.csv"), &subject.csv())?;
    write_atomic(
        &dir.join("config.json"),
        &subject.spec.dimension_config().to_json_string(),
    )?;
    write_atomic(&dir.join("truth.json"), &to_json(&subject.truth))?;
    write_atomic(&dir.join("scenario.json"), &subject.spec.to_json_string())?;
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let seed = args.seed.unwrap_or(0);
    let mut spec = match (&args.scenario, args.event, args.random) {
        (Some(path), _, _) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            ScenarioSpec::from_json_str(&text)?
        }
        (None, Some(event), _) => event_scenario(event.into(), seed),
        (None, None, Some(k)) => random_scenario(seed, k, &RandomScenarioConfig::default()),
        (None, None, None) => {
            return Err(CliError::Usage(
                "one of --scenario, --event, --random is required".into(),
            ));
        }
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let subject = generate_subject(&spec)?;
    write_subject(&args.out, &subject)?;
    eprintln!(
        "{}: {} days, change points {:?} -> {}",
        spec.subject_id,
        subject.table.len(),
        subject.truth.change_points,
        args.out.display()
    );
    Ok(())
}

/// One analysis unit listed in a cohort manifest. Relative paths resolve against the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub cohort: String,
    pub config: PathBuf,
    pub table: PathBuf,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub subjects: Vec<ManifestEntry>,
}

fn parse_cohort(spec: &str) -> Result<(String, usize, f64)> {
    let bad = || CliError::Usage(format!("invalid cohort `{spec}`, expected name=subjects:multiplier"));
    let (name, rest) = spec.split_once('=').ok_or_else(bad)?;
    let (n, mult) = rest.split_once(':').ok_or_else(bad)?;
    let name = name.trim();
    if name.is_empty() {
        return Err(bad());
    }
    Ok((
        name.to_string(),
        n.trim().parse().map_err(|_| bad())?,
        mult.trim().parse().map_err(|_| bad())?,
    ))
}

pub fn synth_cohort(args: SynthCohortArgs) -> Result<()> {
    let template = CohortTemplate {
        total_days: args.total_days,
        ..CohortTemplate::default()
    };
    let mut manifest = Manifest::default();
    for (k, spec) in args.cohorts.iter().enumerate() {
        let (name, n, multiplier) = parse_cohort(spec)?;
        let seed = args.seed.wrapping_add(k as u64);
        for subject in generate_cohort(&template, n, multiplier, seed)? {
            let subject_id = format!("{}-{}", name, subject.spec.subject_id);
            let rel = PathBuf::from(path_component(&name)).join(path_component(&subject.spec.subject_id));
            write_subject(&args.out.join(&rel), &subject)?;
            manifest.subjects.push(ManifestEntry {
                subject_id,
                cohort: name.clone(),
                config: rel.join("config.json"),
                table: rel.join("table.csv"),
            });
        }
    }
    write_atomic(&args.out.join("manifest.json"), &to_json(&manifest))?;
    eprintln!(
        "{} subject(s) -> {}",
        manifest.subjects.len(),
        args.out.join("manifest.json").display()
    );
    Ok(())
}

pub fn cohort(args: CohortArgs) -> Result<()> {
    let manifest: Manifest = read_json(&args.manifest)?;
    if manifest.subjects.is_empty() {
        return Err(CliError::Core(routinecd::Error::EmptyCohort(format!(
            "manifest {} lists no subjects",
            args.manifest.display()
        ))));
    }
    let base = args.manifest.parent().unwrap_or(Path::new("."));
    let mut jobs = Vec::with_capacity(manifest.subjects.len());
    for entry in &manifest.subjects {
        let table = base.join(&entry.table);
        if !table.is_file() {
            return Err(CliError::io(
                &table,
                std::io::Error::new(std::io::ErrorKind::NotFound, "subject table not found"),
            ));
        }
        let config = load_dimension_config(base.join(&entry.config))?;
        config.validate()?;
        jobs.push(Job {
            subject_id: entry.subject_id.clone(),
            config,
            table,
        });
    }
    let options = analysis_options(&args.llm, args.seed);
    let results = run_jobs(&jobs, &args.out, &options, args.llm.require_llm, args.workers)?;
    let outcomes: Vec<SubjectOutcome> = manifest
        .subjects
        .iter()
        .zip(&results)
        .map(|(entry, r)| SubjectOutcome {
            subject_id: entry.subject_id.clone(),
            cohort: entry.cohort.clone(),
            dimension: r.series_meta.dimension.clone(),
            change_point_count: r.changepoints.len(),
            mass_vectors: r.mass_vectors.iter().map(|m| m.mass).collect(),
        })
        .collect();
    let summary = cohort_aggregate(&outcomes)?;
    let path = args.out.join("cohort_summary.json");
    write_atomic(&path, &to_json(&summary))?;
    for s in &summary {
        eprintln!(
            "cohort {} / {}: {} subject(s), mean change count {:.2}",
            s.cohort, s.dimension, s.n_subjects, s.change_count_mean
        );
    }
    Ok(())
}
