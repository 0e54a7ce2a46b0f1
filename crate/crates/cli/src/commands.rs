use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use gazeval_core::events::detect_fixations;
use gazeval_core::features::{fit_center_bias_trials, iovc};
use gazeval_core::ingest::{self, Gender};
use gazeval_core::learn::sweep::sweep_csv;
use gazeval_core::learn::{classeme_analysis, late_fuse, observer_sweep, run_protocol, EvalReport, CLASSEME_DIM};
use gazeval_core::stats::{grouped_summary, one_way_anova, tukey_kramer, GroupBy, GroupedSummary};
use gazeval_core::synth::{self, SyntheticScenario};
use gazeval_core::{
    build_channel, dataset_summary, ChannelSource, EmotionClass, Error, FeatureChannel, FeatureKind, ImageId,
    ImageRecord, Measure, ObserverId, Scenario, TrialSet,
};

use crate::config::RunConfig;

const SCENARIOS: [Scenario; 3] = [Scenario::S95, Scenario::S296, Scenario::S382];

/// JSON wrapper carrying provenance of a result.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    gazeval_version: &'a str,
    seed: u64,
    config_hash: String,
    scenario: Option<&'a str>,
    result: &'a T,
}

fn write_file(path: &Path, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    written.push(path.to_path_buf());
    Ok(())
}

fn write_json<T: Serialize>(
    cfg: &RunConfig,
    scenario: Option<Scenario>,
    path: &Path,
    value: &T,
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    let env = Envelope {
        gazeval_version: gazeval_core::VERSION,
        seed: cfg.seed,
        config_hash: cfg.hash(),
        scenario: scenario.map(Scenario::name),
        result: value,
    };
    let mut s = serde_json::to_string_pretty(&env)?;
    s.push('\n');
    write_file(path, &s, written)
}

fn comment_header(cfg: &RunConfig, scenario: Option<Scenario>) -> String {
    let mut h = format!("# {}", cfg.header());
    if let Some(s) = scenario {
        let _ = write!(h, " scenario={s}");
    }
    h.push('\n');
    h
}

fn load_images(cfg: &RunConfig) -> Result<Vec<ImageRecord>> {
    let path = cfg
        .metadata()
        .ok_or_else(|| Error::Validation("no metadata file configured (paths.metadata)".into()))?;
    let mut images = ingest::parse_metadata(&path)?;
    if let Some(dir) = cfg.scenarios_dir() {
        for s in SCENARIOS {
            let list = dir.join(format!("{}.txt", s.name()));
            if list.exists() {
                let members = ingest::parse_scenario_list(&list)?;
                ingest::apply_scenario(&mut images, s, &members)?;
            }
        }
    }
    Ok(images)
}

fn check_scenario(cfg: &RunConfig, scenario: Option<Scenario>) -> Result<()> {
    if let Some(s) = scenario {
        let dir = cfg
            .scenarios_dir()
            .ok_or_else(|| Error::Validation(format!("scenario {s} requested but paths.scenarios_dir is not set")))?;
        let list = dir.join(format!("{}.txt", s.name()));
        if !list.exists() {
            bail!(Error::Validation(format!("scenario list {} not found", list.display())));
        }
    }
    Ok(())
}

/// Labels of every image in the metadata, optionally restricted to a scenario.
pub fn load_labels(cfg: &RunConfig, scenario: Option<Scenario>) -> Result<BTreeMap<ImageId, EmotionClass>> {
    check_scenario(cfg, scenario)?;
    Ok(load_images(cfg)?
        .into_iter()
        .filter(|r| scenario.is_none_or(|s| r.scenarios.contains(s)))
        .map(|r| (r.image_id, r.emotion_class))
        .collect())
}

/// Loads metadata and fixations (detecting them from raw samples if only a
/// gaze log is configured) and restricts to the scenario.
pub fn load_trials(cfg: &RunConfig, scenario: Option<Scenario>) -> Result<TrialSet> {
    let mut missing = Vec::new();
    if cfg.metadata().is_none() {
        missing.push("paths.metadata");
    }
    if cfg.fixations().is_none() && cfg.gaze().is_none() {
        missing.push("paths.fixations or paths.gaze");
    }
    if !missing.is_empty() {
        bail!(Error::Validation(format!("missing inputs: {}", missing.join(", "))));
    }
    check_scenario(cfg, scenario)?;
    let images = load_images(cfg)?;
    let fixations = match (cfg.fixations(), cfg.gaze()) {
        (Some(f), _) => ingest::parse_fixation_log(&f)?,
        (None, Some(g)) => {
            let samples = ingest::parse_gaze_log(&g)?;
            detect_fixations(&samples, &cfg.events)?
        }
        (None, None) => unreachable!("checked above"),
    };
    if fixations.is_empty() {
        bail!(Error::InsufficientData("the dataset contains no fixations".into()));
    }
    let trials = TrialSet::new(images, fixations)?;
    Ok(match scenario {
        Some(s) => trials.restrict_to_scenario(s),
        None => trials,
    })
}

fn load_genders(cfg: &RunConfig) -> Result<Option<BTreeMap<ObserverId, Gender>>> {
    cfg.observers()
        .map(|p| ingest::parse_observer_genders(&p).map_err(Into::into))
        .transpose()
}

/// Builds and writes one channel file per feature kind.
pub fn cmd_features(cfg: &RunConfig, kinds: &[FeatureKind], scenario: Option<Scenario>) -> Result<Vec<PathBuf>> {
    let trials = load_trials(cfg, scenario)?;
    let dir = cfg.output_dir().join("features");
    let mut written = Vec::new();
    let header = vec![comment_header(cfg, scenario).trim_start_matches("# ").trim_end().to_owned()];
    for &kind in kinds {
        let build = build_channel(&trials, kind, &cfg.features)?;
        if build.channel.is_empty() {
            bail!(Error::InsufficientData(format!("channel {kind}: no image has data")));
        }
        let mut buf = Vec::new();
        ingest::write_feature_channel(&mut buf, &build.channel, &header)?;
        let text = String::from_utf8(buf).context("channel file is not UTF-8")?;
        write_file(&dir.join(format!("{}.csv", kind.name())), &text, &mut written)?;
        log::info!("{kind}: {} images, {} without data", build.channel.len(), build.missing.len());
    }
    Ok(written)
}

#[derive(Debug, Clone, Default)]
pub struct EvalArgs {
    /// Feature kind names (built from the trials) or channel file paths.
    pub channels: Vec<String>,
    /// Channel files treated as visual features.
    pub visual: Vec<PathBuf>,
    pub scenario: Option<Scenario>,
    pub fuse: bool,
    pub sweep_observers: Option<Vec<usize>>,
    pub subsets_per_n: usize,
    pub classemes: Option<PathBuf>,
}

fn channel_path(cfg: &RunConfig, spec: &str) -> Result<PathBuf> {
    let p = PathBuf::from(spec);
    if p.exists() {
        return Ok(p);
    }
    if let Some(dir) = cfg.channels_dir() {
        let q = dir.join(spec);
        if q.exists() {
            return Ok(q);
        }
    }
    bail!(Error::Validation(format!(
        "'{spec}' is neither a feature kind nor an existing channel file"
    )))
}

fn resolve_channels(
    cfg: &RunConfig,
    args: &EvalArgs,
    trials: &mut Option<TrialSet>,
) -> Result<Vec<FeatureChannel>> {
    let mut out = Vec::new();
    for spec in &args.channels {
        if let Ok(kind) = spec.parse::<FeatureKind>() {
            if trials.is_none() {
                *trials = Some(load_trials(cfg, args.scenario)?);
            }
            let t = trials.as_ref().expect("loaded");
            out.push(build_channel(t, kind, &cfg.features)?.channel);
        } else {
            out.push(ingest::load_feature_channel(channel_path(cfg, spec)?, None)?);
        }
    }
    for p in &args.visual {
        let mut ch = ingest::load_feature_channel(channel_path(cfg, &p.to_string_lossy())?, None)?;
        ch.source = ChannelSource::Visual;
        out.push(ch);
    }
    Ok(out)
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

fn write_report(
    cfg: &RunConfig,
    scenario: Option<Scenario>,
    dir: &Path,
    stem: &str,
    report: &EvalReport,
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    write_json(cfg, scenario, &dir.join(format!("{stem}.json")), report, written)?;
    let text = format!("{}{}", comment_header(cfg, scenario), report.to_text());
    write_file(&dir.join(format!("{stem}.txt")), &text, written)?;
    let preds = format!("{}{}", comment_header(cfg, scenario), report.predictions_csv());
    write_file(&dir.join(format!("{stem}.predictions.csv")), &preds, written)
}

/// Runs the evaluation protocol and writes JSON, text and prediction files.
pub fn cmd_eval(cfg: &RunConfig, args: &EvalArgs) -> Result<Vec<PathBuf>> {
    if args.channels.is_empty() && args.visual.is_empty() && args.sweep_observers.is_none() && args.classemes.is_none() {
        bail!(Error::Validation("nothing to evaluate: give --channel, --visual, --sweep-observers or --classemes".into()));
    }
    let labels = load_labels(cfg, args.scenario)?;
    let protocol = cfg.cv_protocol();
    let dir = cfg.output_dir().join("eval");
    let mut written = Vec::new();
    let mut trials = None;

    let channels: Vec<FeatureChannel> = resolve_channels(cfg, args, &mut trials)?
        .into_iter()
        .map(|c| c.subset(labels.keys()))
        .collect();
    if args.fuse {
        if channels.len() < 2 {
            bail!(Error::Validation("--fuse needs at least two channels".into()));
        }
        let refs: Vec<&FeatureChannel> = channels.iter().collect();
        let report = late_fuse(&refs, &labels, &protocol)?;
        let stem = format!("fusion_{}", file_stem(&report.channels.join("+")));
        write_report(cfg, args.scenario, &dir, &stem, &report, &mut written)?;
    } else {
        for ch in &channels {
            let report = run_protocol(ch, &labels, &protocol)?;
            write_report(cfg, args.scenario, &dir, &file_stem(&ch.name), &report, &mut written)?;
        }
    }

    if let Some(ns) = &args.sweep_observers {
        if trials.is_none() {
            trials = Some(load_trials(cfg, args.scenario)?);
        }
        let t = trials.as_ref().expect("loaded");
        let points = observer_sweep(t, &protocol, &cfg.features, ns, args.subsets_per_n.max(1))?;
        write_json(cfg, args.scenario, &dir.join("observer_sweep.json"), &points, &mut written)?;
        let csv = format!("{}{}", comment_header(cfg, args.scenario), sweep_csv(&points));
        write_file(&dir.join("observer_sweep.csv"), &csv, &mut written)?;
    }

    if let Some(p) = &args.classemes {
        let ch = ingest::load_feature_channel(channel_path(cfg, &p.to_string_lossy())?, Some(CLASSEME_DIM))?
            .subset(labels.keys());
        let (report, table) = classeme_analysis(&ch, &labels, &protocol)?;
        write_report(cfg, args.scenario, &dir, "classemes", &report, &mut written)?;
        let csv = format!("{}{}", comment_header(cfg, args.scenario), table.to_csv());
        write_file(&dir.join("classeme_cooccurrence.csv"), &csv, &mut written)?;
        log::info!("classemes: {} distinct argmax visual classes", table.distinct_classes());
    }
    Ok(written)
}

fn summary_rows(s: &GroupedSummary, out: &mut String) {
    for g in &s.groups {
        let b = g.box_plot.as_ref();
        let f = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.measure.name(),
            g.label,
            g.n,
            g.mean,
            g.std,
            g.n_events,
            f(b.map(|b| b.min)),
            f(b.map(|b| b.q1)),
            f(b.map(|b| b.median)),
            f(b.map(|b| b.q3)),
            f(b.map(|b| b.max)),
            f(b.map(|b| b.lower_fence)),
            f(b.map(|b| b.upper_fence)),
            g.values.len()
        );
    }
}

/// Descriptive statistics: dataset counts, grouped summaries with box-plot
/// quartiles, ANOVA and Tukey-Kramer tables, center bias and IOVC.
pub fn cmd_stats(cfg: &RunConfig, scenario: Option<Scenario>) -> Result<Vec<PathBuf>> {
    let trials = load_trials(cfg, scenario)?;
    let genders = load_genders(cfg)?;
    let dir = cfg.output_dir().join("stats");
    let head = comment_header(cfg, scenario);
    let mut written = Vec::new();

    let ds = dataset_summary(&trials);
    let mut s = format!("{head}class,images,fixations\n");
    for c in EmotionClass::ALL {
        let _ = writeln!(s, "{c},{},{}", ds.images_per_class[c.index()], ds.fixations_in(c));
    }
    let _ = writeln!(s, "total,{},{}", ds.images_per_class.iter().sum::<usize>(), ds.total_fixations);
    write_file(&dir.join("dataset_summary.csv"), &s, &mut written)?;

    let mut groupings = vec![GroupBy::EmotionClass];
    if genders.is_some() {
        groupings.push(GroupBy::Gender);
    }
    let measures = [Measure::FixDuration, Measure::SacLength, Measure::SacSlope];
    for g in groupings {
        let tag = match g {
            GroupBy::EmotionClass => "class",
            GroupBy::Gender => "gender",
        };
        let mut summary = format!(
            "{head}measure,group,n,mean,std,n_events,min,q1,median,q3,max,lower_fence,upper_fence,n_values\n"
        );
        let mut anova = format!("{head}measure,df_between,df_within,f,p\n");
        let mut tukey = format!("{head}measure,group_a,group_b,mean_diff,q,q_critical,min_significant_diff,significant\n");
        for m in measures {
            let gs = grouped_summary(&trials, g, m, genders.as_ref())?;
            summary_rows(&gs, &mut summary);
            let groups = gs.group_values();
            let a = one_way_anova(&groups).with_context(|| format!("ANOVA of {} by {tag}", m.name()))?;
            let _ = writeln!(anova, "{},{},{},{},{}", m.name(), a.df_between, a.df_within, a.f, a.p);
            let t = tukey_kramer(&groups)?;
            for p in &t.pairs {
                let _ = writeln!(
                    tukey,
                    "{},{},{},{},{},{},{},{}",
                    m.name(),
                    gs.groups[p.group_a].label,
                    gs.groups[p.group_b].label,
                    p.mean_diff,
                    p.q,
                    t.q_critical,
                    p.min_significant_diff,
                    p.significant
                );
            }
        }
        write_file(&dir.join(format!("summary_by_{tag}.csv")), &summary, &mut written)?;
        write_file(&dir.join(format!("anova_by_{tag}.csv")), &anova, &mut written)?;
        write_file(&dir.join(format!("tukey_by_{tag}.csv")), &tukey, &mut written)?;
    }

    let cb = fit_center_bias_trials(&trials)?;
    let s = format!(
        "{head}mu_x,mu_y,sigma_x,sigma_y,n,degenerate\n{},{},{},{},{},{}\n",
        cb.mu[0], cb.mu[1], cb.sigma[0], cb.sigma[1], cb.n, cb.degenerate
    );
    write_file(&dir.join("center_bias.csv"), &s, &mut written)?;

    let mut s = format!("{head}image_id,mean_auc,std_auc,observers\n");
    let mut means = Vec::new();
    for (id, rec) in trials.images() {
        let per: Vec<Vec<(f64, f64)>> = trials
            .fixations_by_observer(id)
            .into_values()
            .map(|f| f.iter().map(|x| (x.x, x.y)).collect())
            .collect();
        match iovc(id, &per, rec.width, rec.height, cfg.features.kernel_sigma(rec)) {
            Ok(score) => {
                let _ = writeln!(s, "{id},{},{},{}", score.mean_auc, score.std_auc, score.per_observer.len());
                means.push(score.mean_auc);
            }
            Err(Error::InsufficientData(msg)) => log::debug!("IOVC skipped for {id}: {msg}"),
            Err(e) => return Err(e.into()),
        }
    }
    write_file(&dir.join("iovc.csv"), &s, &mut written)?;
    if !means.is_empty() {
        let n = means.len() as f64;
        let mean = means.iter().sum::<f64>() / n;
        let sd = (means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        log::info!("mean IOVC over {} images: {:.2}% +/- {:.2}", means.len(), 100.0 * mean, 100.0 * sd);
    }
    Ok(written)
}

/// Generates a synthetic dataset plus a `config.toml` that points at it.
pub fn cmd_synth(scenario_file: Option<&Path>, out_dir: &Path, seed: Option<u64>) -> Result<Vec<PathBuf>> {
    let mut scenario = match scenario_file {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            toml::from_str::<SyntheticScenario>(&text).with_context(|| format!("parsing scenario {}", p.display()))?
        }
        None => SyntheticScenario::default(),
    };
    if let Some(s) = seed {
        scenario.seed = s;
    }
    let data = synth::generate(&scenario)?;
    synth::write_dataset(out_dir, &data)?;
    let mut cfg = RunConfig {
        seed: scenario.seed,
        ..Default::default()
    };
    cfg.paths.fixations = Some(synth::files::FIXATIONS.into());
    cfg.paths.metadata = Some(synth::files::METADATA.into());
    cfg.paths.observers = Some(synth::files::OBSERVERS.into());
    cfg.paths.scenarios_dir = Some(synth::files::SCENARIOS_DIR.into());
    cfg.paths.output_dir = Some("out".into());
    let mut written: Vec<PathBuf> = [
        synth::files::FIXATIONS,
        synth::files::METADATA,
        synth::files::OBSERVERS,
        synth::files::LEDGER,
    ]
    .iter()
    .map(|f| out_dir.join(f))
    .collect();
    for s in SCENARIOS {
        written.push(out_dir.join(synth::files::SCENARIOS_DIR).join(format!("{}.txt", s.name())));
    }
    write_file(&out_dir.join("config.toml"), &cfg.to_toml()?, &mut written)?;
    write_file(&out_dir.join("scenario.toml"), &toml::to_string(&scenario)?, &mut written)?;
    Ok(written)
}

/// Parses every configured input and describes what was found.
pub fn cmd_ingest_validate(cfg: &RunConfig) -> Result<String> {
    let mut out = String::new();
    let trials = load_trials(cfg, None)?;
    let ds = dataset_summary(&trials);
    let _ = writeln!(out, "images: {}", trials.images().len());
    for c in EmotionClass::ALL {
        let _ = writeln!(
            out,
            "  {c}: {} images, {} fixations",
            ds.images_per_class[c.index()],
            ds.fixations_in(c)
        );
    }
    let _ = writeln!(out, "observers: {}", ds.observer_count);
    let _ = writeln!(out, "fixations: {}", ds.total_fixations);
    let _ = writeln!(out, "saccades: {}", trials.saccades().len());
    let clamped = trials.fixations().iter().filter(|f| f.clamped).count();
    if clamped > 0 {
        let _ = writeln!(out, "fixations clamped to image bounds: {clamped}");
    }
    for s in SCENARIOS {
        let n = trials.images().values().filter(|r| r.scenarios.contains(s)).count();
        let _ = writeln!(out, "scenario {s}: {n} images");
    }
    if let Some(g) = load_genders(cfg)? {
        let known = trials.observers().iter().filter(|o| g.contains_key(*o)).count();
        let _ = writeln!(out, "observers with gender metadata: {known}/{}", ds.observer_count);
    }
    if let Some(dir) = cfg.channels_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        entries.sort();
        for p in entries {
            let ch = ingest::load_feature_channel(&p, None)?;
            let unknown = ch.rows.keys().filter(|id| trials.image(id).is_none()).count();
            if unknown > 0 {
                bail!(Error::Validation(format!(
                    "{}: {unknown} image(s) not in the metadata",
                    p.display()
                )));
            }
            let _ = writeln!(out, "channel {} ({}): {} images, dim {}", ch.name, ch.source, ch.len(), ch.dimension);
        }
    }
    Ok(out)
}
