//! CSV readers and writers for gaze logs, fixation logs, image metadata,
//! scenario lists, observer sidecars and feature channels.
//!
//! All files are UTF-8 with a header row. Lines starting with `#` are
//! comments; writers use them for provenance headers and the feature
//! channel reader understands `# channel=<name>` and `# source=<gaze|visual>`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSource, FeatureChannel};
use crate::error::{Error, Result};
use crate::types::{Fixation, GazeSample, ImageId, ImageRecord, ObserverId, Scenario};

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader)
}

struct Columns {
    index: HashMap<String, usize>,
    source: PathBuf,
}

impl Columns {
    fn new(headers: &csv::StringRecord, source: &Path) -> Self {
        Self {
            index: headers
                .iter()
                .enumerate()
                .map(|(i, h)| (h.to_ascii_lowercase(), i))
                .collect(),
            source: source.to_owned(),
        }
    }

    fn required(&self, name: &str) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| Error::Parse {
            path: self.source.clone(),
            line: 1,
            message: format!("missing column '{name}'"),
        })
    }

    fn optional(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

fn parse_err(source: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_owned(),
        line,
        message: message.into(),
    }
}

fn field<'r>(rec: &'r csv::StringRecord, col: usize, source: &Path, line: u64) -> Result<&'r str> {
    rec.get(col)
        .ok_or_else(|| parse_err(source, line, format!("missing field {}", col + 1)))
}

fn real(rec: &csv::StringRecord, col: usize, name: &str, source: &Path, line: u64) -> Result<f64> {
    let raw = field(rec, col, source, line)?;
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_err(source, line, format!("invalid {name} '{raw}'"))),
    }
}

fn flag(rec: &csv::StringRecord, col: Option<usize>, source: &Path, line: u64) -> Result<bool> {
    let Some(col) = col else { return Ok(true) };
    match field(rec, col, source, line)? {
        "1" | "" => Ok(true),
        "0" => Ok(false),
        other => Err(parse_err(source, line, format!("invalid valid flag '{other}'"))),
    }
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

struct EventRow {
    observer_id: ObserverId,
    image_id: ImageId,
    t: f64,
    x: f64,
    y: f64,
    duration: Option<f64>,
    valid: bool,
    line: u64,
}

fn read_event_rows<R: Read>(reader: R, source: &Path, need_duration: bool) -> Result<Vec<EventRow>> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = Columns::new(&headers, source);
    let c_obs = cols.required("observer_id")?;
    let c_img = cols.required("image_id")?;
    let c_t = cols.required("t_ms")?;
    let c_x = cols.required("x_px")?;
    let c_y = cols.required("y_px")?;
    let c_dur = if need_duration {
        Some(cols.required("duration_ms")?)
    } else {
        cols.optional("duration_ms")
    };
    let c_valid = cols.optional("valid");

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(source, line, e.to_string())
        })?;
        let line = record_line(&rec);
        let t = real(&rec, c_t, "t_ms", source, line)?;
        if t < 0.0 {
            return Err(parse_err(source, line, format!("negative timestamp {t}")));
        }
        let duration = match c_dur {
            Some(c) if need_duration || !field(&rec, c, source, line)?.is_empty() => {
                let d = real(&rec, c, "duration_ms", source, line)?;
                if need_duration && d <= 0.0 {
                    return Err(parse_err(source, line, format!("non-positive duration {d}")));
                }
                Some(d)
            }
            _ => None,
        };
        rows.push(EventRow {
            observer_id: ObserverId(field(&rec, c_obs, source, line)?.to_owned()),
            image_id: ImageId(field(&rec, c_img, source, line)?.to_owned()),
            t,
            x: real(&rec, c_x, "x_px", source, line)?,
            y: real(&rec, c_y, "y_px", source, line)?,
            duration,
            valid: flag(&rec, c_valid, source, line)?,
            line,
        });
    }
    Ok(rows)
}

/// Splits rows into presentations (maximal runs of one `(observer, image)`
/// pair), keeps the first presentation of each pair, checks time order and
/// returns the kept rows ordered by `(observer, image)`.
fn group_presentations(rows: Vec<EventRow>, source: &Path) -> Result<Vec<EventRow>> {
    let mut blocks: Vec<Vec<EventRow>> = Vec::new();
    for row in rows {
        match blocks.last_mut() {
            Some(b) if b[0].observer_id == row.observer_id && b[0].image_id == row.image_id => b.push(row),
            _ => blocks.push(vec![row]),
        }
    }
    let mut seen: HashSet<(ObserverId, ImageId)> = HashSet::new();
    let mut kept = Vec::new();
    let mut dropped = 0usize;
    for block in blocks {
        let key = (block[0].observer_id.clone(), block[0].image_id.clone());
        if !seen.insert(key) {
            dropped += 1;
            log::warn!(
                "{}:{}: repeated presentation of image {} to observer {} dropped",
                source.display(),
                block[0].line,
                block[0].image_id,
                block[0].observer_id
            );
            continue;
        }
        if let Some(w) = block.windows(2).find(|w| w[1].t < w[0].t) {
            return Err(Error::Validation(format!(
                "{}:{}: timestamp {} ms precedes {} ms within the trial of observer {} on image {}",
                source.display(),
                w[1].line,
                w[1].t,
                w[0].t,
                w[0].observer_id,
                w[0].image_id
            )));
        }
        kept.push(block);
    }
    if dropped > 0 {
        log::warn!("{}: {dropped} repeated presentation(s) dropped", source.display());
    }
    kept.sort_by(|a, b| (&a[0].observer_id, &a[0].image_id).cmp(&(&b[0].observer_id, &b[0].image_id)));
    Ok(kept.into_iter().flatten().collect())
}

/// Reads raw gaze samples from any reader; `source` is used in messages.
pub fn read_gaze_log<R: Read>(reader: R, source: &Path) -> Result<Vec<GazeSample>> {
    let rows = group_presentations(read_event_rows(reader, source, false)?, source)?;
    Ok(rows
        .into_iter()
        .map(|r| GazeSample {
            observer_id: r.observer_id,
            image_id: r.image_id,
            t: r.t,
            x: r.x,
            y: r.y,
            valid: r.valid,
        })
        .collect())
}

pub fn parse_gaze_log(path: impl AsRef<Path>) -> Result<Vec<GazeSample>> {
    let path = path.as_ref();
    read_gaze_log(open(path)?, path)
}

/// Reads pre-detected fixation events. Rows flagged invalid are dropped.
pub fn read_fixation_log<R: Read>(reader: R, source: &Path) -> Result<Vec<Fixation>> {
    let rows = group_presentations(read_event_rows(reader, source, true)?, source)?;
    let total = rows.len();
    let out: Vec<Fixation> = rows
        .into_iter()
        .filter(|r| r.valid)
        .map(|r| Fixation {
            observer_id: r.observer_id,
            image_id: r.image_id,
            x: r.x,
            y: r.y,
            onset: r.t,
            duration: r.duration.unwrap_or_default(),
            clamped: false,
        })
        .collect();
    if out.len() < total {
        log::warn!("{}: {} invalid fixation row(s) skipped", source.display(), total - out.len());
    }
    Ok(out)
}

pub fn parse_fixation_log(path: impl AsRef<Path>) -> Result<Vec<Fixation>> {
    let path = path.as_ref();
    read_fixation_log(open(path)?, path)
}

pub fn write_gaze_log<W: Write>(writer: W, samples: &[GazeSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["observer_id", "image_id", "t_ms", "x_px", "y_px", "valid"])?;
    for s in samples {
        w.write_record([
            s.observer_id.as_str(),
            s.image_id.as_str(),
            &s.t.to_string(),
            &s.x.to_string(),
            &s.y.to_string(),
            if s.valid { "1" } else { "0" },
        ])?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

pub fn write_fixation_log<W: Write>(writer: W, fixations: &[Fixation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["observer_id", "image_id", "t_ms", "x_px", "y_px", "duration_ms", "valid"])?;
    for f in fixations {
        w.write_record([
            f.observer_id.as_str(),
            f.image_id.as_str(),
            &f.onset.to_string(),
            &f.x.to_string(),
            &f.y.to_string(),
            &f.duration.to_string(),
            "1",
        ])?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

#[derive(Debug, Deserialize, Serialize)]
struct MetadataRow {
    image_id: String,
    sam_all: f64,
    sam_male: f64,
    sam_female: f64,
    width_px: f64,
    height_px: f64,
}

/// Reads image metadata and labels each image from its all-observer SAM mean.
pub fn read_metadata<R: Read>(reader: R, source: &Path) -> Result<Vec<ImageRecord>> {
    let mut rdr = csv_reader(reader);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let row: MetadataRow = rec
            .deserialize(None)
            .map_err(|e| parse_err(source, line, e.to_string()))?;
        if !seen.insert(row.image_id.clone()) {
            return Err(parse_err(source, line, format!("duplicate image {}", row.image_id)));
        }
        let record = ImageRecord::new(
            ImageId(row.image_id),
            row.sam_all,
            row.sam_male,
            row.sam_female,
            row.width_px,
            row.height_px,
        )
        .map_err(|e| parse_err(source, line, e.to_string()))?;
        out.push(record);
    }
    Ok(out)
}

pub fn parse_metadata(path: impl AsRef<Path>) -> Result<Vec<ImageRecord>> {
    let path = path.as_ref();
    read_metadata(open(path)?, path)
}

pub fn write_metadata<W: Write>(writer: W, images: &[ImageRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in images {
        w.serialize(MetadataRow {
            image_id: r.image_id.0.clone(),
            sam_all: r.sam_mean_all,
            sam_male: r.sam_mean_male,
            sam_female: r.sam_mean_female,
            width_px: r.width,
            height_px: r.height,
        })?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// One image id per line; blank lines and `#` comments are ignored.
pub fn read_scenario_list<R: Read>(reader: R, source: &Path) -> Result<Vec<ImageId>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        let id = line.trim();
        if id.is_empty() || id.starts_with('#') {
            continue;
        }
        if !seen.insert(id.to_owned()) {
            log::warn!("{}:{}: duplicate image {id} ignored", source.display(), i + 1);
            continue;
        }
        out.push(ImageId(id.to_owned()));
    }
    Ok(out)
}

pub fn parse_scenario_list(path: impl AsRef<Path>) -> Result<Vec<ImageId>> {
    let path = path.as_ref();
    read_scenario_list(open(path)?, path)
}

pub fn write_scenario_list<W: Write>(mut writer: W, images: &[ImageId]) -> Result<()> {
    for id in images {
        writeln!(writer, "{id}").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}

/// Marks scenario membership on image records. Listed images missing from
/// the metadata are an error.
pub fn apply_scenario(images: &mut [ImageRecord], scenario: Scenario, members: &[ImageId]) -> Result<()> {
    let set: HashSet<&ImageId> = members.iter().collect();
    let known: HashSet<&ImageId> = images.iter().map(|r| &r.image_id).collect();
    if let Some(missing) = members.iter().find(|id| !known.contains(id)) {
        return Err(Error::Validation(format!(
            "scenario {scenario} lists image {missing} absent from metadata"
        )));
    }
    for r in images.iter_mut() {
        r.scenarios.set(scenario, set.contains(&r.image_id));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn name(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct ObserverRow {
    observer_id: String,
    gender: String,
}

/// Observer sidecar: `observer_id,gender` with gender `m|f|male|female`.
pub fn read_observer_genders<R: Read>(reader: R, source: &Path) -> Result<BTreeMap<ObserverId, Gender>> {
    let mut rdr = csv_reader(reader);
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let row: ObserverRow = rec
            .deserialize(None)
            .map_err(|e| parse_err(source, line, e.to_string()))?;
        let gender = match row.gender.to_ascii_lowercase().as_str() {
            "m" | "male" => Gender::Male,
            "f" | "female" => Gender::Female,
            other => return Err(parse_err(source, line, format!("unknown gender '{other}'"))),
        };
        out.insert(ObserverId(row.observer_id), gender);
    }
    Ok(out)
}

pub fn parse_observer_genders(path: impl AsRef<Path>) -> Result<BTreeMap<ObserverId, Gender>> {
    let path = path.as_ref();
    read_observer_genders(open(path)?, path)
}

pub fn write_observer_genders<W: Write>(writer: W, genders: &BTreeMap<ObserverId, Gender>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (id, g) in genders {
        w.serialize(ObserverRow {
            observer_id: id.0.clone(),
            gender: g.name().to_owned(),
        })?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Reads a feature channel (`image_id,f0..f{D-1}`). No normalization is
/// applied. Without a `# source=` directive the channel is treated as an
/// external visual channel.
pub fn read_feature_channel<R: Read>(
    reader: R,
    source: &Path,
    expected_dim: Option<usize>,
) -> Result<FeatureChannel> {
    let mut text = String::new();
    BufReader::new(reader)
        .read_to_string(&mut text)
        .map_err(|e| Error::io(source, e))?;

    let mut name = source
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "channel".to_owned());
    let mut kind = ChannelSource::Visual;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        for token in line.trim_start_matches('#').split_whitespace() {
            if let Some(v) = token.strip_prefix("channel=") {
                name = v.to_owned();
            } else if let Some(v) = token.strip_prefix("source=") {
                kind = match v {
                    "gaze" => ChannelSource::Gaze,
                    "visual" => ChannelSource::Visual,
                    other => return Err(parse_err(source, 1, format!("unknown source '{other}'"))),
                };
            }
        }
    }

    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.get(0).map(str::to_ascii_lowercase).as_deref() != Some("image_id") {
        return Err(parse_err(source, 1, "first column must be image_id"));
    }
    let dim = headers.len() - 1;
    if dim == 0 {
        return Err(Error::Validation(format!("{}: channel has no feature columns", source.display())));
    }
    if let Some(expected) = expected_dim {
        if expected != dim {
            return Err(Error::Validation(format!(
                "{}: header declares {dim} features, expected {expected}",
                source.display()
            )));
        }
    }
    let mut channel = FeatureChannel::new(name, dim, kind);
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        if rec.len() != dim + 1 {
            return Err(Error::Validation(format!(
                "{}:{line}: row has {} features, expected {dim}",
                source.display(),
                rec.len().saturating_sub(1)
            )));
        }
        let values = (1..=dim)
            .map(|c| real(&rec, c, "feature", source, line))
            .collect::<Result<Vec<f64>>>()?;
        channel
            .insert(ImageId(rec[0].to_owned()), values)
            .map_err(|e| parse_err(source, line, e.to_string()))?;
    }
    Ok(channel)
}

pub fn load_feature_channel(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<FeatureChannel> {
    let path = path.as_ref();
    read_feature_channel(open(path)?, path, expected_dim)
}

/// Writes a channel with its name and source as comment directives, plus
/// any extra `# key=value` header lines.
pub fn write_feature_channel<W: Write>(mut writer: W, channel: &FeatureChannel, extra_header: &[String]) -> Result<()> {
    let io = |e| Error::io("<writer>", e);
    for line in extra_header {
        writeln!(writer, "# {line}").map_err(io)?;
    }
    writeln!(writer, "# channel={} source={}", channel.name, channel.source).map_err(io)?;
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["image_id".to_owned()];
    header.extend((0..channel.dimension).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for (id, values) in &channel.rows {
        let mut rec = vec![id.0.clone()];
        rec.extend(values.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}
