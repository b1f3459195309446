//! Count-rate tables in CSV.
//!
//! The header must name every column with its unit:
//!
//! ```text
//! bias_current_uA, power_W | power_mW | power_uW | power_nW | power_pW | mean_photons,
//! clicks | count_rate_Hz, trials | integration_time_s
//! ```
//!
//! `trials` may be replaced by `integration_time_s` (or the corresponding
//! option), in which case `trials = repetition_rate * integration_time`.
//! Rows repeating a `(bias current, intensity)` pair are merged by summing
//! clicks and trials. Lines starting with `#` are comments.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{EpdcError, Result};
use crate::estimation::{ClickStatistics, WeightScheme};
use crate::io::optics::{power_to_mean_photons, OpticalConfig};
use crate::sweep_analysis::{BiasCurrent, SweepData};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestOptions {
    pub optics: OpticalConfig,
    pub weights: WeightScheme,
    /// Integration time per row when the file has no `integration_time_s` column.
    pub integration_time_s: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
enum Intensity {
    /// Power column, with the factor converting it to watts.
    Power(usize, f64),
    MeanPhotons(usize),
}

#[derive(Debug, Clone, Copy)]
enum Counts {
    Clicks(usize),
    Rate(usize),
}

#[derive(Debug, Clone, Copy)]
enum Exposure {
    Trials(usize),
    Time(usize),
    FixedTime(f64),
}

struct Layout {
    bias: usize,
    intensity: Intensity,
    counts: Counts,
    exposure: Exposure,
}

fn power_scale(name: &str) -> Option<f64> {
    match name {
        "power_W" => Some(1.0),
        "power_mW" => Some(1e-3),
        "power_uW" => Some(1e-6),
        "power_nW" => Some(1e-9),
        "power_pW" => Some(1e-12),
        _ => None,
    }
}

fn names<'a>(names: impl Iterator<Item = &'a str>) -> String {
    names.collect::<Vec<_>>().join(", ")
}

fn parse_layout(headers: &csv::StringRecord, options: &IngestOptions) -> Result<Layout> {
    if headers.iter().any(|h| h.parse::<f64>().is_ok()) {
        return Err(EpdcError::Unit("first line is data, not a header declaring column units".into()));
    }
    let mut bias = None;
    let mut intensity: Vec<(String, Intensity)> = Vec::new();
    let mut counts: Vec<(String, Counts)> = Vec::new();
    let mut exposure: Vec<(String, Exposure)> = Vec::new();
    for (i, name) in headers.iter().enumerate() {
        match name {
            "bias_current_uA" => bias = Some(i),
            "mean_photons" => intensity.push((name.into(), Intensity::MeanPhotons(i))),
            "clicks" => counts.push((name.into(), Counts::Clicks(i))),
            "count_rate_Hz" => counts.push((name.into(), Counts::Rate(i))),
            "trials" => exposure.push((name.into(), Exposure::Trials(i))),
            "integration_time_s" => exposure.push((name.into(), Exposure::Time(i))),
            other => match power_scale(other) {
                Some(scale) => intensity.push((other.into(), Intensity::Power(i, scale))),
                None => return Err(EpdcError::Unit(format!("unrecognized column '{other}'; columns must carry a known unit"))),
            },
        }
    }
    let bias = bias.ok_or_else(|| EpdcError::Unit("missing column 'bias_current_uA'".into()))?;
    let intensity = match intensity.as_slice() {
        [(_, i)] => *i,
        [] => return Err(EpdcError::Unit("need one of power_W/mW/uW/nW/pW or mean_photons".into())),
        many => return Err(EpdcError::Unit(format!("mixed intensity units: {}", names(many.iter().map(|(n, _)| n.as_str()))))),
    };
    let counts = match counts.as_slice() {
        [(_, c)] => *c,
        [] => return Err(EpdcError::Unit("need a 'clicks' or 'count_rate_Hz' column".into())),
        many => return Err(EpdcError::Unit(format!("mixed count units: {}", names(many.iter().map(|(n, _)| n.as_str()))))),
    };
    let exposure = match exposure.as_slice() {
        [(_, e)] => *e,
        [] => match options.integration_time_s {
            Some(t) if t > 0.0 && t.is_finite() => Exposure::FixedTime(t),
            Some(t) => return Err(EpdcError::Validation(format!("integration time must be positive, got {t}"))),
            None => {
                return Err(EpdcError::Unit(
                    "no 'trials' or 'integration_time_s' column and no integration time given".into(),
                ))
            }
        },
        many => return Err(EpdcError::Unit(format!("mixed exposure units: {}", names(many.iter().map(|(n, _)| n.as_str()))))),
    };
    if matches!(counts, Counts::Rate(_)) && matches!(exposure, Exposure::Trials(_)) {
        return Err(EpdcError::Unit("count_rate_Hz needs an integration time, not trials".into()));
    }
    Ok(Layout { bias, intensity, counts, exposure })
}

/// Nonnegative integer written either plainly or in float notation (`2.0e7`).
fn integral(value: f64, what: &str) -> std::result::Result<u64, String> {
    let rounded = value.round();
    if !(value >= 0.0 && value.is_finite()) {
        return Err(format!("{what} must be finite and >= 0, got {value}"));
    }
    if (value - rounded).abs() > 1e-6 * rounded.max(1.0) || rounded > 9.007_199_254_740_992e15 {
        return Err(format!("{what} must be a whole number, got {value}"));
    }
    Ok(rounded as u64)
}

fn field(record: &csv::StringRecord, index: usize, name: &str) -> std::result::Result<f64, String> {
    let raw = record.get(index).ok_or_else(|| format!("missing field '{name}'"))?;
    raw.parse::<f64>().map_err(|_| format!("cannot parse {name} '{raw}'"))
}

struct Row {
    bias: f64,
    mean_photons: f64,
    clicks: u64,
    trials: u64,
}

fn parse_row(record: &csv::StringRecord, layout: &Layout, options: &IngestOptions) -> std::result::Result<Row, String> {
    let bias = field(record, layout.bias, "bias_current_uA")?;
    if !bias.is_finite() {
        return Err(format!("bias current must be finite, got {bias}"));
    }
    let mean_photons = match layout.intensity {
        Intensity::MeanPhotons(i) => field(record, i, "mean_photons")?,
        Intensity::Power(i, scale) => {
            let p = field(record, i, "power")? * scale;
            power_to_mean_photons(p, &options.optics).map_err(|e| e.to_string())?
        }
    };
    if !(mean_photons >= 0.0 && mean_photons.is_finite()) {
        return Err(format!("intensity must be finite and >= 0, got {mean_photons}"));
    }
    let time = match layout.exposure {
        Exposure::Trials(_) => None,
        Exposure::Time(i) => Some(field(record, i, "integration_time_s")?),
        Exposure::FixedTime(t) => Some(t),
    };
    if let Some(t) = time {
        if !(t > 0.0 && t.is_finite()) {
            return Err(format!("integration time must be positive, got {t}"));
        }
    }
    let trials = match (layout.exposure, time) {
        (Exposure::Trials(i), _) => integral(field(record, i, "trials")?, "trials")?,
        (_, Some(t)) => integral(options.optics.repetition_rate_hz * t, "repetition_rate * integration_time")?,
        _ => unreachable!("exposure without time"),
    };
    let clicks = match layout.counts {
        Counts::Clicks(i) => integral(field(record, i, "clicks")?, "clicks")?,
        Counts::Rate(i) => integral(field(record, i, "count_rate_Hz")? * time.unwrap_or(1.0), "count_rate * integration_time")?,
    };
    if trials == 0 {
        return Err("trials = 0; the row carries no pulses".into());
    }
    if clicks > trials {
        return Err(format!("clicks ({clicks}) exceed trials ({trials})"));
    }
    Ok(Row { bias, mean_photons, clicks, trials })
}

/// Parses CSV text; `source` names the input in diagnostics.
pub fn ingest_str(text: &str, source: &Path, options: &IngestOptions) -> Result<SweepData> {
    options.optics.validate()?;
    let parse_err = |line: usize, message: String| EpdcError::Parse { path: source.to_path_buf(), line, message };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(EpdcError::Arity(format!("{} is empty", source.display())));
    }
    let layout = parse_layout(&headers, options)?;

    // Groups preserve first-appearance order; duplicates merge into the first row.
    let mut groups: SweepData = SweepData::new();
    let mut counts: HashMap<(u64, u64), (u64, u64)> = HashMap::new();
    let mut order: Vec<(u64, u64, f64, f64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = parse_row(&record, &layout, options).map_err(|m| parse_err(line, m))?;
        let key = (row.bias.to_bits(), row.mean_photons.to_bits());
        let entry = counts.entry(key).or_insert_with(|| {
            order.push((key.0, key.1, row.bias, row.mean_photons));
            (0, 0)
        });
        entry.0 += row.clicks;
        entry.1 += row.trials;
        if entry.0 > entry.1 {
            return Err(parse_err(line, "merged clicks exceed merged trials".into()));
        }
    }
    if order.is_empty() {
        return Err(EpdcError::Arity(format!("{} contains no data rows", source.display())));
    }
    for (kb, kn, bias, n) in order {
        let (clicks, trials) = counts[&(kb, kn)];
        let stats = ClickStatistics::new(n, clicks, trials, options.weights)?;
        groups.entry(BiasCurrent(bias)).or_default().push(stats);
    }
    Ok(groups)
}

/// Reads and parses a CSV count-rate file.
pub fn ingest(path: &Path, options: &IngestOptions) -> Result<SweepData> {
    let text = std::fs::read_to_string(path).map_err(|source| EpdcError::Io { path: path.to_path_buf(), source })?;
    ingest_str(&text, path, options)
}

/// Writes a dataset in the `mean_photons` / `clicks` / `trials` layout.
/// Floats use shortest round-trip formatting, so ingesting the text
/// reproduces the data exactly.
pub fn serialize_dataset(data: &SweepData) -> String {
    let mut out = String::from("bias_current_uA,mean_photons,clicks,trials\n");
    for (bias, points) in data {
        for d in points {
            writeln!(out, "{:?},{:?},{},{}", bias.0, d.mean_photons(), d.clicks(), d.trials()).expect("write to string");
        }
    }
    out
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| EpdcError::Io { path: PathBuf::from(path), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> IngestOptions {
        IngestOptions::default()
    }

    fn src() -> &'static Path {
        Path::new("test.csv")
    }

    #[test]
    fn power_row_with_trials() {
        let text = "bias_current_uA, power_W, clicks, trials\n17.0, 2.0e-9, 1250, 2.0e7\n";
        let data = ingest_str(text, src(), &opts()).unwrap();
        let d = &data[&BiasCurrent(17.0)][0];
        assert_eq!(d.rate(), 6.25e-5);
        assert_eq!(d.trials(), 20_000_000);
        assert!((d.mean_photons() / 755.117_485_131_406 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn count_rate_with_integration_time_flag() {
        let text = "bias_current_uA,power_nW,count_rate_Hz\n14.0,2.0,1250\n";
        assert!(matches!(ingest_str(text, src(), &opts()), Err(EpdcError::Unit(_))));
        let o = IngestOptions { integration_time_s: Some(0.5), ..opts() };
        let data = ingest_str(text, src(), &o).unwrap();
        let d = &data[&BiasCurrent(14.0)][0];
        assert_eq!((d.clicks(), d.trials()), (625, 10_000_000));
    }

    #[test]
    fn empty_and_headerless_files() {
        assert!(matches!(ingest_str("", src(), &opts()), Err(EpdcError::Arity(_))));
        assert!(matches!(ingest_str("bias_current_uA,mean_photons,clicks,trials\n", src(), &opts()), Err(EpdcError::Arity(_))));
        assert!(matches!(ingest_str("17,1.0,3,10\n", src(), &opts()), Err(EpdcError::Unit(_))));
    }

    #[test]
    fn unit_errors() {
        let mixed = "bias_current_uA,power_W,mean_photons,clicks,trials\n1,1,1,1,1\n";
        assert!(matches!(ingest_str(mixed, src(), &opts()), Err(EpdcError::Unit(_))));
        let unknown = "bias_current_uA,power_dBm,clicks,trials\n1,1,1,1\n";
        assert!(matches!(ingest_str(unknown, src(), &opts()), Err(EpdcError::Unit(_))));
    }

    #[test]
    fn row_errors_carry_line_numbers() {
        let text = "bias_current_uA,mean_photons,clicks,trials\n# comment\n17,1.0,3,10\n17,2.0,x,10\n";
        match ingest_str(text, src(), &opts()) {
            Err(EpdcError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let zero = "bias_current_uA,mean_photons,clicks,trials\n17,1.0,0,0\n";
        match ingest_str(zero, src(), &opts()) {
            Err(EpdcError::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("trials = 0"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let frac = "bias_current_uA,mean_photons,clicks,trials\n17,1.0,2.5,10\n";
        assert!(matches!(ingest_str(frac, src(), &opts()), Err(EpdcError::Parse { line: 2, .. })));
    }

    #[test]
    fn duplicates_merge() {
        let text = "bias_current_uA,mean_photons,clicks,trials\n17,1.0,3,10\n17,2.0,5,10\n17,1.0,4,20\n";
        let data = ingest_str(text, src(), &opts()).unwrap();
        let pts = &data[&BiasCurrent(17.0)];
        assert_eq!(pts.len(), 2);
        assert_eq!((pts[0].clicks(), pts[0].trials()), (7, 30));
    }

    #[test]
    fn serialize_then_ingest_is_identity() {
        let text = "bias_current_uA,mean_photons,clicks,trials\n14.2,0.1,1,1000\n14.2,12.345678901234567,999,1000\n20,3e-7,0,5\n";
        let data = ingest_str(text, src(), &opts()).unwrap();
        let again = ingest_str(&serialize_dataset(&data), src(), &opts()).unwrap();
        assert_eq!(data, again);
    }
}
