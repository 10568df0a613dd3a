//! Crop-yield records, CSV ingestion, year-based splits, min-max scaling
//! and a seeded synthetic generator.
//!
//! CSV layout (UTF-8, `.` decimals, one record per line):
//!
//! ```text
//! crop,year,at1,at2,at3,at4,at5,at6,at7,yield
//! ```
//!
//! | column | meaning                               | unit      |
//! |--------|---------------------------------------|-----------|
//! | at1    | planting area                         | ha        |
//! | at2    | irrigation water depth (season total) | mm        |
//! | at3    | rainfall during growth stages         | mm        |
//! | at4    | global solar radiation                | kWh m^-2  |
//! | at5    | maximum temperature                   | deg C     |
//! | at6    | average temperature                   | deg C     |
//! | at7    | minimum temperature                   | deg C     |
//! | yield  | crop yield                            | t ha^-1   |

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ann::Samples;
use crate::error::{Error, Result};
use crate::search::stream_rng;

pub const HEADER: [&str; 10] = [
    "crop", "year", "at1", "at2", "at3", "at4", "at5", "at6", "at7", "yield",
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Crop {
    Wheat,
    Barley,
    Potato,
    SugarBeet,
    Other(String),
}

impl Crop {
    pub const MAIN: [Crop; 4] = [Crop::Wheat, Crop::Barley, Crop::Potato, Crop::SugarBeet];

    pub fn label(&self) -> &str {
        match self {
            Crop::Wheat => "wheat",
            Crop::Barley => "barley",
            Crop::Potato => "potato",
            Crop::SugarBeet => "sugar_beet",
            Crop::Other(s) => s,
        }
    }

    /// Yield scale of the synthetic generator, t/ha per unit response.
    fn synthetic_scale(&self) -> f64 {
        match self {
            Crop::Wheat => 1.0,
            Crop::Barley => 0.8,
            Crop::Potato => 4.0,
            Crop::SugarBeet => 6.0,
            Crop::Other(_) => 1.0,
        }
    }

    fn stream_id(&self) -> u64 {
        match self {
            Crop::Wheat => 1,
            Crop::Barley => 2,
            Crop::Potato => 3,
            Crop::SugarBeet => 4,
            Crop::Other(s) => s
                .bytes()
                .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3)),
        }
    }
}

impl fmt::Display for Crop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Crop {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s.to_ascii_lowercase().as_str() {
            "wheat" => Crop::Wheat,
            "barley" => Crop::Barley,
            "potato" => Crop::Potato,
            "sugar_beet" | "sugar beet" | "sugarbeet" => Crop::SugarBeet,
            "" => return Err(Error::Schema("empty crop label".into())),
            _ => Crop::Other(s.to_string()),
        })
    }
}

impl Serialize for Crop {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Crop {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Input attribute codes AT1..AT7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attribute {
    At1,
    At2,
    At3,
    At4,
    At5,
    At6,
    At7,
}

impl Attribute {
    pub const ALL: [Attribute; 7] = [
        Attribute::At1,
        Attribute::At2,
        Attribute::At3,
        Attribute::At4,
        Attribute::At5,
        Attribute::At6,
        Attribute::At7,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        ["AT1", "AT2", "AT3", "AT4", "AT5", "AT6", "AT7"][self.index()]
    }

    pub fn column(self) -> &'static str {
        HEADER[2 + self.index()]
    }

    pub fn description(self) -> &'static str {
        [
            "planting area (ha)",
            "irrigation water depth (mm)",
            "rainfall during growth stages (mm)",
            "global solar radiation (kWh m^-2)",
            "maximum temperature (C)",
            "average temperature (C)",
            "minimum temperature (C)",
        ][self.index()]
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        Attribute::ALL
            .into_iter()
            .find(|a| a.code().eq_ignore_ascii_case(t) || a.column() == t)
            .ok_or_else(|| Error::Schema(format!("unknown attribute {s:?}")))
    }
}

impl Serialize for Attribute {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for Attribute {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CropRecord {
    pub crop: Crop,
    pub year: i32,
    /// AT1..AT7 in code order.
    pub attrs: [f64; 7],
    /// t/ha
    pub yield_t_ha: f64,
}

impl CropRecord {
    pub fn get(&self, attribute: Attribute) -> f64 {
        self.attrs[attribute.index()]
    }

    /// Checks the physical constraints; the message names the violated rule.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if let Some(i) = self.attrs.iter().position(|v| !v.is_finite()) {
            return Err(format!("{} is not finite", Attribute::ALL[i].column()));
        }
        if !self.yield_t_ha.is_finite() {
            return Err("yield is not finite".into());
        }
        let [at1, at2, at3, at4, at5, at6, at7] = self.attrs;
        if at1 <= 0.0 {
            return Err(format!("planting area must be > 0, got {at1}"));
        }
        for (name, v) in [("at2", at2), ("at3", at3), ("at4", at4)] {
            if v < 0.0 {
                return Err(format!("{name} must be >= 0, got {v}"));
            }
        }
        if !(at7 <= at6 && at6 <= at5) {
            return Err(format!(
                "temperature ordering violated: need at7 <= at6 <= at5, got {at7}, {at6}, {at5}"
            ));
        }
        if self.yield_t_ha < 0.0 {
            return Err(format!("yield must be >= 0, got {}", self.yield_t_ha));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<CropRecord>,
    attributes: Vec<Attribute>,
}

impl Dataset {
    /// All seven attributes selected.
    pub fn new(records: Vec<CropRecord>) -> Self {
        Self {
            records,
            attributes: Attribute::ALL.to_vec(),
        }
    }

    pub fn with_attributes(mut self, attributes: &[Attribute]) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::config("attributes", "at least one attribute is required"));
        }
        let mut attrs = attributes.to_vec();
        attrs.sort();
        attrs.dedup();
        self.attributes = attrs;
        Ok(self)
    }

    pub fn records(&self) -> &[CropRecord] {
        &self.records
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn derive(&self, records: Vec<CropRecord>) -> Self {
        Self {
            records,
            attributes: self.attributes.clone(),
        }
    }

    pub fn filter_crop(&self, crop: &Crop) -> Self {
        self.derive(self.records.iter().filter(|r| &r.crop == crop).cloned().collect())
    }

    /// Distinct crops in `Crop` order.
    pub fn crops(&self) -> Vec<Crop> {
        let mut crops: Vec<Crop> = self.records.iter().map(|r| r.crop.clone()).collect();
        crops.sort();
        crops.dedup();
        crops
    }

    /// Stable sort by year, then cut: the last `ceil(fraction * n)` records
    /// form the second part. At least one record stays in the first part.
    pub fn temporal_holdout(&self, fraction: f64) -> Result<(Self, Self)> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::config(
                "validation_fraction",
                format!("{fraction} outside (0, 1)"),
            ));
        }
        if self.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let mut sorted = self.records.clone();
        sorted.sort_by_key(|r| r.year);
        let n = sorted.len();
        let n_val = ((fraction * n as f64).ceil() as usize).min(n - 1);
        let val = sorted.split_off(n - n_val);
        Ok((self.derive(sorted), self.derive(val)))
    }

    /// Copy with every target multiplied by `factor`.
    pub fn scale_targets(&self, factor: f64) -> Self {
        self.derive(
            self.records
                .iter()
                .map(|r| CropRecord {
                    yield_t_ha: r.yield_t_ha * factor,
                    ..r.clone()
                })
                .collect(),
        )
    }
}

/// Min-max scaling fitted on one dataset and applied unchanged to others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub attributes: Vec<Attribute>,
    pub feature_min: Vec<f64>,
    pub feature_max: Vec<f64>,
    pub target_min: f64,
    pub target_max: f64,
}

impl NormalizationStats {
    pub fn fit(ds: &Dataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::Empty("normalization fitting set"));
        }
        let range = |values: &mut dyn Iterator<Item = f64>| {
            values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
        };
        let mut feature_min = Vec::with_capacity(ds.attributes.len());
        let mut feature_max = Vec::with_capacity(ds.attributes.len());
        for &a in &ds.attributes {
            let (lo, hi) = range(&mut ds.records.iter().map(|r| r.get(a)));
            if lo >= hi {
                return Err(Error::ConstantColumn(a.code().into()));
            }
            feature_min.push(lo);
            feature_max.push(hi);
        }
        let (target_min, target_max) = range(&mut ds.records.iter().map(|r| r.yield_t_ha));
        if target_min >= target_max {
            return Err(Error::ConstantColumn("yield".into()));
        }
        Ok(Self {
            attributes: ds.attributes.clone(),
            feature_min,
            feature_max,
            target_min,
            target_max,
        })
    }

    pub fn normalize_feature(&self, col: usize, x: f64) -> f64 {
        (x - self.feature_min[col]) / (self.feature_max[col] - self.feature_min[col])
    }

    pub fn normalize_target(&self, y: f64) -> f64 {
        (y - self.target_min) / (self.target_max - self.target_min)
    }

    pub fn denormalize_target(&self, v: f64) -> f64 {
        self.target_min + v * (self.target_max - self.target_min)
    }

    /// Scales `ds` with these statistics; values outside the fitted range
    /// map outside `[0, 1]`.
    pub fn apply(&self, ds: &Dataset) -> Result<Samples> {
        if ds.attributes != self.attributes {
            return Err(Error::Schema(format!(
                "dataset attributes {:?} differ from fitted {:?}",
                ds.attributes, self.attributes
            )));
        }
        let mut features = Vec::with_capacity(ds.len() * self.attributes.len());
        let mut targets = Vec::with_capacity(ds.len());
        for r in &ds.records {
            for (col, &a) in self.attributes.iter().enumerate() {
                features.push(self.normalize_feature(col, r.get(a)));
            }
            targets.push(self.normalize_target(r.yield_t_ha));
        }
        Samples::new(features, self.attributes.len(), targets)
    }
}

/// Fits min-max statistics on `ds` and returns its scaled samples.
pub fn normalize(ds: &Dataset) -> Result<(Samples, NormalizationStats)> {
    let stats = NormalizationStats::fit(ds)?;
    Ok((stats.apply(ds)?, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RejectPolicy {
    #[default]
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadReport {
    pub dataset: Dataset,
    pub rejected: Vec<Rejection>,
}

pub fn load_csv(path: impl AsRef<Path>, policy: RejectPolicy) -> Result<LoadReport> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, policy)
}

pub fn read_csv<R: Read>(reader: R, policy: RejectPolicy) -> Result<LoadReport> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut index = [0usize; 10];
    let mut missing = Vec::new();
    for (slot, name) in index.iter_mut().zip(HEADER) {
        match headers.iter().position(|h| h == name) {
            Some(i) => *slot = i,
            None => missing.push(name),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Schema(format!("missing columns: {}", missing.join(", "))));
    }

    let mut records = Vec::new();
    let mut rejected = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let parsed = parse_row(&row, &index).and_then(|rec| rec.validate().map(|()| rec));
        match parsed {
            Ok(rec) => records.push(rec),
            Err(reason) => match policy {
                RejectPolicy::Fail => return Err(Error::Row { line, reason }),
                RejectPolicy::Skip => rejected.push(Rejection { line, reason }),
            },
        }
    }
    Ok(LoadReport {
        dataset: Dataset::new(records),
        rejected,
    })
}

fn parse_row(row: &csv::StringRecord, index: &[usize; 10]) -> std::result::Result<CropRecord, String> {
    let cell = |k: usize| row.get(index[k]).unwrap_or("");
    let crop: Crop = cell(0).parse().map_err(|e: Error| e.to_string())?;
    let year: i32 = cell(1)
        .parse()
        .map_err(|_| format!("year: cannot parse {:?}", cell(1)))?;
    let num = |k: usize| -> std::result::Result<f64, String> {
        let v: f64 = cell(k)
            .parse()
            .map_err(|_| format!("{}: cannot parse {:?}", HEADER[k], cell(k)))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("{}: not finite", HEADER[k]))
        }
    };
    let mut attrs = [0.0; 7];
    for (i, slot) in attrs.iter_mut().enumerate() {
        *slot = num(2 + i)?;
    }
    Ok(CropRecord {
        crop,
        year,
        attrs,
        yield_t_ha: num(9)?,
    })
}

/// Writes `ds` in the documented layout. Floats use the shortest
/// round-trip representation, so output is a pure function of the data.
pub fn write_csv<W: Write>(ds: &Dataset, mut w: W) -> io::Result<()> {
    writeln!(w, "{}", HEADER.join(","))?;
    for r in &ds.records {
        write!(w, "{},{}", r.crop, r.year)?;
        for v in r.attrs {
            write!(w, ",{v}")?;
        }
        writeln!(w, ",{}", r.yield_t_ha)?;
    }
    w.flush()
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(ds, io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    /// Inclusive `[first, last]`.
    pub train_years: (i32, i32),
    pub test_years: (i32, i32),
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_years: (1999, 2004),
            test_years: (2005, 2006),
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let (a0, a1) = self.train_years;
        let (b0, b1) = self.test_years;
        if a0 > a1 {
            return Err(Error::config("split.train_years", "first year after last year"));
        }
        if b0 > b1 {
            return Err(Error::config("split.test_years", "first year after last year"));
        }
        if a0 <= b1 && b0 <= a1 {
            return Err(Error::config("split", "train and test year ranges overlap"));
        }
        Ok(())
    }

    fn in_train(&self, year: i32) -> bool {
        (self.train_years.0..=self.train_years.1).contains(&year)
    }

    fn in_test(&self, year: i32) -> bool {
        (self.test_years.0..=self.test_years.1).contains(&year)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    /// Records outside both ranges.
    pub dropped: usize,
}

impl Split {
    pub fn per_crop_counts(&self) -> BTreeMap<Crop, (usize, usize)> {
        let mut out: BTreeMap<Crop, (usize, usize)> = BTreeMap::new();
        for r in self.train.records() {
            out.entry(r.crop.clone()).or_default().0 += 1;
        }
        for r in self.test.records() {
            out.entry(r.crop.clone()).or_default().1 += 1;
        }
        out
    }
}

fn partition(ds: &Dataset, spec: &SplitSpec) -> Split {
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut dropped = 0;
    for r in ds.records() {
        if spec.in_train(r.year) {
            train.push(r.clone());
        } else if spec.in_test(r.year) {
            test.push(r.clone());
        } else {
            dropped += 1;
        }
    }
    Split {
        train: ds.derive(train),
        test: ds.derive(test),
        dropped,
    }
}

pub fn split_by_year(ds: &Dataset, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let split = partition(ds, spec);
    if split.train.is_empty() {
        return Err(Error::Split {
            side: "train",
            start: spec.train_years.0,
            end: spec.train_years.1,
        });
    }
    if split.test.is_empty() {
        return Err(Error::Split {
            side: "test",
            start: spec.test_years.0,
            end: spec.test_years.1,
        });
    }
    Ok(split)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub total: usize,
    pub train: usize,
    pub test: usize,
}

impl SummaryRow {
    /// `100 * test / total`; 0 for an empty row.
    pub fn test_percent(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.test as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub spec: SplitSpec,
    pub rows: Vec<SummaryRow>,
    pub total: SummaryRow,
}

impl Summary {
    pub fn row(&self, crop: &Crop) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.label == crop.label())
    }
}

/// Per-crop sample distribution over the train and test periods. Totals
/// count only records inside one of the two ranges.
pub fn summarize(ds: &Dataset, spec: &SplitSpec) -> Summary {
    let split = partition(ds, spec);
    let rows: Vec<SummaryRow> = split
        .per_crop_counts()
        .into_iter()
        .map(|(crop, (train, test))| SummaryRow {
            label: crop.label().to_string(),
            total: train + test,
            train,
            test,
        })
        .collect();
    let total = SummaryRow {
        label: "total".into(),
        total: rows.iter().map(|r| r.total).sum(),
        train: rows.iter().map(|r| r.train).sum(),
        test: rows.iter().map(|r| r.test).sum(),
    };
    Summary {
        spec: *spec,
        rows,
        total,
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a0, a1) = self.spec.train_years;
        let (b0, b1) = self.spec.test_years;
        writeln!(
            f,
            "{:<12} {:>8} {:>14} {:>14} {:>10}",
            "crop",
            "total",
            format!("train {a0}-{a1}"),
            format!("test {b0}-{b1}"),
            "test %"
        )?;
        for r in self.rows.iter().chain(std::iter::once(&self.total)) {
            writeln!(
                f,
                "{:<12} {:>8} {:>14} {:>14} {:>10.2}",
                r.label,
                r.total,
                r.train,
                r.test,
                r.test_percent()
            )?;
        }
        Ok(())
    }
}

/// The synthetic response, before crop scaling and noise. Depends on AT2
/// (dominant, saturating), AT3 (hump), AT4 (convex) and AT5 (inverted
/// parabola around 30 C); AT1, AT6 and AT7 have no effect.
pub fn synthetic_response(attrs: &[f64; 7]) -> f64 {
    let u2 = (attrs[1] - 200.0) / 700.0;
    let u3 = attrs[2] / 300.0;
    let u4 = (attrs[3] - 4.0) / 4.0;
    let u5 = (attrs[4] - 22.0) / 16.0;
    let v5 = 2.0 * u5 - 1.0;
    1.0 + 5.0 * (1.0 - (-2.5 * u2).exp())
        + 1.2 * (std::f64::consts::PI * u3).sin()
        + 1.0 * u4 * u4
        + 1.5 * (1.0 - v5 * v5)
}

/// Noise-free synthetic yield for `crop`, in t/ha.
pub fn ground_truth_yield(crop: &Crop, attrs: &[f64; 7]) -> f64 {
    crop.synthetic_scale() * synthetic_response(attrs)
}

/// Attributes the synthetic response depends on.
pub const SYNTHETIC_RELEVANT: [Attribute; 4] =
    [Attribute::At2, Attribute::At3, Attribute::At4, Attribute::At5];
pub const SYNTHETIC_DOMINANT: Attribute = Attribute::At2;

fn synthetic_record(crop: &Crop, year: i32, seed: u64, k: usize, noise: Option<&Normal<f64>>) -> CropRecord {
    let mut rng = stream_rng(seed, &[crop.stream_id(), year as u64, k as u64]);
    let at1 = rng.random_range(1.0..50.0);
    let at2 = rng.random_range(200.0..900.0);
    let at3 = rng.random_range(0.0..300.0);
    let at4 = rng.random_range(4.0..8.0);
    let at5 = rng.random_range(22.0..38.0);
    let at7 = at5 - rng.random_range(8.0..18.0);
    let at6 = at7 + rng.random_range(0.3..0.7) * (at5 - at7);
    let attrs = [at1, at2, at3, at4, at5, at6, at7];
    let mut y = ground_truth_yield(crop, &attrs);
    if let Some(n) = noise {
        y = (y + n.sample(&mut rng)).max(0.0);
    }
    CropRecord {
        crop: crop.clone(),
        year,
        attrs,
        yield_t_ha: y,
    }
}

fn noise_dist(noise_sd: f64) -> Result<Option<Normal<f64>>> {
    if noise_sd == 0.0 {
        return Ok(None);
    }
    Normal::new(0.0, noise_sd)
        .map(Some)
        .map_err(|e| Error::config("noise_sd", e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    /// Records per crop per year.
    pub n_per_crop: usize,
    /// Standard deviation of additive Gaussian yield noise, t/ha.
    pub noise_sd: f64,
    pub first_year: i32,
    pub last_year: i32,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_per_crop: 20,
            noise_sd: 0.05,
            first_year: 1999,
            last_year: 2006,
        }
    }
}

/// `n_per_crop` records for each of the four main crops in every year of
/// the spec's range.
pub fn synthesize(spec: &SynthSpec) -> Result<Dataset> {
    if spec.n_per_crop == 0 {
        return Err(Error::config("n_per_crop", "must be at least 1"));
    }
    if spec.first_year > spec.last_year {
        return Err(Error::config("first_year", "after last_year"));
    }
    let noise = noise_dist(spec.noise_sd)?;
    let mut records = Vec::new();
    for crop in Crop::MAIN {
        for year in spec.first_year..=spec.last_year {
            for k in 0..spec.n_per_crop {
                records.push(synthetic_record(&crop, year, spec.seed, k, noise.as_ref()));
            }
        }
    }
    Ok(Dataset::new(records))
}

/// Per-crop (train count, test count) of the reference sample distribution.
pub fn table_one_layout() -> Vec<(Crop, usize, usize)> {
    vec![
        (Crop::Wheat, 449, 59),
        (Crop::Barley, 42, 45),
        (Crop::Potato, 132, 63),
        (Crop::SugarBeet, 108, 48),
    ]
}

/// Synthetic records with exact per-crop train/test counts, spread
/// round-robin over the years of each range.
pub fn synthesize_counts(
    seed: u64,
    noise_sd: f64,
    layout: &[(Crop, usize, usize)],
    split: &SplitSpec,
) -> Result<Dataset> {
    split.validate()?;
    let noise = noise_dist(noise_sd)?;
    let mut records = Vec::new();
    for (crop, n_train, n_test) in layout {
        for ((first, last), n) in [(split.train_years, *n_train), (split.test_years, *n_test)] {
            let span = (last - first + 1) as usize;
            for k in 0..n {
                let year = first + (k % span) as i32;
                records.push(synthetic_record(crop, year, seed, k / span, noise.as_ref()));
            }
        }
    }
    Ok(Dataset::new(records))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "crop,year,at1,at2,at3,at4,at5,at6,at7,yield
wheat,2001,10,500,120,6,30,22,15,4.2
barley,2005,3.5,300,80,5.5,28,20,12,2.9
potato,2006,7,650,40,7,33,25,18,31.0
";

    #[test]
    fn loads_well_formed_file() {
        let rep = read_csv(SAMPLE.as_bytes(), RejectPolicy::Fail).unwrap();
        assert_eq!(rep.dataset.len(), 3);
        assert!(rep.rejected.is_empty());
        assert_eq!(rep.dataset.records()[1].crop, Crop::Barley);
        assert_eq!(rep.dataset.records()[2].get(Attribute::At2), 650.0);
    }

    #[test]
    fn temperature_ordering_is_enforced() {
        let bad = format!("{}{}", SAMPLE, "wheat,2002,10,500,120,6,14,22,15,4.2\n");
        match read_csv(bad.as_bytes(), RejectPolicy::Fail) {
            Err(Error::Row { line, reason }) => {
                assert_eq!(line, 5);
                assert!(reason.contains("temperature ordering"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
        let rep = read_csv(bad.as_bytes(), RejectPolicy::Skip).unwrap();
        assert_eq!(rep.dataset.len(), 3);
        assert_eq!(rep.rejected.len(), 1);
        assert_eq!(rep.rejected[0].line, 5);
    }

    #[test]
    fn unparseable_cell_reports_line() {
        let bad = "crop,year,at1,at2,at3,at4,at5,at6,at7,yield\nwheat,2001,x,500,120,6,30,22,15,4.2\n";
        match read_csv(bad.as_bytes(), RejectPolicy::Fail) {
            Err(Error::Row { line: 2, reason }) => assert!(reason.contains("at1")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_columns_are_a_schema_error() {
        let bad = "crop,year,at1,at2\nwheat,2001,1,2\n";
        match read_csv(bad.as_bytes(), RejectPolicy::Fail) {
            Err(Error::Schema(msg)) => assert!(msg.contains("at3") && msg.contains("yield")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn other_crop_labels_survive() {
        let csv = "crop,year,at1,at2,at3,at4,at5,at6,at7,yield\nmaize,2001,1,2,3,4,30,20,10,5\n";
        let rep = read_csv(csv.as_bytes(), RejectPolicy::Fail).unwrap();
        assert_eq!(rep.dataset.records()[0].crop, Crop::Other("maize".into()));
    }

    #[test]
    fn split_partitions_and_counts_drops() {
        let ds = synthesize(&SynthSpec {
            n_per_crop: 2,
            first_year: 1997,
            ..SynthSpec::default()
        })
        .unwrap();
        let split = split_by_year(&ds, &SplitSpec::default()).unwrap();
        assert_eq!(split.dropped, 4 * 2 * 2);
        assert_eq!(split.train.len() + split.test.len() + split.dropped, ds.len());
        assert!(split.train.records().iter().all(|r| (1999..=2004).contains(&r.year)));
        assert!(split.test.records().iter().all(|r| (2005..=2006).contains(&r.year)));
    }

    #[test]
    fn split_errors_on_empty_side() {
        let ds = synthesize(&SynthSpec::default()).unwrap();
        let spec = SplitSpec {
            train_years: (1990, 2010),
            test_years: (2011, 2012),
        };
        assert!(matches!(split_by_year(&ds, &spec), Err(Error::Split { side: "test", .. })));
        let overlapping = SplitSpec {
            train_years: (1999, 2005),
            test_years: (2005, 2006),
        };
        assert!(split_by_year(&ds, &overlapping).is_err());
    }

    #[test]
    fn normalization_endpoints_and_extrapolation() {
        let rec = |at1: f64, y: f64| CropRecord {
            crop: Crop::Wheat,
            year: 2000,
            attrs: [at1, 1.0, 1.0, 1.0, 30.0, 20.0, 10.0],
            yield_t_ha: y,
        };
        let train = Dataset::new(vec![rec(0.5, 0.0), rec(10.0, 10.0)])
            .with_attributes(&[Attribute::At1])
            .unwrap();
        let (s, stats) = normalize(&train).unwrap();
        assert_eq!(s.targets(), &[0.0, 1.0]);
        assert_eq!(stats.normalize_target(12.0), 1.2);
        assert_eq!(stats.denormalize_target(stats.normalize_target(7.3)), 7.3);

        let constant = Dataset::new(vec![rec(1.0, 0.0), rec(1.0, 1.0)])
            .with_attributes(&[Attribute::At1])
            .unwrap();
        assert!(matches!(NormalizationStats::fit(&constant), Err(Error::ConstantColumn(c)) if c == "AT1"));
    }

    #[test]
    fn normalization_ignores_test_data() {
        let ds = synthesize(&SynthSpec::default()).unwrap();
        let split = split_by_year(&ds, &SplitSpec::default()).unwrap();
        let stats = NormalizationStats::fit(&split.train).unwrap();
        let perturbed = split.test.scale_targets(100.0);
        let again = NormalizationStats::fit(&split.train).unwrap();
        assert_eq!(stats, again);
        let s = stats.apply(&perturbed).unwrap();
        assert_eq!(s.len(), split.test.len());
    }

    #[test]
    fn noiseless_synthesis_matches_generator() {
        let ds = synthesize(&SynthSpec {
            noise_sd: 0.0,
            ..SynthSpec::default()
        })
        .unwrap();
        for r in ds.records() {
            assert_eq!(r.yield_t_ha, ground_truth_yield(&r.crop, &r.attrs));
            r.validate().unwrap();
        }
    }

    #[test]
    fn synthesis_counts_per_crop_per_year() {
        let spec = SynthSpec {
            n_per_crop: 3,
            ..SynthSpec::default()
        };
        let ds = synthesize(&spec).unwrap();
        for crop in Crop::MAIN {
            for year in 1999..=2006 {
                let n = ds.records().iter().filter(|r| r.crop == crop && r.year == year).count();
                assert_eq!(n, 3);
            }
        }
    }

    #[test]
    fn synthesis_is_byte_deterministic() {
        let spec = SynthSpec {
            seed: 7,
            ..SynthSpec::default()
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_csv(&synthesize(&spec).unwrap(), &mut a).unwrap();
        write_csv(&synthesize(&spec).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        let back = read_csv(a.as_slice(), RejectPolicy::Fail).unwrap();
        assert_eq!(back.dataset, synthesize(&spec).unwrap());
    }

    #[test]
    fn summary_percentages() {
        let ds = synthesize_counts(1, 0.1, &table_one_layout(), &SplitSpec::default()).unwrap();
        let s = summarize(&ds, &SplitSpec::default());
        let wheat = s.row(&Crop::Wheat).unwrap();
        assert_eq!((wheat.total, wheat.train, wheat.test), (508, 449, 59));
        assert!((wheat.test_percent() - 11.61).abs() < 0.01);
        assert!((s.row(&Crop::Barley).unwrap().test_percent() - 51.72).abs() < 0.01);
        assert_eq!(s.total.total, 946);
        let empty = SummaryRow {
            label: "x".into(),
            total: 0,
            train: 0,
            test: 0,
        };
        assert_eq!(empty.test_percent(), 0.0);
    }

    #[test]
    fn temporal_holdout_takes_latest_years() {
        let ds = synthesize(&SynthSpec {
            n_per_crop: 1,
            ..SynthSpec::default()
        })
        .unwrap()
        .filter_crop(&Crop::Wheat);
        let (fit, val) = ds.temporal_holdout(0.25).unwrap();
        assert_eq!(val.len(), 2);
        assert_eq!(fit.len(), 6);
        assert!(val.records().iter().all(|r| r.year >= 2005));
    }
}
