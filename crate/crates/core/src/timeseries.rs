//! Hourly input data: load, grid price and per-unit PV availability.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot open {path}: {source}")]
    Open { path: String, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("row {row}: `{column}` is not a finite number: {value:?}")]
    NonFinite { row: usize, column: String, value: String },
    #[error("row {row}: hour index {found} does not match row position")]
    HourMismatch { row: usize, found: String },
    #[error("row {row}: negative load {value}")]
    NegativeLoad { row: usize, value: f64 },
    #[error("row {row}: negative price {value}")]
    NegativePrice { row: usize, value: f64 },
    #[error("row {row}: PV availability {value} outside [0, 1]")]
    AvailabilityOutOfRange { row: usize, value: f64 },
    #[error("series lengths differ: {0:?}")]
    LengthMismatch(Vec<usize>),
    #[error("trace is empty")]
    Empty,
    #[error("{0}")]
    InvalidArgument(String),
}

/// Aligned hourly series. The hour index is the position in each vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyTrace {
    load_kw: Vec<f64>,
    grid_price: Vec<f64>,
    pv_availability: Vec<f64>,
    diesel_price: Option<Vec<f64>>,
}

impl HourlyTrace {
    pub fn new(
        load_kw: Vec<f64>,
        grid_price: Vec<f64>,
        pv_availability: Vec<f64>,
        diesel_price: Option<Vec<f64>>,
    ) -> Result<Self, TraceError> {
        let mut lens = vec![load_kw.len(), grid_price.len(), pv_availability.len()];
        if let Some(d) = &diesel_price {
            lens.push(d.len());
        }
        if lens.iter().any(|&l| l != lens[0]) {
            return Err(TraceError::LengthMismatch(lens));
        }
        if load_kw.is_empty() {
            return Err(TraceError::Empty);
        }
        let check_finite = |series: &[f64], column: &str| -> Result<(), TraceError> {
            match series.iter().position(|v| !v.is_finite()) {
                Some(row) => Err(TraceError::NonFinite {
                    row,
                    column: column.to_string(),
                    value: series[row].to_string(),
                }),
                None => Ok(()),
            }
        };
        check_finite(&load_kw, "load_kw")?;
        check_finite(&grid_price, "grid_price")?;
        check_finite(&pv_availability, "pv_availability")?;
        if let Some(row) = load_kw.iter().position(|&v| v < 0.0) {
            return Err(TraceError::NegativeLoad { row, value: load_kw[row] });
        }
        if let Some(row) = grid_price.iter().position(|&v| v < 0.0) {
            return Err(TraceError::NegativePrice { row, value: grid_price[row] });
        }
        if let Some(row) = pv_availability.iter().position(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(TraceError::AvailabilityOutOfRange { row, value: pv_availability[row] });
        }
        if let Some(d) = &diesel_price {
            check_finite(d, "diesel_price")?;
            if let Some(row) = d.iter().position(|&v| v < 0.0) {
                return Err(TraceError::NegativePrice { row, value: d[row] });
            }
        }
        Ok(Self { load_kw, grid_price, pv_availability, diesel_price })
    }

    pub fn len(&self) -> usize {
        self.load_kw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load_kw.is_empty()
    }

    pub fn load_kw(&self) -> &[f64] {
        &self.load_kw
    }

    pub fn grid_price(&self) -> &[f64] {
        &self.grid_price
    }

    pub fn pv_availability(&self) -> &[f64] {
        &self.pv_availability
    }

    /// Optional per-hour diesel price overriding the constant one.
    pub fn diesel_price(&self) -> Option<&[f64]> {
        self.diesel_price.as_deref()
    }

    pub fn peak_load(&self) -> f64 {
        self.load_kw.iter().copied().fold(0.0, f64::max)
    }

    /// Energy demanded over the whole trace, kWh (one-hour steps).
    pub fn energy_kwh(&self) -> f64 {
        self.load_kw.iter().sum()
    }

    /// Sub-trace covering `window`.
    pub fn slice(&self, window: Window) -> HourlyTrace {
        let r = window.range();
        HourlyTrace {
            load_kw: self.load_kw[r.clone()].to_vec(),
            grid_price: self.grid_price[r.clone()].to_vec(),
            pv_availability: self.pv_availability[r.clone()].to_vec(),
            diesel_price: self.diesel_price.as_ref().map(|d| d[r].to_vec()),
        }
    }

    /// Writes the canonical CSV (`hour,load_kw,grid_price,pv_availability`
    /// plus `diesel_price` when present).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), TraceError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["hour", "load_kw", "grid_price", "pv_availability"];
        if self.diesel_price.is_some() {
            header.push("diesel_price");
        }
        out.write_record(&header)?;
        for t in 0..self.len() {
            let mut rec = vec![
                t.to_string(),
                self.load_kw[t].to_string(),
                self.grid_price[t].to_string(),
                self.pv_availability[t].to_string(),
            ];
            if let Some(d) = &self.diesel_price {
                rec.push(d[t].to_string());
            }
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| TraceError::Csv(e.into()))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), TraceError> {
        let f = File::create(path).map_err(|source| TraceError::Open { path: path.display().to_string(), source })?;
        self.write_csv(io::BufWriter::new(f))
    }
}

/// Column names and PV conversion settings for [`load_trace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceFormat {
    pub hour: String,
    pub load: String,
    pub grid_price: String,
    pub availability: String,
    pub irradiance: String,
    pub diesel_price: String,
    /// Irradiance at standard test conditions, W/m².
    pub stc_irradiance: f64,
    pub derate: f64,
}

impl Default for TraceFormat {
    fn default() -> Self {
        Self {
            hour: "hour".into(),
            load: "load_kw".into(),
            grid_price: "grid_price".into(),
            availability: "pv_availability".into(),
            irradiance: "irradiance_wm2".into(),
            diesel_price: "diesel_price".into(),
            stc_irradiance: 1000.0,
            derate: 0.9,
        }
    }
}

/// Reads and validates a trace file. When the availability column is absent
/// but an irradiance column is present, availability is derived with
/// [`irradiance_to_availability`].
pub fn load_trace(path: &Path, format: &TraceFormat) -> Result<HourlyTrace, TraceError> {
    let f = File::open(path).map_err(|source| TraceError::Open { path: path.display().to_string(), source })?;
    read_trace(io::BufReader::new(f), format)
}

pub fn read_trace<R: Read>(reader: R, format: &TraceFormat) -> Result<HourlyTrace, TraceError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| TraceError::MissingColumn(name.to_string()));

    let hour_col = need(&format.hour)?;
    let load_col = need(&format.load)?;
    let price_col = need(&format.grid_price)?;
    let avail_col = col(&format.availability);
    let irr_col = col(&format.irradiance);
    let diesel_col = col(&format.diesel_price);
    let (pv_col, pv_name, is_irradiance) = match (avail_col, irr_col) {
        (Some(c), _) => (c, format.availability.as_str(), false),
        (None, Some(c)) => (c, format.irradiance.as_str(), true),
        (None, None) => return Err(TraceError::MissingColumn(format.availability.clone())),
    };

    let mut load = Vec::new();
    let mut price = Vec::new();
    let mut pv = Vec::new();
    let mut diesel = diesel_col.map(|_| Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(TraceError::Ragged { row, expected: headers.len(), found: rec.len() });
        }
        let num = |c: usize, name: &str| -> Result<f64, TraceError> {
            let raw = &rec[c];
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(TraceError::NonFinite { row, column: name.to_string(), value: raw.to_string() }),
            }
        };
        match rec[hour_col].parse::<usize>() {
            Ok(h) if h == row => {}
            _ => return Err(TraceError::HourMismatch { row, found: rec[hour_col].to_string() }),
        }
        load.push(num(load_col, &format.load)?);
        price.push(num(price_col, &format.grid_price)?);
        pv.push(num(pv_col, pv_name)?);
        if let (Some(d), Some(c)) = (diesel.as_mut(), diesel_col) {
            d.push(num(c, &format.diesel_price)?);
        }
    }
    if is_irradiance {
        pv = irradiance_to_availability(&pv, format.stc_irradiance, format.derate)?;
    }
    HourlyTrace::new(load, price, pv, diesel)
}

/// Linear derate model: `min(1, derate * G / G_stc)`, clamped to `[0, 1]`.
pub fn irradiance_to_availability(irradiance_wm2: &[f64], stc_irradiance: f64, derate: f64) -> Result<Vec<f64>, TraceError> {
    if !(stc_irradiance.is_finite() && stc_irradiance > 0.0) {
        return Err(TraceError::InvalidArgument(format!("STC irradiance must be positive, got {stc_irradiance}")));
    }
    if !(derate > 0.0 && derate <= 1.0) {
        return Err(TraceError::InvalidArgument(format!("derate must be in (0, 1], got {derate}")));
    }
    irradiance_wm2
        .iter()
        .enumerate()
        .map(|(row, &g)| {
            if g.is_finite() {
                Ok((derate * g / stc_irradiance).clamp(0.0, 1.0))
            } else {
                Err(TraceError::NonFinite { row, column: "irradiance".into(), value: g.to_string() })
            }
        })
        .collect()
}

/// A contiguous block of hours `[start, start + len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: usize,
    pub len: usize,
}

impl Window {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

pub const WEEK_HOURS: usize = 168;

/// Consecutive non-overlapping windows covering `[0, hours)`; the last one
/// may be shorter.
pub fn windows(hours: usize, length: usize) -> Result<Vec<Window>, TraceError> {
    if length == 0 {
        return Err(TraceError::InvalidArgument("window length must be at least 1".into()));
    }
    Ok((0..hours).step_by(length).map(|start| Window { start, len: length.min(hours - start) }).collect())
}

// Synthetic year shape.
const BASE_LOAD_KW: f64 = 420.0;
const MORNING_PEAK_KW: f64 = 220.0;
const EVENING_PEAK_KW: f64 = 380.0;
const OFF_PEAK_PRICE: f64 = 0.10;
const PEAK_PRICE: f64 = 0.34;
const PEAK_HOURS: std::ops::Range<usize> = 8..22;

/// Deterministic synthetic trace: sinusoidal daylight PV with daily cloud
/// cover, a double-peaked load with noise, and a two-tier time-of-use grid
/// price. The same seed always yields the same trace.
pub fn synth_trace(seed: u64, hours: usize) -> Result<HourlyTrace, TraceError> {
    if hours == 0 {
        return Err(TraceError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut load = Vec::with_capacity(hours);
    let mut price = Vec::with_capacity(hours);
    let mut avail = Vec::with_capacity(hours);
    let mut cloud = 1.0;
    for h in 0..hours {
        let hod = h % 24;
        let day = h / 24;
        if hod == 0 {
            cloud = rng.gen_range(0.35..1.0);
        }
        // +1 at the June solstice, -1 at the December one.
        let season = (2.0 * std::f64::consts::PI * ((day % 365) as f64 - 172.0) / 365.0).cos();

        let day_length = 12.0 + 3.0 * season;
        let sunrise = 12.0 - day_length / 2.0;
        let t = hod as f64 + 0.5 - sunrise;
        let pv = if t > 0.0 && t < day_length {
            let clear = 0.78 + 0.12 * season;
            let shape = (std::f64::consts::PI * t / day_length).sin();
            (clear * shape * cloud * (1.0 + 0.04 * noise.sample(&mut rng))).clamp(0.0, 1.0)
        } else {
            0.0
        };

        let hf = hod as f64;
        let bump = |center: f64, width: f64| (-0.5 * ((hf - center) / width).powi(2)).exp();
        let shape = BASE_LOAD_KW + MORNING_PEAK_KW * bump(8.0, 1.5) + EVENING_PEAK_KW * bump(19.5, 2.0);
        let seasonal = 1.0 + 0.15 * season.abs();
        let l = (shape * seasonal * (1.0 + 0.05 * noise.sample(&mut rng))).max(0.0);

        load.push(l);
        avail.push(pv);
        price.push(if PEAK_HOURS.contains(&hod) { PEAK_PRICE } else { OFF_PEAK_PRICE });
    }
    HourlyTrace::new(load, price, avail, None)
}
