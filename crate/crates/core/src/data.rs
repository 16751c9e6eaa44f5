//! Bivariate datasets, conversion to competing-risks form, and the bundled
//! soccer data with its three censored subsets.

use std::io::{Read, Write};

use crate::censoring::CensoredSample;
use crate::distributions::Cause;
use crate::error::{Error, Result};

const SOCCER_CSV: &str = include_str!("../data/soccer.csv");
const DATA1_CSV: &str = include_str!("../data/data1.csv");
const DATA2_CSV: &str = include_str!("../data/data2.csv");
const DATA3_CSV: &str = include_str!("../data/data3.csv");

#[derive(Debug, Clone, PartialEq)]
pub struct BivariateDataset {
    pub pairs: Vec<(f64, f64)>,
    /// Divisor already applied to the raw times.
    pub divisor: f64,
}

impl BivariateDataset {
    pub fn new(pairs: Vec<(f64, f64)>, divisor: f64) -> Result<Self> {
        if !(divisor > 0.0) {
            return Err(Error::Parse(format!("normalisation divisor must be > 0, got {divisor}")));
        }
        if let Some(p) = pairs
            .iter()
            .find(|(a, b)| !(a.is_finite() && b.is_finite() && *a > 0.0 && *b > 0.0))
        {
            return Err(Error::Parse(format!("lifetimes must be positive, got {p:?}")));
        }
        Ok(BivariateDataset { pairs, divisor })
    }

    /// Divides raw times by `divisor`.
    pub fn normalized(raw: Vec<(f64, f64)>, divisor: f64) -> Result<Self> {
        let pairs = raw.into_iter().map(|(a, b)| (a / divisor, b / divisor)).collect();
        Self::new(pairs, divisor)
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(input);
        let mut pairs = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let get = |i: usize| -> Result<f64> {
                let f = rec.get(i).ok_or_else(|| Error::Parse("expected two columns y1,y2".into()))?;
                f.parse().map_err(|e| Error::Parse(format!("bad lifetime `{f}`: {e}")))
            };
            pairs.push((get(0)?, get(1)?));
        }
        Self::new(pairs, 1.0)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["y1", "y2"])?;
        for (a, b) in &self.pairs {
            w.write_record(&[a.to_string(), b.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn first(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    pub fn second(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.1).collect()
    }

    pub fn minima(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.0.min(p.1)).collect()
    }
}

/// `(min(y1, y2), cause)` for each pair, in input order.
pub fn to_competing_risks(d: &BivariateDataset) -> Vec<(f64, Cause)> {
    d.pairs
        .iter()
        .map(|&(a, b)| (a.min(b), Cause::from_pair(a, b)))
        .collect()
}

/// Inverse of [`to_competing_risks`] for simultaneous failures only.
pub fn from_competing_risks(rows: &[(f64, Cause)]) -> Result<BivariateDataset> {
    let pairs = rows
        .iter()
        .map(|&(y, c)| match c {
            Cause::Simultaneous => Ok((y, y)),
            other => Err(Error::Parse(format!(
                "cause {} does not determine the other lifetime",
                other.code()
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    BivariateDataset::new(pairs, 1.0)
}

pub fn write_competing_risks_csv<W: Write>(rows: &[(f64, Cause)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["y", "delta", "removal"])?;
    for (y, c) in rows {
        w.write_record(&[y.to_string(), c.code().to_string(), "0".to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_competing_risks_csv<R: Read>(input: R) -> Result<Vec<(f64, Cause)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let y: f64 = rec
            .get(0)
            .unwrap_or("")
            .parse()
            .map_err(|e| Error::Parse(format!("bad time: {e}")))?;
        let d: u8 = rec
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|e| Error::Parse(format!("bad cause: {e}")))?;
        out.push((y, Cause::from_code(d)?));
    }
    Ok(out)
}

/// The 37 soccer matches, already divided by 90.
pub fn soccer() -> BivariateDataset {
    let mut d = BivariateDataset::read_csv(SOCCER_CSV.as_bytes()).expect("bundled soccer data parses");
    d.divisor = 90.0;
    d
}

/// Censored subsets I, II and III of the soccer data.
pub fn soccer_censored(which: usize) -> Result<CensoredSample> {
    let text = match which {
        1 => DATA1_CSV,
        2 => DATA2_CSV,
        3 => DATA3_CSV,
        other => return Err(Error::Domain(format!("no bundled dataset {other}; use 1, 2 or 3"))),
    };
    CensoredSample::read_csv(text.as_bytes())
}
