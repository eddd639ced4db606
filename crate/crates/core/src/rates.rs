//! Monthly base-rate series and the `YYYY-MM` month type.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// US effective federal funds rate, January 1973 to December 2011, monthly
/// values interpolated from annual averages.
const BUNDLED_US_RATES: &str = include_str!("../data/us_base_rate_1973_2011.csv");

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    /// 1-based month.
    pub month: u8,
}

impl YearMonth {
    pub const fn new(year: i32, month: u8) -> Self {
        Self { year, month }
    }

    fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    fn from_ordinal(n: i64) -> Self {
        Self {
            year: n.div_euclid(12) as i32,
            month: (n.rem_euclid(12) + 1) as u8,
        }
    }

    /// Months from `self` to `later`; negative if `later` is earlier.
    pub fn months_until(self, later: YearMonth) -> i64 {
        later.ordinal() - self.ordinal()
    }

    pub fn plus_months(self, n: i64) -> Self {
        Self::from_ordinal(self.ordinal() + n)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Data(format!("`{s}` is not a YYYY-MM month"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u8 = m.parse().map_err(|_| bad())?;
        if y.len() != 4 || m.len() != 2 || !(1..=12).contains(&month) {
            return Err(bad());
        }
        Ok(Self { year, month })
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordered `(month, rate)` pairs with contiguous months.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSeries {
    entries: Vec<(YearMonth, f64)>,
}

#[derive(Deserialize)]
struct RateRow {
    month: String,
    rate: f64,
}

impl RateSeries {
    pub fn new(entries: Vec<(YearMonth, f64)>) -> Result<Self> {
        for w in entries.windows(2) {
            if w[0].0.months_until(w[1].0) != 1 {
                return Err(Error::Data(format!(
                    "rate months not contiguous: {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some((m, r)) = entries.iter().find(|(_, r)| !(*r > -1.0) || !r.is_finite()) {
            return Err(Error::Data(format!("rate {r} at {m} must exceed -1")));
        }
        Ok(Self { entries })
    }

    /// Parses the `month,rate` CSV format.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["month", "rate"] {
            return Err(Error::Data(format!(
                "rate CSV header must be `month,rate`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut entries = Vec::new();
        for (line, row) in rdr.deserialize::<RateRow>().enumerate() {
            let row = row.map_err(|e| Error::Data(format!("rate CSV row {}: {e}", line + 2)))?;
            entries.push((row.month.parse()?, row.rate));
        }
        Self::new(entries)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn bundled_us() -> Self {
        Self::from_reader(BUNDLED_US_RATES.as_bytes()).expect("bundled rate series parses")
    }

    pub fn entries(&self) -> &[(YearMonth, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, month: YearMonth) -> Option<f64> {
        let first = self.entries.first()?.0;
        let i = first.months_until(month);
        if i < 0 {
            return None;
        }
        self.entries.get(i as usize).map(|e| e.1)
    }

    /// Rates for every month of `start..=end`, failing on the first gap.
    pub fn window(&self, start: YearMonth, end: YearMonth) -> Result<Vec<f64>> {
        let n = start.months_until(end) + 1;
        (0..n.max(0))
            .map(|k| {
                let m = start.plus_months(k);
                self.get(m).ok_or_else(|| Error::MissingRate(m.to_string()))
            })
            .collect()
    }
}
