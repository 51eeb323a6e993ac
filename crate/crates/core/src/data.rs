//! Rate surfaces: CSV ingestion, validation and year-range splits.
//!
//! Surfaces are read from long-format CSV with the header `year,age,rate`,
//! one row per (year, age) cell. The year and age axes are consecutive
//! integer ranges and every cell must be present exactly once.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Floor used when flooring is switched on without an explicit value.
pub const DEFAULT_FLOOR: f64 = 1e-6;

/// Rectangular grid of strictly positive rates, rows are years and columns
/// are ages.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeRateSurface {
    first_year: i32,
    first_age: i32,
    rates: DMatrix<f64>,
}

impl AgeRateSurface {
    pub fn new(first_year: i32, first_age: i32, rates: DMatrix<f64>) -> Result<Self> {
        if rates.nrows() == 0 || rates.ncols() == 0 {
            return Err(Error::data(None, "surface must have at least one year and one age"));
        }
        for (idx, &r) in rates.iter().enumerate() {
            if !(r.is_finite() && r > 0.0) {
                // column-major storage
                let (t, a) = (idx % rates.nrows(), idx / rates.nrows());
                return Err(Error::data(
                    None,
                    format!(
                        "rate {r} at year {}, age {} is not strictly positive",
                        first_year + t as i32,
                        first_age + a as i32
                    ),
                ));
            }
        }
        Ok(AgeRateSurface {
            first_year,
            first_age,
            rates,
        })
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn n_years(&self) -> usize {
        self.rates.nrows()
    }

    pub fn n_ages(&self) -> usize {
        self.rates.ncols()
    }

    pub fn first_year(&self) -> i32 {
        self.first_year
    }

    pub fn last_year(&self) -> i32 {
        self.first_year + self.n_years() as i32 - 1
    }

    pub fn first_age(&self) -> i32 {
        self.first_age
    }

    pub fn years(&self) -> Vec<i32> {
        (self.first_year..=self.last_year()).collect()
    }

    pub fn ages(&self) -> Vec<i32> {
        (0..self.n_ages() as i32).map(|a| self.first_age + a).collect()
    }

    /// Row index of `year`, if it lies on the axis.
    pub fn year_index(&self, year: i32) -> Option<usize> {
        if year < self.first_year || year > self.last_year() {
            None
        } else {
            Some((year - self.first_year) as usize)
        }
    }

    pub fn rate(&self, year: i32, age: i32) -> Option<f64> {
        let t = self.year_index(year)?;
        let a = age.checked_sub(self.first_age)?;
        if a < 0 || a as usize >= self.n_ages() {
            return None;
        }
        Some(self.rates[(t, a as usize)])
    }

    /// Sub-surface covering `from..=to` (inclusive years).
    pub fn years_between(&self, from: i32, to: i32) -> Result<AgeRateSurface> {
        let (Some(i0), Some(i1)) = (self.year_index(from), self.year_index(to)) else {
            return Err(Error::invalid(format!(
                "year range {from}..={to} is outside {}..={}",
                self.first_year,
                self.last_year()
            )));
        };
        if i1 < i0 {
            return Err(Error::invalid(format!("empty year range {from}..={to}")));
        }
        Ok(AgeRateSurface {
            first_year: from,
            first_age: self.first_age,
            rates: self.rates.rows(i0, i1 - i0 + 1).into_owned(),
        })
    }

    /// Sub-surface from the first year up to and including `to`.
    pub fn years_through(&self, to: i32) -> Result<AgeRateSurface> {
        self.years_between(self.first_year, to)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LoadOptions {
    /// When set, rates below this value (including zeros) are raised to it.
    pub floor: Option<f64>,
}

impl LoadOptions {
    pub fn with_floor(floor: f64) -> Self {
        LoadOptions { floor: Some(floor) }
    }
}

/// Reads a long-format `year,age,rate` CSV into a validated surface.
pub fn load_rates<R: Read>(source: R, options: &LoadOptions) -> Result<AgeRateSurface> {
    if let Some(floor) = options.floor {
        if !(floor.is_finite() && floor > 0.0) {
            return Err(Error::invalid(format!("floor must be a positive number, got {floor}")));
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let header = reader
        .headers()
        .map_err(|e| Error::data(Some(1), e.to_string()))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    if names != ["year", "age", "rate"] {
        return Err(Error::data(
            Some(1),
            format!("expected header `year,age,rate`, found `{}`", names.join(",")),
        ));
    }

    let mut cells: BTreeMap<(i32, i32), f64> = BTreeMap::new();
    let mut rows: BTreeMap<(i32, i32), usize> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize);
            Error::data(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize);
        if record.len() != 3 {
            return Err(Error::data(line, format!("expected 3 fields, found {}", record.len())));
        }
        let year: i32 = record[0]
            .parse()
            .map_err(|_| Error::data(line, format!("year `{}` is not an integer", &record[0])))?;
        let age: i32 = record[1]
            .parse()
            .map_err(|_| Error::data(line, format!("age `{}` is not an integer", &record[1])))?;
        let mut rate: f64 = record[2]
            .parse()
            .map_err(|_| Error::data(line, format!("rate `{}` is not a number", &record[2])))?;
        if !rate.is_finite() {
            return Err(Error::data(line, format!("rate `{}` is not finite", &record[2])));
        }
        match options.floor {
            Some(floor) if rate < floor => rate = floor,
            None if rate <= 0.0 => {
                return Err(Error::data(
                    line,
                    format!("rate {rate} for year {year}, age {age} is not strictly positive"),
                ))
            }
            _ => {}
        }
        if let Some(first) = rows.get(&(year, age)) {
            return Err(Error::data(
                line,
                format!("duplicate cell year {year}, age {age} (first seen at line {first})"),
            ));
        }
        rows.insert((year, age), line.unwrap_or(0));
        cells.insert((year, age), rate);
    }

    if cells.is_empty() {
        return Err(Error::data(None, "no data rows"));
    }
    let (y0, y1) = min_max(cells.keys().map(|k| k.0));
    let (a0, a1) = min_max(cells.keys().map(|k| k.1));
    let n_years = (y1 - y0 + 1) as usize;
    let n_ages = (a1 - a0 + 1) as usize;

    let mut rates = DMatrix::zeros(n_years, n_ages);
    for (t, year) in (y0..=y1).enumerate() {
        for (a, age) in (a0..=a1).enumerate() {
            match cells.get(&(year, age)) {
                Some(&r) => rates[(t, a)] = r,
                None => {
                    return Err(Error::data(
                        None,
                        format!("missing cell for year {year}, age {age}"),
                    ))
                }
            }
        }
    }
    AgeRateSurface::new(y0, a0, rates)
}

/// Writes `surface` as `year,age,rate` rows in year-major order. Rates use
/// the shortest representation that parses back to the same `f64`.
pub fn write_rates<W: Write>(surface: &AgeRateSurface, sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    let io = |e: csv::Error| Error::data(None, e.to_string());
    writer.write_record(["year", "age", "rate"]).map_err(io)?;
    for (t, year) in surface.years().into_iter().enumerate() {
        for (a, age) in surface.ages().into_iter().enumerate() {
            writer
                .write_record([
                    year.to_string(),
                    age.to_string(),
                    surface.rates[(t, a)].to_string(),
                ])
                .map_err(io)?;
        }
    }
    writer.flush().map_err(|e| Error::data(None, e.to_string()))?;
    Ok(())
}

fn min_max(values: impl Iterator<Item = i32>) -> (i32, i32) {
    values.fold((i32::MAX, i32::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Year boundaries of the training, validation and test samples. Each end
/// year is inclusive; the training sample starts at the surface's first year.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleSplit {
    pub training_end_year: i32,
    pub validation_end_year: i32,
    pub test_end_year: i32,
}

impl SampleSplit {
    pub fn validation_years(&self) -> usize {
        (self.validation_end_year - self.training_end_year) as usize
    }

    pub fn test_years(&self) -> usize {
        (self.test_end_year - self.validation_end_year) as usize
    }
}

/// Minimum length of the training sample produced by a split.
pub const MIN_TRAINING_YEARS: usize = 5;

/// Splits the year axis into training / validation / test samples. The test
/// sample is the last `round(test_fraction * n_years)` years (halves round
/// up) and the validation sample has the same length.
pub fn split_by_fraction(surface: &AgeRateSurface, test_fraction: f64) -> Result<SampleSplit> {
    if !(test_fraction > 0.0 && test_fraction < 0.5) {
        return Err(Error::invalid(format!(
            "test fraction must lie in (0, 0.5), got {test_fraction}"
        )));
    }
    let n = surface.n_years();
    if n < 10 {
        return Err(Error::invalid(format!("need at least 10 years to split, got {n}")));
    }
    let held_out = (test_fraction * n as f64 + 0.5).floor() as usize;
    if held_out == 0 {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} leaves an empty test sample for {n} years"
        )));
    }
    let training = n.saturating_sub(2 * held_out);
    if training < MIN_TRAINING_YEARS {
        return Err(Error::invalid(format!(
            "training sample would have {training} years, need at least {MIN_TRAINING_YEARS}"
        )));
    }
    let first = surface.first_year();
    Ok(SampleSplit {
        training_end_year: first + training as i32 - 1,
        validation_end_year: first + (training + held_out) as i32 - 1,
        test_end_year: surface.last_year(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, options: LoadOptions) -> Result<AgeRateSurface> {
        load_rates(text.as_bytes(), &options)
    }

    fn constant_surface(first_year: i32, n_years: usize) -> AgeRateSurface {
        AgeRateSurface::new(first_year, 15, DMatrix::from_element(n_years, 35, 0.1)).unwrap()
    }

    #[test]
    fn loads_rectangular_surface() {
        let csv = "year,age,rate\n2000,20,0.1\n2000,21,0.2\n2001,20,0.11\n2001,21,0.21\n2002,20,0.12\n2002,21,0.22\n";
        let s = parse(csv, LoadOptions::default()).unwrap();
        assert_eq!((s.n_years(), s.n_ages()), (3, 2));
        assert_eq!(s.rate(2001, 21), Some(0.21));
        assert_eq!(s.years(), vec![2000, 2001, 2002]);
        assert_eq!(s.ages(), vec![20, 21]);
    }

    #[test]
    fn zero_rate_is_floored_when_enabled() {
        let csv = "year,age,rate\n2000,20,0\n2000,21,0.2\n";
        let s = parse(csv, LoadOptions::with_floor(1e-6)).unwrap();
        assert_eq!(s.rate(2000, 20), Some(1e-6));
        assert_eq!(s.rate(2000, 21), Some(0.2));
    }

    #[test]
    fn zero_rate_is_rejected_without_floor() {
        let csv = "year,age,rate\n2000,20,0.1\n2000,21,0\n";
        let err = parse(csv, LoadOptions::default()).unwrap_err();
        match err {
            Error::Data { row, .. } => assert_eq!(row, Some(3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_cell_names_the_pair() {
        let csv = "year,age,rate\n2000,20,0.1\n2000,21,0.2\n2001,20,0.1\n";
        let err = parse(csv, LoadOptions::default()).unwrap_err().to_string();
        assert!(err.contains("year 2001, age 21"), "{err}");
    }

    #[test]
    fn duplicate_and_non_numeric_rows_report_line() {
        let dup = "year,age,rate\n2000,20,0.1\n2000,20,0.2\n";
        let err = parse(dup, LoadOptions::default()).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("duplicate"), "{err}");

        let bad = "year,age,rate\n2000,20,abc\n";
        let err = parse(bad, LoadOptions::default()).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("abc"), "{err}");
    }

    #[test]
    fn wrong_header_rejected() {
        let err = parse("yr,age,rate\n2000,20,0.1\n", LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Data { row: Some(1), .. }));
    }

    #[test]
    fn paper_split_of_86_years() {
        let s = constant_surface(1921, 86);
        let split = split_by_fraction(&s, 0.2).unwrap();
        assert_eq!(split.training_end_year, 1972);
        assert_eq!(split.validation_end_year, 1989);
        assert_eq!(split.test_end_year, 2006);
        assert_eq!(split.validation_years(), 17);
        assert_eq!(split.test_years(), 17);
    }

    #[test]
    fn ten_year_split() {
        let s = constant_surface(2000, 10);
        let split = split_by_fraction(&s, 0.2).unwrap();
        assert_eq!(split.training_end_year - 2000 + 1, 6);
        assert_eq!(split.validation_years(), 2);
        assert_eq!(split.test_years(), 2);
    }

    #[test]
    fn split_rejects_short_training() {
        let s = constant_surface(1921, 86);
        assert!(split_by_fraction(&s, 0.49).is_err());
        assert!(split_by_fraction(&s, 0.5).is_err());
        assert!(split_by_fraction(&s, 0.0).is_err());
        assert!(split_by_fraction(&constant_surface(2000, 9), 0.2).is_err());
    }

    #[test]
    fn sub_surfaces() {
        let s = constant_surface(1921, 86);
        let head = s.years_through(1972).unwrap();
        assert_eq!(head.n_years(), 52);
        assert_eq!(head.last_year(), 1972);
        let mid = s.years_between(1973, 1989).unwrap();
        assert_eq!(mid.first_year(), 1973);
        assert_eq!(mid.n_years(), 17);
        assert!(s.years_through(2007).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn csv_round_trip(
                n_years in 1usize..6,
                n_ages in 1usize..6,
                first_year in 1900i32..2000,
                first_age in 0i32..50,
                seed in proptest::collection::vec(1e-9f64..10.0, 36),
            ) {
                let rates = DMatrix::from_fn(n_years, n_ages, |t, a| seed[t * 6 + a]);
                let surface = AgeRateSurface::new(first_year, first_age, rates).unwrap();
                let mut buf = Vec::new();
                write_rates(&surface, &mut buf).unwrap();
                let back = load_rates(buf.as_slice(), &LoadOptions::default()).unwrap();
                prop_assert_eq!(back, surface);
            }

            #[test]
            fn split_partitions_years(n in 10usize..200, frac in 0.01f64..0.49) {
                let surface = AgeRateSurface::new(1900, 15, DMatrix::from_element(n, 2, 0.1)).unwrap();
                if let Ok(split) = split_by_fraction(&surface, frac) {
                    let training = (split.training_end_year - 1900 + 1) as usize;
                    prop_assert_eq!(training + split.validation_years() + split.test_years(), n);
                    prop_assert_eq!(split.validation_years(), split.test_years());
                    prop_assert!(training >= MIN_TRAINING_YEARS);
                    prop_assert!(split.test_years() >= 1);
                }
            }
        }
    }
}
