//! Bivariate censored survival observations: CSV ingestion, covariate
//! standardization and without-replacement subsampling.

use crate::error::{Error, Result};
use crate::stats;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Censoring status of one margin of one unit.
///
/// `Interval` requires a finite upper bound strictly greater than the lower
/// bound; `Right` and `Uncensored` carry only the lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CensorCode {
    Uncensored,
    Right,
    Interval,
}

impl CensorCode {
    pub fn from_code(s: &str) -> Option<CensorCode> {
        match s.trim() {
            "U" => Some(CensorCode::Uncensored),
            "R" => Some(CensorCode::Right),
            "I" => Some(CensorCode::Interval),
            _ => None,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CensorCode::Uncensored => "U",
            CensorCode::Right => "R",
            CensorCode::Interval => "I",
        }
    }
}

/// Column-name mapping for [`parse_dataset`]. Any header column not named
/// here is treated as a numeric covariate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataSchema {
    pub t1_lower: String,
    pub t1_upper: String,
    pub t2_lower: String,
    pub t2_upper: String,
    pub cens1: String,
    pub cens2: String,
}

impl Default for DataSchema {
    fn default() -> Self {
        DataSchema {
            t1_lower: "t11".into(),
            t1_upper: "t12".into(),
            t2_lower: "t21".into(),
            t2_upper: "t22".into(),
            cens1: "cens1".into(),
            cens2: "cens2".into(),
        }
    }
}

/// Immutable bivariate censored dataset with an n x p covariate matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub n: usize,
    pub p: usize,
    pub t1_lower: Vec<f64>,
    pub t1_upper: Vec<Option<f64>>,
    pub t2_lower: Vec<f64>,
    pub t2_upper: Vec<Option<f64>>,
    pub cens1: Vec<CensorCode>,
    pub cens2: Vec<CensorCode>,
    /// Row-major n x p matrix.
    pub x: Vec<f64>,
    pub names: Vec<String>,
}

impl Dataset {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        t1_lower: Vec<f64>,
        t1_upper: Vec<Option<f64>>,
        t2_lower: Vec<f64>,
        t2_upper: Vec<Option<f64>>,
        cens1: Vec<CensorCode>,
        cens2: Vec<CensorCode>,
        x: Vec<f64>,
        names: Vec<String>,
    ) -> Result<Dataset> {
        let n = t1_lower.len();
        let p = names.len();
        if t1_upper.len() != n
            || t2_lower.len() != n
            || t2_upper.len() != n
            || cens1.len() != n
            || cens2.len() != n
            || x.len() != n * p
        {
            return Err(Error::Dimension(format!(
                "inconsistent column lengths for n={n}, p={p}"
            )));
        }
        for j in 0..p {
            for k in (j + 1)..p {
                if names[j] == names[k] {
                    return Err(Error::InvalidData(format!(
                        "duplicate covariate label `{}`",
                        names[j]
                    )));
                }
            }
        }
        let d = Dataset {
            n,
            p,
            t1_lower,
            t1_upper,
            t2_lower,
            t2_upper,
            cens1,
            cens2,
            x,
            names,
        };
        for i in 0..n {
            d.validate_margin(i, 1)?;
            d.validate_margin(i, 2)?;
        }
        for (k, v) in d.x.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidData(format!(
                    "non-finite covariate entry at row {}, column `{}`",
                    k / p.max(1) + 1,
                    d.names[k % p.max(1)]
                )));
            }
        }
        Ok(d)
    }

    fn validate_margin(&self, i: usize, margin: u8) -> Result<()> {
        let (lo, up, code) = if margin == 1 {
            (self.t1_lower[i], self.t1_upper[i], self.cens1[i])
        } else {
            (self.t2_lower[i], self.t2_upper[i], self.cens2[i])
        };
        if !lo.is_finite() || lo < 0.0 {
            return Err(Error::InvalidData(format!(
                "row {}: margin {margin} lower time must be a nonnegative number, got {lo}",
                i + 1
            )));
        }
        match code {
            CensorCode::Interval => match up {
                Some(u) if u.is_finite() && u > lo => Ok(()),
                Some(u) => Err(Error::InvalidData(format!(
                    "row {}: margin {margin} interval upper bound {u} must exceed lower bound {lo}",
                    i + 1
                ))),
                None => Err(Error::InvalidData(format!(
                    "row {}: margin {margin} interval row missing upper bound",
                    i + 1
                ))),
            },
            _ => {
                if up.is_some() {
                    Err(Error::InvalidData(format!(
                        "row {}: margin {margin} {} row must not carry an upper bound",
                        i + 1,
                        code.code()
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    #[inline]
    pub fn xij(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.p + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.xij(i, j)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Materializes the rows named by a subsample.
    pub fn subset(&self, idx: &SubsampleIndex) -> Dataset {
        let m = idx.indices.len();
        let mut x = Vec::with_capacity(m * self.p);
        for &i in &idx.indices {
            x.extend_from_slice(self.row(i));
        }
        Dataset {
            n: m,
            p: self.p,
            t1_lower: idx.indices.iter().map(|&i| self.t1_lower[i]).collect(),
            t1_upper: idx.indices.iter().map(|&i| self.t1_upper[i]).collect(),
            t2_lower: idx.indices.iter().map(|&i| self.t2_lower[i]).collect(),
            t2_upper: idx.indices.iter().map(|&i| self.t2_upper[i]).collect(),
            cens1: idx.indices.iter().map(|&i| self.cens1[i]).collect(),
            cens2: idx.indices.iter().map(|&i| self.cens2[i]).collect(),
            x,
            names: self.names.clone(),
        }
    }

    /// Derived combined code such as "UU" or "IR"; never stored.
    pub fn combined_code(&self, i: usize) -> String {
        format!("{}{}", self.cens1[i].code(), self.cens2[i].code())
    }
}

/// Indices of one without-replacement subsample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsampleIndex {
    pub indices: Vec<usize>,
}

fn parse_time(field: &str, row: usize, column: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("expected a number, got `{}`", field.trim()),
    })
}

fn parse_opt_time(field: &str, row: usize, column: &str) -> Result<Option<f64>> {
    let t = field.trim();
    if t.is_empty() || t == "NA" {
        return Ok(None);
    }
    parse_time(t, row, column).map(Some)
}

/// Reads a header CSV into a [`Dataset`]. Censor codes are decoded from
/// {U, R, I}; empty or `NA` upper-bound fields map to absent.
pub fn parse_dataset(path: &Path, schema: &DataSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();

    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidData(format!("missing required column `{name}`")))
    };
    let c_t1l = find(&schema.t1_lower)?;
    let c_t1u = find(&schema.t1_upper)?;
    let c_t2l = find(&schema.t2_lower)?;
    let c_t2u = find(&schema.t2_upper)?;
    let c_c1 = find(&schema.cens1)?;
    let c_c2 = find(&schema.cens2)?;
    let reserved = [c_t1l, c_t1u, c_t2l, c_t2u, c_c1, c_c2];

    let covariate_cols: Vec<usize> = (0..headers.len())
        .filter(|c| !reserved.contains(c))
        .collect();
    let names: Vec<String> = covariate_cols.iter().map(|&c| headers[c].clone()).collect();

    let mut t1_lower = Vec::new();
    let mut t1_upper = Vec::new();
    let mut t2_lower = Vec::new();
    let mut t2_upper = Vec::new();
    let mut cens1 = Vec::new();
    let mut cens2 = Vec::new();
    let mut x = Vec::new();

    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let get = |c: usize| record.get(c).unwrap_or("");

        let code1 = CensorCode::from_code(get(c_c1)).ok_or_else(|| Error::Parse {
            row,
            column: schema.cens1.clone(),
            message: format!("unknown censor code `{}`", get(c_c1).trim()),
        })?;
        let code2 = CensorCode::from_code(get(c_c2)).ok_or_else(|| Error::Parse {
            row,
            column: schema.cens2.clone(),
            message: format!("unknown censor code `{}`", get(c_c2).trim()),
        })?;

        t1_lower.push(parse_time(get(c_t1l), row, &schema.t1_lower)?);
        t1_upper.push(parse_opt_time(get(c_t1u), row, &schema.t1_upper)?);
        t2_lower.push(parse_time(get(c_t2l), row, &schema.t2_lower)?);
        t2_upper.push(parse_opt_time(get(c_t2u), row, &schema.t2_upper)?);
        cens1.push(code1);
        cens2.push(code2);

        if code1 == CensorCode::Interval && t1_upper.last().unwrap().is_none() {
            return Err(Error::Parse {
                row,
                column: schema.t1_upper.clone(),
                message: "interval row missing upper bound".into(),
            });
        }
        if code2 == CensorCode::Interval && t2_upper.last().unwrap().is_none() {
            return Err(Error::Parse {
                row,
                column: schema.t2_upper.clone(),
                message: "interval row missing upper bound".into(),
            });
        }

        for (&c, name) in covariate_cols.iter().zip(&names) {
            let v: f64 = get(c).trim().parse().map_err(|_| Error::Parse {
                row,
                column: name.clone(),
                message: format!("non-numeric covariate `{}`", get(c).trim()),
            })?;
            x.push(v);
        }
    }

    Dataset::new(t1_lower, t1_upper, t2_lower, t2_upper, cens1, cens2, x, names)
}

/// Writes a dataset back out in the same CSV layout `parse_dataset` reads.
pub fn write_dataset(d: &Dataset, schema: &DataSchema, w: &mut dyn Write) -> Result<()> {
    let mut header = vec![
        schema.t1_lower.clone(),
        schema.t1_upper.clone(),
        schema.t2_lower.clone(),
        schema.t2_upper.clone(),
        schema.cens1.clone(),
        schema.cens2.clone(),
    ];
    header.extend(d.names.iter().cloned());
    writeln!(w, "{}", header.join(","))?;
    let fmt_opt = |v: &Option<f64>| match v {
        Some(x) => format!("{x}"),
        None => "NA".to_string(),
    };
    for i in 0..d.n {
        let mut fields = vec![
            format!("{}", d.t1_lower[i]),
            fmt_opt(&d.t1_upper[i]),
            format!("{}", d.t2_lower[i]),
            fmt_opt(&d.t2_upper[i]),
            d.cens1[i].code().to_string(),
            d.cens2[i].code().to_string(),
        ];
        for j in 0..d.p {
            fields.push(format!("{}", d.xij(i, j)));
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Centers and scales the listed columns to sample mean 0 and sample
/// standard deviation 1. Other columns are unchanged.
pub fn standardize(d: &Dataset, columns: &[String]) -> Result<Dataset> {
    let mut out = d.clone();
    for name in columns {
        let j = d
            .column_index(name)
            .ok_or_else(|| Error::InvalidData(format!("unknown column `{name}`")))?;
        let col = d.column(j);
        let m = stats::mean(&col);
        let s = stats::sample_sd(&col);
        if !(s > 0.0) {
            return Err(Error::InvalidData(format!(
                "column `{name}` has zero variance; cannot standardize"
            )));
        }
        for i in 0..d.n {
            out.x[i * d.p + j] = (d.xij(i, j) - m) / s;
        }
    }
    Ok(out)
}

/// Chunks a uniform random permutation of 0..n-1 into r = floor(n/m)
/// disjoint subsamples of size m. Any remainder is left unused for this
/// replicate and re-randomized on the next call.
pub fn draw_subsamples<R: Rng>(d: &Dataset, m: usize, rng: &mut R) -> Result<Vec<SubsampleIndex>> {
    if m == 0 || m > d.n {
        return Err(Error::Config(format!(
            "subsample size m={m} must satisfy 1 <= m <= n={}",
            d.n
        )));
    }
    let r = d.n / m;
    let mut perm: Vec<usize> = (0..d.n).collect();
    perm.shuffle(rng);
    Ok((0..r)
        .map(|q| SubsampleIndex {
            indices: perm[q * m..(q + 1) * m].to_vec(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn write_temp(content: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir();
        let path = dir.join(format!(
            "bivsurv_data_test_{}_{}.csv",
            std::process::id(),
            content.len()
        ));
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn parse_interval_and_right_rows() {
        let path = write_temp(
            "t11,t12,t21,t22,cens1,cens2,age\n\
             0.0001,2.0,0.0001,2.0,I,I,61.5\n\
             10.0,NA,10.0,NA,R,R,70.1\n",
        );
        let d = parse_dataset(&path, &DataSchema::default()).unwrap();
        assert_eq!(d.n, 2);
        assert_eq!(d.p, 1);
        assert_eq!(d.cens1[0], CensorCode::Interval);
        assert_eq!(d.t1_lower[0], 0.0001);
        assert_eq!(d.t1_upper[0], Some(2.0));
        assert_eq!(d.cens1[1], CensorCode::Right);
        assert_eq!(d.t1_lower[1], 10.0);
        assert_eq!(d.t1_upper[1], None);
        assert_eq!(d.combined_code(0), "II");
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn parse_rejects_unknown_censor_code() {
        let path = write_temp(
            "t11,t12,t21,t22,cens1,cens2\n\
             1.0,NA,1.0,NA,Q,U\n",
        );
        let err = parse_dataset(&path, &DataSchema::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown censor code"), "{msg}");
        assert!(msg.contains("row 1"), "{msg}");
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn parse_rejects_interval_without_upper() {
        let path = write_temp(
            "t11,t12,t21,t22,cens1,cens2\n\
             1.0,NA,1.0,NA,I,U\n",
        );
        let err = parse_dataset(&path, &DataSchema::default()).unwrap_err();
        assert!(err.to_string().contains("missing upper bound"));
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn parse_rejects_non_numeric_covariate() {
        let path = write_temp(
            "t11,t12,t21,t22,cens1,cens2,z\n\
             1.0,NA,1.0,NA,U,U,abc\n",
        );
        let err = parse_dataset(&path, &DataSchema::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 1") && msg.contains('z'), "{msg}");
        std::fs::remove_file(path).ok();
    }

    fn toy(xcol: Vec<f64>) -> Dataset {
        let n = xcol.len();
        Dataset::new(
            vec![1.0; n],
            vec![None; n],
            vec![1.0; n],
            vec![None; n],
            vec![CensorCode::Uncensored; n],
            vec![CensorCode::Uncensored; n],
            xcol,
            vec!["z".into()],
        )
        .unwrap()
    }

    #[test]
    fn standardize_basic_and_idempotent() {
        let d = toy(vec![1.0, 2.0, 3.0]);
        let s = standardize(&d, &["z".into()]).unwrap();
        assert_eq!(s.column(0), vec![-1.0, 0.0, 1.0]);
        let again = standardize(&s, &["z".into()]).unwrap();
        for (a, b) in again.column(0).iter().zip(s.column(0)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn standardize_rejects_constant_column() {
        let d = toy(vec![5.0, 5.0, 5.0]);
        assert!(standardize(&d, &["z".into()]).is_err());
    }

    #[test]
    fn subsamples_disjoint_and_deterministic() {
        let d = toy((0..629).map(|i| i as f64).collect());
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let subs = draw_subsamples(&d, 314, &mut rng).unwrap();
        assert_eq!(subs.len(), 2);
        assert!(subs.iter().all(|s| s.indices.len() == 314));
        let mut all: Vec<usize> = subs.iter().flat_map(|s| s.indices.clone()).collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 628); // one unit unused

        let mut rng2 = ChaCha12Rng::seed_from_u64(9);
        let subs2 = draw_subsamples(&d, 314, &mut rng2).unwrap();
        assert_eq!(subs, subs2);
    }

    #[test]
    fn subsample_full_sample_and_errors() {
        let d = toy(vec![0.0, 1.0, 2.0, 3.0]);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let subs = draw_subsamples(&d, 4, &mut rng).unwrap();
        assert_eq!(subs.len(), 1);
        let mut idx = subs[0].indices.clone();
        idx.sort_unstable();
        assert_eq!(idx, vec![0, 1, 2, 3]);
        assert!(draw_subsamples(&d, 5, &mut rng).is_err());
    }

    #[test]
    fn standardize_preserves_rank_order() {
        use proptest::prelude::*;
        let mut runner = proptest::test_runner::TestRunner::default();
        runner
            .run(
                &proptest::collection::vec(-50.0f64..50.0, 3..20),
                |col| {
                    // Skip degenerate constant columns.
                    let distinct = col.iter().any(|v| *v != col[0]);
                    prop_assume!(distinct);
                    let d = toy(col.clone());
                    let s = standardize(&d, &["z".into()]).unwrap();
                    let sc = s.column(0);
                    for i in 0..col.len() {
                        for j in 0..col.len() {
                            prop_assert_eq!(
                                col[i] < col[j],
                                sc[i] < sc[j],
                                "rank order changed at ({}, {})",
                                i,
                                j
                            );
                        }
                    }
                    Ok(())
                },
            )
            .unwrap();
    }

    #[test]
    fn roundtrip_write_parse() {
        let path = write_temp(
            "t11,t12,t21,t22,cens1,cens2,a,b\n\
             0.5,1.25,2.0,NA,I,R,0.125,-3.5\n\
             7.0,NA,0.75,1.5,U,I,1.0,2.25\n",
        );
        let d = parse_dataset(&path, &DataSchema::default()).unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &DataSchema::default(), &mut buf).unwrap();
        let path2 = write_temp(&String::from_utf8(buf).unwrap());
        let d2 = parse_dataset(&path2, &DataSchema::default()).unwrap();
        assert_eq!(d, d2);
        std::fs::remove_file(path).ok();
        std::fs::remove_file(path2).ok();
    }
}
