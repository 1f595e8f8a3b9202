//! CSV formats for ranking samples and item covariates.
//!
//! Rankings: a header naming the `n` items (conventionally `item_1..item_n`)
//! and one assessor per row, holding the integer rank of each item.
//!
//! Covariates: a header `item,<covariate>,...` and one item per row.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{MallowsError, Result};
use crate::perm::{Ranking, RankingSample};
use crate::prior::CovariateTable;

fn dataset_err(label: &str, row: usize, msg: impl Into<String>) -> MallowsError {
    MallowsError::Dataset { path: label.to_string(), row, msg: msg.into() }
}

fn csv_err(label: &str, e: csv::Error) -> MallowsError {
    let row = e.position().map_or(0, |p| p.record() as usize);
    dataset_err(label, row, e.to_string())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| dataset_err(&path.display().to_string(), 0, e.to_string()))
}

/// Reads a rankings file; `label` names the source in error messages, and
/// rows are numbered from 1 after the header.
pub fn read_rankings_from<R: Read>(input: R, label: &str) -> Result<RankingSample> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let n = rdr.headers().map_err(|e| csv_err(label, e))?.len();
    if n == 0 {
        return Err(dataset_err(label, 0, "header names no items"));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| dataset_err(label, row, e.to_string()))?;
        let ranks = rec
            .iter()
            .map(|f| f.parse::<u32>().map_err(|_| dataset_err(label, row, format!("{f:?} is not a positive integer rank"))))
            .collect::<Result<Vec<u32>>>()?;
        if ranks.len() != n {
            return Err(dataset_err(label, row, format!("expected {n} ranks, found {}", ranks.len())));
        }
        let ranking = Ranking::new(ranks).map_err(|e| dataset_err(label, row, e.to_string()))?;
        rows.push(ranking);
    }
    RankingSample::with_items(n, rows)
}

pub fn read_rankings(path: impl AsRef<Path>) -> Result<RankingSample> {
    let path = path.as_ref();
    read_rankings_from(open(path)?, &path.display().to_string())
}

/// Writes `s` with an `item_1..item_n` header.
pub fn write_rankings<W: Write>(s: &RankingSample, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| MallowsError::Io(e.into());
    w.write_record((1..=s.n_items()).map(|i| format!("item_{i}"))).map_err(io)?;
    for row in s.rows() {
        w.write_record(row.ranks().iter().map(|r| r.to_string())).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_covariates_from<R: Read>(input: R, label: &str) -> Result<CovariateTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers().map_err(|e| csv_err(label, e))?.clone();
    if header.len() < 2 {
        return Err(dataset_err(label, 0, "expected an item column and at least one covariate"));
    }
    let covariates: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let (mut items, mut values) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| dataset_err(label, row, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(dataset_err(label, row, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let mut vals = Vec::with_capacity(covariates.len());
        for (name, f) in covariates.iter().zip(rec.iter().skip(1)) {
            if f.is_empty() || f.eq_ignore_ascii_case("na") {
                return Err(dataset_err(label, row, format!("missing value for covariate {name}")));
            }
            let v: f64 = f.parse().map_err(|_| dataset_err(label, row, format!("{f:?} is not a number")))?;
            if !v.is_finite() {
                return Err(dataset_err(label, row, format!("non-finite value for covariate {name}")));
            }
            vals.push(v);
        }
        items.push(rec[0].to_string());
        values.push(vals);
    }
    if items.is_empty() {
        return Err(dataset_err(label, 0, "no items"));
    }
    Ok(CovariateTable { items, covariates, values })
}

pub fn read_covariates(path: impl AsRef<Path>) -> Result<CovariateTable> {
    let path = path.as_ref();
    read_covariates_from(open(path)?, &path.display().to_string())
}

pub fn write_covariates<W: Write>(table: &CovariateTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| MallowsError::Io(e.into());
    w.write_record(std::iter::once("item").chain(table.covariates.iter().map(String::as_str))).map_err(io)?;
    for (item, vals) in table.items.iter().zip(&table.values) {
        w.write_record(std::iter::once(item.clone()).chain(vals.iter().map(|v| v.to_string()))).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row_of(err: MallowsError) -> usize {
        match err {
            MallowsError::Dataset { row, .. } => row,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let text = "item_1,item_2,item_3\n2,1,3\n3,2,1\n";
        let s = read_rankings_from(text.as_bytes(), "t").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.rows()[0], Ranking::new(vec![2, 1, 3]).unwrap());
        let mut buf = Vec::new();
        write_rankings(&s, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), text);
    }

    #[test]
    fn header_only_is_an_empty_sample() {
        let s = read_rankings_from("item_1,item_2\n".as_bytes(), "t").unwrap();
        assert!(s.is_empty());
        assert_eq!(s.n_items(), 2);
    }

    #[test]
    fn malformed_rows_are_rejected_with_row_numbers() {
        let cases = [
            ("item_1,item_2,item_3\n1,2,3\n1,1,3\n", 2),
            ("item_1,item_2,item_3\n1,2,4\n", 1),
            ("item_1,item_2,item_3\n1,2,3\n3,2,1\n0,1,2\n", 3),
            ("item_1,item_2,item_3\n1,2\n", 1),
            ("item_1,item_2\n1,x\n", 1),
            ("item_1,item_2\n1,-2\n", 1),
        ];
        for (text, row) in cases {
            assert_eq!(row_of(read_rankings_from(text.as_bytes(), "t").unwrap_err()), row, "{text}");
        }
    }

    #[test]
    fn covariates_parse_and_reject_missing() {
        let text = "item,oil,price\nshrimp,2.73,1.84\ntuna,1.77,1.87\n";
        let t = read_covariates_from(text.as_bytes(), "c").unwrap();
        assert_eq!(t.items, vec!["shrimp", "tuna"]);
        assert_eq!(t.covariates, vec!["oil", "price"]);
        assert_eq!(t.values[1], vec![1.77, 1.87]);
        let mut buf = Vec::new();
        write_covariates(&t, &mut buf).unwrap();
        assert_eq!(read_covariates_from(buf.as_slice(), "c").unwrap(), t);
        assert_eq!(row_of(read_covariates_from("item,oil\na,1\nb,\n".as_bytes(), "c").unwrap_err()), 2);
        assert_eq!(row_of(read_covariates_from("item,oil\na,NA\n".as_bytes(), "c").unwrap_err()), 1);
        assert!(read_covariates_from("item\na\n".as_bytes(), "c").is_err());
    }

    #[test]
    fn files_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(&path, "item_1,item_2\n2,1\n").unwrap();
        assert_eq!(read_rankings(&path).unwrap().len(), 1);
        assert!(matches!(read_rankings(dir.path().join("missing.csv")), Err(MallowsError::Dataset { .. })));
    }
}
