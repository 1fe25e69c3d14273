use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::table::{validate_schema, CohortTable, FeatureKind, FeatureSpec, RowRecord, Sex, FIXED_COLUMNS};
use crate::error::{Error, Result};

fn ingest(row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Ingest {
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

fn parse_opt_f64(row: usize, column: &str, cell: &str) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    let v: f64 = cell
        .parse()
        .map_err(|e| ingest(row, column, format!("`{cell}`: {e}")))?;
    if !v.is_finite() {
        return Err(ingest(row, column, format!("non-finite value `{cell}`")));
    }
    Ok(Some(v))
}

fn required<T>(row: usize, column: &str, v: Option<T>) -> Result<T> {
    v.ok_or_else(|| ingest(row, column, "required cell is empty"))
}

/// Reads a cohort CSV whose columns are the fixed columns plus exactly the
/// schema's features, in any order. Row numbers in errors count the header as 1.
pub fn read_cohort<R: Read>(reader: R, schema: &[FeatureSpec]) -> Result<CohortTable> {
    validate_schema(schema)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();

    let mut position: HashMap<&str, usize> = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        if position.insert(h.trim(), i).is_some() {
            return Err(ingest(1, h, "duplicate column"));
        }
    }
    let fixed_pos = FIXED_COLUMNS
        .iter()
        .map(|c| position.get(c).copied().ok_or_else(|| ingest(1, c, "missing column")))
        .collect::<Result<Vec<_>>>()?;
    let feature_pos = schema
        .iter()
        .map(|f| {
            position
                .get(f.name.as_str())
                .copied()
                .ok_or_else(|| ingest(1, &f.name, "missing column"))
        })
        .collect::<Result<Vec<_>>>()?;
    if headers.len() != FIXED_COLUMNS.len() + schema.len() {
        let extra = headers
            .iter()
            .find(|h| !FIXED_COLUMNS.contains(&h.trim()) && !schema.iter().any(|f| f.name == h.trim()))
            .unwrap_or("?");
        return Err(ingest(1, extra, "column not in schema"));
    }

    let mut table = CohortTable::empty(schema.to_vec());
    for (k, record) in rdr.records().enumerate() {
        let row = k + 2;
        let record = record?;
        let cell = |c: usize| record.get(fixed_pos[c]).unwrap_or("").trim();
        let id = cell(0);
        if id.is_empty() {
            return Err(ingest(row, "id", "required cell is empty"));
        }
        let sex: Sex = cell(1).parse().map_err(|e: String| ingest(row, "sex", e))?;
        let age = required(row, "age", parse_opt_f64(row, "age", cell(2))?)?;
        let visit_index: u32 = cell(3)
            .parse()
            .map_err(|e| ingest(row, "visit_index", format!("`{}`: {e}", cell(3))))?;
        let elapsed_years = parse_opt_f64(row, "elapsed_years", cell(4))?;
        let condition = cell(5).to_string();
        if condition.is_empty() {
            return Err(ingest(row, "condition_code", "required cell is empty"));
        }
        let values = schema
            .iter()
            .zip(&feature_pos)
            .map(|(f, &p)| parse_opt_f64(row, &f.name, record.get(p).unwrap_or("")))
            .collect::<Result<Vec<_>>>()?;
        table.push(RowRecord {
            id: id.to_string(),
            sex,
            age,
            visit_index,
            elapsed_years,
            condition,
            values,
        })?;
    }
    for j in 0..table.n_features() {
        table.features[j].completeness = table.completeness(j);
    }
    Ok(table)
}

pub fn load_cohort(path: &Path, schema: &[FeatureSpec]) -> Result<CohortTable> {
    read_cohort(File::open(path)?, schema)
}

fn fmt_f64(v: f64) -> String {
    // Shortest representation that parses back to the same bits.
    format!("{v}")
}

pub fn write_cohort_to<W: Write>(table: &CohortTable, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = FIXED_COLUMNS.to_vec();
    header.extend(table.features.iter().map(|f| f.name.as_str()));
    w.write_record(&header)?;
    for i in 0..table.len() {
        let mut rec = vec![
            table.ids[i].clone(),
            table.sex[i].code().to_string(),
            fmt_f64(table.age[i]),
            table.visit_index[i].to_string(),
            table.elapsed_years[i].map(fmt_f64).unwrap_or_default(),
            table.condition[i].clone(),
        ];
        rec.extend(table.row_values(i).iter().map(|v| v.map(fmt_f64).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cohort(table: &CohortTable, path: &Path) -> Result<()> {
    write_cohort_to(table, File::create(path)?)
}

/// Schema file: `name,kind,marker_of_interest` with kind one of
/// biomarker/lifestyle/demographic and a 0/1 flag.
pub fn read_schema<R: Read>(reader: R) -> Result<Vec<FeatureSpec>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 2;
        let rec = rec?;
        let name = rec.get(0).unwrap_or("").trim();
        if name.is_empty() {
            return Err(ingest(row, "name", "required cell is empty"));
        }
        let kind: FeatureKind = rec
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|e: String| ingest(row, "kind", e))?;
        let flag = match rec.get(2).unwrap_or("0").trim() {
            "1" | "true" => true,
            "0" | "false" | "" => false,
            other => return Err(ingest(row, "marker_of_interest", format!("`{other}` is not 0/1"))),
        };
        let mut spec = FeatureSpec::new(name, kind);
        spec.marker_of_interest = flag;
        out.push(spec);
    }
    validate_schema(&out)?;
    Ok(out)
}

pub fn load_schema(path: &Path) -> Result<Vec<FeatureSpec>> {
    read_schema(File::open(path)?)
}

pub fn write_schema_to<W: Write>(schema: &[FeatureSpec], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["name", "kind", "marker_of_interest"])?;
    for f in schema {
        w.write_record([
            f.name.as_str(),
            f.kind.as_str(),
            if f.marker_of_interest { "1" } else { "0" },
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_schema(schema: &[FeatureSpec], path: &Path) -> Result<()> {
    write_schema_to(schema, File::create(path)?)
}

/// Inclusive recommended range for one biomarker.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRange {
    pub feature: String,
    pub low: f64,
    pub high: f64,
}

impl ReferenceRange {
    pub fn contains(&self, v: f64) -> bool {
        self.low <= v && v <= self.high
    }
}

pub fn read_reference_ranges<R: Read>(reader: R) -> Result<Vec<ReferenceRange>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 2;
        let rec = rec?;
        let feature = rec.get(0).unwrap_or("").trim().to_string();
        let low = required(row, "low", parse_opt_f64(row, "low", rec.get(1).unwrap_or(""))?)?;
        let high = required(row, "high", parse_opt_f64(row, "high", rec.get(2).unwrap_or(""))?)?;
        if feature.is_empty() || low > high {
            return Err(ingest(row, "feature", format!("invalid range `{feature}` [{low}, {high}]")));
        }
        out.push(ReferenceRange { feature, low, high });
    }
    Ok(out)
}

pub fn load_reference_ranges(path: &Path) -> Result<Vec<ReferenceRange>> {
    read_reference_ranges(File::open(path)?)
}

pub fn write_reference_ranges(ranges: &[ReferenceRange], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(["feature", "low", "high"])?;
    for r in ranges {
        w.write_record([r.feature.clone(), fmt_f64(r.low), fmt_f64(r.high)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Vec<FeatureSpec> {
        vec![
            FeatureSpec::new("glucose", FeatureKind::Biomarker),
            FeatureSpec::new("sleep_hours", FeatureKind::Lifestyle),
        ]
    }

    const HEADER: &str = "id,sex,age,visit_index,elapsed_years,condition_code,glucose,sleep_hours\n";

    #[test]
    fn empty_data_section_gives_empty_table() {
        let t = read_cohort(HEADER.as_bytes(), &schema()).unwrap();
        assert_eq!(t.len(), 0);
    }

    #[test]
    fn single_full_row() {
        let text = format!("{HEADER}p1,F,50.5,1,,healthy,5.1,7\n");
        let t = read_cohort(text.as_bytes(), &schema()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.null_count(), 0);
        assert_eq!(t.value(0, 0), Some(5.1));
        assert_eq!(t.elapsed_years[0], None);
    }

    #[test]
    fn nulls_are_preserved() {
        let text = format!("{HEADER}p1,M,50,1,,healthy,,7\n");
        let t = read_cohort(text.as_bytes(), &schema()).unwrap();
        assert_eq!(t.value(0, 0), None);
        assert_eq!(t.features[0].completeness, 0.0);
    }

    #[test]
    fn columns_in_any_order() {
        let text = "sleep_hours,glucose,condition_code,elapsed_years,visit_index,age,sex,id\n7,5.1,healthy,,1,40,F,p1\n";
        let t = read_cohort(text.as_bytes(), &schema()).unwrap();
        assert_eq!(t.value(0, 1), Some(7.0));
        assert_eq!(t.ids[0], "p1");
    }

    #[test]
    fn ingestion_errors_carry_location() {
        let missing = "id,sex,age,visit_index,elapsed_years,condition_code,glucose\n";
        match read_cohort(missing.as_bytes(), &schema()) {
            Err(Error::Ingest { column, row, .. }) => {
                assert_eq!(column, "sleep_hours");
                assert_eq!(row, 1);
            }
            other => panic!("{other:?}"),
        }
        let extra = format!("{},extra\n", HEADER.trim_end());
        assert!(matches!(
            read_cohort(extra.as_bytes(), &schema()),
            Err(Error::Ingest { .. })
        ));
        let bad = format!("{HEADER}p1,F,50,1,,healthy,5.1,7\np2,F,51,1,,healthy,abc,7\n");
        match read_cohort(bad.as_bytes(), &schema()) {
            Err(Error::Ingest { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "glucose");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn write_then_read_round_trips() {
        let text = format!("{HEADER}p1,F,50.123456789,1,,healthy,5.1,\np2,M,61,2,3.25,cancer,0.1,8.5\n");
        let t = read_cohort(text.as_bytes(), &schema()).unwrap();
        let mut buf = Vec::new();
        write_cohort_to(&t, &mut buf).unwrap();
        let back = read_cohort(buf.as_slice(), &schema()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn schema_file_round_trips() {
        let s = vec![
            FeatureSpec::new("glucose", FeatureKind::Biomarker).of_interest(),
            FeatureSpec::new("sleep_hours", FeatureKind::Lifestyle),
        ];
        let mut buf = Vec::new();
        write_schema_to(&s, &mut buf).unwrap();
        assert_eq!(read_schema(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn reference_ranges_parse() {
        let r = read_reference_ranges("feature,low,high\nglucose,3.9,5.6\n".as_bytes()).unwrap();
        assert!(r[0].contains(3.9) && r[0].contains(5.6) && !r[0].contains(5.7));
        assert!(read_reference_ranges("feature,low,high\nglucose,5,4\n".as_bytes()).is_err());
    }
}
