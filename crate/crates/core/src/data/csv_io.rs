use std::io::{Read, Write};
use std::path::Path;

use super::{AttributeSchema, ColumnKind, Dataset, RawColumn};
use crate::error::{Error, Result};

/// Loads a comma-separated file whose first row is a header. Columns may
/// appear in any order; columns not named by the schema are ignored.
pub fn load_csv(path: impl AsRef<Path>, schema: &AttributeSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(std::io::BufReader::new(file), schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &AttributeSchema) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::EmptyDataset("file has no header".into()));
    }

    let positions = schema
        .columns
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == c.name)
                .ok_or_else(|| Error::Schema(format!("missing column `{}`", c.name)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut columns: Vec<RawColumn> = schema
        .columns
        .iter()
        .map(|c| match c.kind {
            ColumnKind::Categorical => RawColumn::Text(Vec::new()),
            ColumnKind::Numeric | ColumnKind::BinaryLabel => RawColumn::Number(Vec::new()),
        })
        .collect();

    let mut record = csv::StringRecord::new();
    let mut row = 0usize;
    while rdr.read_record(&mut record)? {
        row += 1;
        for ((spec, &pos), column) in schema.columns.iter().zip(&positions).zip(&mut columns) {
            let field = record.get(pos).ok_or_else(|| Error::Value {
                row,
                message: format!("missing field for column `{}`", spec.name),
            })?;
            match column {
                RawColumn::Text(values) => values.push(field.to_owned()),
                RawColumn::Number(values) => {
                    let v: f64 = field.parse().map_err(|_| Error::Value {
                        row,
                        message: format!("`{field}` is not a number (column `{}`)", spec.name),
                    })?;
                    values.push(v);
                }
            }
        }
    }
    if row == 0 {
        return Err(Error::EmptyDataset("file has a header but no data rows".into()));
    }
    Dataset::assemble(schema, columns)
}

/// Writes the schema columns (not derived bins) in schema order.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(ds, std::io::BufWriter::new(file))
}

pub fn write_csv_to<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let schema = ds.schema();
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(schema.columns.iter().map(|c| c.name.as_str()))?;

    let mut numeric_index = Vec::with_capacity(schema.columns.len());
    let mut attr_index = Vec::with_capacity(schema.columns.len());
    let mut next_numeric = 0;
    for c in &schema.columns {
        match c.kind {
            ColumnKind::Numeric => {
                numeric_index.push(next_numeric);
                next_numeric += 1;
            }
            _ => numeric_index.push(usize::MAX),
        }
        attr_index.push(ds.attributes().index(&c.name));
    }

    let mut fields = Vec::with_capacity(schema.columns.len());
    for row in ds.rows() {
        fields.clear();
        for (i, c) in schema.columns.iter().enumerate() {
            fields.push(match c.kind {
                ColumnKind::Categorical => {
                    let a = attr_index[i].expect("categorical column is an attribute");
                    ds.attributes().get(a).categories[row.code(a) as usize].clone()
                }
                ColumnKind::Numeric => ds.numeric_column(numeric_index[i])[row.index()].to_string(),
                ColumnKind::BinaryLabel => row.label().to_string(),
            });
        }
        wtr.write_record(&fields)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnSpec;

    fn schema() -> AttributeSchema {
        AttributeSchema {
            columns: vec![
                ColumnSpec::categorical("race"),
                ColumnSpec::categorical("sex"),
                ColumnSpec::label("label"),
            ],
            label: "label".into(),
            group_attributes: vec!["race".into(), "sex".into()],
            bins: vec![],
            exclude_group_features: false,
        }
    }

    #[test]
    fn four_rows() {
        let csv = "race,sex,label\nR1,F,1\nR1,M,0\nR2,F,1\nR2,M,0\n";
        let ds = read_csv(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(ds.len(), 4);
    }

    #[test]
    fn columns_in_any_order_extra_ignored() {
        let csv = "label,extra,sex,race\n1,zz,F,R1\n";
        let ds = read_csv(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(ds.row(0).category("race"), Some("R1"));
        assert_eq!(ds.labels(), &[1]);
    }

    #[test]
    fn missing_label_column() {
        let csv = "race,sex\nR1,F\n";
        match read_csv(csv.as_bytes(), &schema()) {
            Err(Error::Schema(msg)) => assert!(msg.contains("label"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn non_binary_label_reports_row() {
        let csv = "race,sex,label\nR1,F,1\nR1,F,3\n";
        match read_csv(csv.as_bytes(), &schema()) {
            Err(Error::Value { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected value error, got {other:?}"),
        }
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(
            read_csv("".as_bytes(), &schema()),
            Err(Error::EmptyDataset(_))
        ));
        assert!(matches!(
            read_csv("race,sex,label\n".as_bytes(), &schema()),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn round_trip() {
        let mut s = schema();
        s.columns.insert(2, ColumnSpec::numeric("x"));
        let csv = "race,sex,x,label\nR1,F,0.1,1\nR2,M,-3e-9,0\nR1,M,12345.678,1\n";
        let ds = read_csv(csv.as_bytes(), &s).unwrap();
        let mut out = Vec::new();
        write_csv_to(&ds, &mut out).unwrap();
        let back = read_csv(out.as_slice(), &s).unwrap();
        assert_eq!(ds, back);
    }
}
