//! CSV tables and dataset construction.

use std::path::Path;

use nlprofile::{parse, Dataset};

use crate::error::{CliError, Result};

/// A numeric CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_table_from(file, path)
}

/// Like [`read_table`] but accepts `inf`/`-inf` cells (unbounded interval
/// ends in band files). NaN is still rejected.
pub fn read_table_allow_inf(path: &Path) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_table(file, path, true)
}

pub fn read_table_from(reader: impl std::io::Read, path: &Path) -> Result<Table> {
    parse_table(reader, path, false)
}

fn parse_table(reader: impl std::io::Read, path: &Path, allow_inf: bool) -> Result<Table> {
    let table_err = |line: u64, message: String| CliError::Table { path: path.to_path_buf(), line, message };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers().map_err(|e| table_err(1, e.to_string()))?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().any(String::is_empty) {
        return Err(table_err(1, "header row is missing or has an empty column name".into()));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            table_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .zip(&headers)
            .map(|(cell, name)| match cell.parse::<f64>() {
                Ok(v) if v.is_finite() || (allow_inf && v.is_infinite()) => Ok(v),
                _ => Err(table_err(line, format!("column '{name}': '{cell}' is not a finite number"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(table_err(2, "no data rows".into()));
    }
    Ok(Table { headers, rows })
}

/// Build a dataset from `table`. `target` is a column name or an
/// expression over columns (e.g. `log(conc)`); `vars` are input columns.
pub fn build_dataset(table: &Table, target: &str, vars: &[String]) -> Result<Dataset> {
    if vars.is_empty() {
        return Err(CliError::Input("no input variables given (--vars)".into()));
    }
    let mut var_cols = Vec::with_capacity(vars.len());
    for v in vars {
        let k = table
            .column_index(v)
            .ok_or_else(|| CliError::Input(format!("variable column '{v}' not found; columns are {:?}", table.headers)))?;
        var_cols.push(k);
    }
    let target_expr = parse(target, &table.headers)
        .map_err(|source| CliError::Expr { context: format!("target '{target}'"), source })?;
    let mut used = Vec::new();
    target_expr.visit(&mut |e| {
        if let nlprofile::Expr::Var(k) = e {
            used.push(*k);
        }
    });
    if used.is_empty() {
        return Err(CliError::Input(format!("target '{target}' does not reference any column")));
    }
    if let Some(k) = used.iter().find(|k| var_cols.contains(k)) {
        return Err(CliError::Input(format!("column '{}' is used both as input and in the target", table.headers[*k])));
    }
    let mut x = Vec::with_capacity(table.rows.len());
    let mut y = Vec::with_capacity(table.rows.len());
    for (r, row) in table.rows.iter().enumerate() {
        let value = target_expr.eval(&[], row);
        if !value.is_finite() {
            return Err(CliError::Input(format!("target '{target}' is not finite on data row {}", r + 1)));
        }
        y.push(value);
        x.push(var_cols.iter().map(|&k| row[k]).collect());
    }
    Ok(Dataset::new(x, y, vars.to_vec())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(text: &str) -> Result<Table> {
        read_table_from(text.as_bytes(), Path::new("t.csv"))
    }

    #[test]
    fn reads_and_transforms() {
        let t = table("age, conc\n1, 2.0\n2, 4.0\n").unwrap();
        let d = build_dataset(&t, "log(conc)", &["age".into()]).unwrap();
        assert_eq!(d.y(), &[2f64.ln(), 4f64.ln()]);
        assert_eq!(d.row(1), &[2.0]);
    }

    #[test]
    fn reports_line_of_bad_cell() {
        let err = table("a,b\n1,2\n3,x\n").unwrap_err();
        assert_eq!(err.to_string(), "t.csv:3: column 'b': 'x' is not a finite number");
        assert!(matches!(table("a,b\n"), Err(CliError::Table { line: 2, .. })));
        assert!(matches!(table("a,b\n1,2,3\n"), Err(CliError::Table { .. })));
    }

    #[test]
    fn validates_columns() {
        let t = table("x,y\n1,2\n").unwrap();
        assert!(build_dataset(&t, "y", &["q".into()]).is_err());
        assert!(build_dataset(&t, "x + y", &["x".into()]).is_err());
        assert!(build_dataset(&t, "log(-y)", &["x".into()]).is_err());
        assert!(build_dataset(&t, "2", &["x".into()]).is_err());
    }
}
