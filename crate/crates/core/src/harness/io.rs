//! Panel CSV: one unit per row, columns `in:<label>` then `out:<label>`.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::dea::DataSet;
use crate::error::{Error, Result};

pub fn read_panel<R: Read>(reader: R) -> Result<DataSet> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for (col, h) in headers.iter().enumerate() {
        if let Some(label) = h.strip_prefix("in:") {
            if !outputs.is_empty() {
                return Err(Error::InvalidInput(format!("input column '{h}' after an output column")));
            }
            inputs.push((col, label.to_string()));
        } else if let Some(label) = h.strip_prefix("out:") {
            outputs.push((col, label.to_string()));
        } else {
            return Err(Error::InvalidInput(format!("column '{h}' is neither in:<label> nor out:<label>")));
        }
    }
    let mut xs: Vec<Vec<f64>> = vec![Vec::new(); inputs.len()];
    let mut ys: Vec<Vec<f64>> = vec![Vec::new(); outputs.len()];
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let parse = |col: usize| -> Result<f64> {
            let field = record.get(col).unwrap_or("");
            field
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("row {}: '{field}' is not a number", row + 2)))
        };
        for (dst, (col, _)) in xs.iter_mut().zip(&inputs) {
            dst.push(parse(*col)?);
        }
        for (dst, (col, _)) in ys.iter_mut().zip(&outputs) {
            dst.push(parse(*col)?);
        }
    }
    let n = xs.first().map_or(0, Vec::len);
    let x = DMatrix::from_fn(inputs.len(), n, |i, k| xs[i][k]);
    let y = DMatrix::from_fn(outputs.len(), n, |r, k| ys[r][k]);
    DataSet::new(x, y, inputs.into_iter().map(|c| c.1).collect(), outputs.into_iter().map(|c| c.1).collect())
}

pub fn write_panel<W: Write>(data: &DataSet, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let header: Vec<String> = data
        .input_labels
        .iter()
        .map(|l| format!("in:{l}"))
        .chain(data.output_labels.iter().map(|l| format!("out:{l}")))
        .collect();
    wtr.write_record(&header)?;
    for k in 0..data.num_dmus() {
        let row: Vec<String> = data.x.column(k).iter().chain(data.y.column(k).iter()).map(|v| v.to_string()).collect();
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
