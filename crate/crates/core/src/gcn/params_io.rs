//! `gcn.params` text format:
//!
//! ```text
//! layers=<L>
//! dims=<d_0>,<d_1>,...,<d_L>
//! slope=<f>
//! W1
//! <d_0 rows of d_1 floats>
//! b1
//! <one row of d_1 floats>
//! ...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::GcnParams;
use crate::error::{Error, Result};
use crate::textio::{
    content_lines, expect_tag, key_value, parse_num, parse_row, read_to_string, write_row,
    write_string,
};

pub fn save_params(params: &GcnParams, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "layers={}", params.num_layers()).unwrap();
    let dims: Vec<String> = params.dims().iter().map(|d| d.to_string()).collect();
    writeln!(out, "dims={}", dims.join(",")).unwrap();
    writeln!(out, "slope={}", params.slope).unwrap();
    for (l, (w, b)) in params.weights.iter().zip(&params.biases).enumerate() {
        writeln!(out, "W{}", l + 1).unwrap();
        for row in w.rows() {
            write_row(&mut out, row.iter());
        }
        writeln!(out, "b{}", l + 1).unwrap();
        write_row(&mut out, b.iter());
    }
    write_string(path.as_ref(), &out)
}

pub fn load_params(path: impl AsRef<Path>) -> Result<GcnParams> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut lines = content_lines(&text);
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::parse(path, 0, format!("unexpected end of file, expected {what}")))
    };
    let header = |(line, l): (usize, &str), key: &str| key_value(path, line, l, key);

    let l0 = next("layers")?;
    let layers: usize = parse_num(path, l0.0, &header(l0, "layers")?)?;
    let l1 = next("dims")?;
    let dims: Vec<usize> = header(l1, "dims")?
        .split(',')
        .map(|t| parse_num(path, l1.0, t))
        .collect::<Result<_>>()?;
    if dims.len() != layers + 1 {
        return Err(Error::parse(
            path,
            l1.0,
            format!("dims lists {} widths for {layers} layers", dims.len()),
        ));
    }
    let l2 = next("slope")?;
    let slope: f64 = parse_num(path, l2.0, &header(l2, "slope")?)?;

    let mut weights = Vec::with_capacity(layers);
    let mut biases = Vec::with_capacity(layers);
    for l in 1..=layers {
        let (rows, cols) = (dims[l - 1], dims[l]);
        expect_tag(path, next("weight tag")?, &format!("W{l}"))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (line, text) = next("weight row")?;
            let row = parse_row(path, line, text)?;
            if row.len() != cols {
                return Err(Error::parse(path, line, format!("expected {cols} values")));
            }
            data.extend(row);
        }
        weights.push(Array2::from_shape_vec((rows, cols), data).expect("shape checked"));
        expect_tag(path, next("bias tag")?, &format!("b{l}"))?;
        let (line, text) = next("bias row")?;
        let row = parse_row(path, line, text)?;
        if row.len() != cols {
            return Err(Error::parse(path, line, format!("expected {cols} values")));
        }
        biases.push(Array1::from(row));
    }
    if let Some((line, _)) = lines.next() {
        return Err(Error::parse(path, line, "trailing content"));
    }
    GcnParams::new(weights, biases, slope)
}
