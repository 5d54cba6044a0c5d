//! `prompts.params` text format:
//!
//! ```text
//! layers=<L>
//! classes=<C>
//! beta0
//! <C rows of d_0 floats>
//! ...
//! beta<L>
//! <C rows of d_L floats>
//! eta
//! <one row of L+1 floats>
//! ```

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use super::PromptState;
use crate::error::{Error, Result};
use crate::textio::{
    content_lines, expect_tag, key_value, parse_num, parse_row, read_to_string, write_row,
    write_string,
};

pub fn save_prompts(prompts: &PromptState, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "layers={}", prompts.num_layers()).unwrap();
    writeln!(out, "classes={}", prompts.num_classes()).unwrap();
    for (l, b) in prompts.beta.iter().enumerate() {
        writeln!(out, "beta{l}").unwrap();
        for row in b.rows() {
            write_row(&mut out, row.iter());
        }
    }
    out.push_str("eta\n");
    write_row(&mut out, prompts.eta.iter());
    write_string(path.as_ref(), &out)
}

pub fn load_prompts(path: impl AsRef<Path>) -> Result<PromptState> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut lines = content_lines(&text);
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::parse(path, 0, format!("unexpected end of file, expected {what}")))
    };
    let (line, t) = next("layers")?;
    let layers: usize = parse_num(path, line, &key_value(path, line, t, "layers")?)?;
    let (line, t) = next("classes")?;
    let classes: usize = parse_num(path, line, &key_value(path, line, t, "classes")?)?;

    let mut beta = Vec::with_capacity(layers + 1);
    for l in 0..=layers {
        expect_tag(path, next("beta tag")?, &format!("beta{l}"))?;
        let mut data = Vec::new();
        let mut width = None;
        for _ in 0..classes {
            let (line, t) = next("beta row")?;
            let row = parse_row(path, line, t)?;
            if *width.get_or_insert(row.len()) != row.len() {
                return Err(Error::parse(path, line, "ragged beta block"));
            }
            data.extend(row);
        }
        let d = width.unwrap_or(0);
        beta.push(Array2::from_shape_vec((classes, d), data).expect("shape checked"));
    }
    expect_tag(path, next("eta tag")?, "eta")?;
    let (line, t) = next("eta row")?;
    let eta = parse_row(path, line, t)?;
    if eta.len() != layers + 1 {
        return Err(Error::parse(path, line, format!("expected {} values", layers + 1)));
    }
    if let Some((line, _)) = lines.next() {
        return Err(Error::parse(path, line, "trailing content"));
    }
    let p = PromptState { beta, eta };
    if !p.is_finite() {
        return Err(Error::NonFinite(format!("prompts in {}", path.display())));
    }
    Ok(p)
}
