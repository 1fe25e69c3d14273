//! Text checkpoint for [`MlpParams`].
//!
//! ```text
//! TCEMB1
//! <n> <d>
//! layer <k> <rows> <cols>
//! <rows lines of `cols` weights>
//! <bias line>
//! <slope line>
//! ...
//! ```
//!
//! Floats are written with 17 significant digits, which round-trips every
//! finite `f64` exactly.

use std::fmt::Write as _;

use super::matrix::Matrix;
use super::mlp::{Dense, MlpParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "TCEMB1";

fn push_row(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{v:.16e}").expect("write to String");
    }
    out.push('\n');
}

pub fn serialize_checkpoint(params: &MlpParams) -> String {
    let mut out = String::new();
    out.push_str(CHECKPOINT_MAGIC);
    out.push('\n');
    writeln!(out, "{} {}", params.input_dim(), params.output_dim()).expect("write to String");
    for (k, layer) in params.layers().iter().enumerate() {
        let (rows, cols) = layer.weights.shape();
        writeln!(out, "layer {k} {rows} {cols}").expect("write to String");
        for row in layer.weights.row_iter() {
            push_row(&mut out, row);
        }
        push_row(&mut out, &layer.bias);
        push_row(&mut out, &layer.slopes);
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::format(0, format!("unexpected end of input, expected {what}")))
    }

    fn floats(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let (line, text) = self.next(what)?;
        let values = text
            .split_ascii_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|e| Error::format(line, format!("{what}: `{tok}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != count {
            return Err(Error::format(
                line,
                format!("{what}: expected {count} values, found {}", values.len()),
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::format(line, format!("{what}: non-finite value {v}")));
        }
        Ok(values)
    }
}

fn parse_usizes<const N: usize>(line: usize, toks: &[&str]) -> Result<[usize; N]> {
    if toks.len() != N {
        return Err(Error::format(line, format!("expected {N} integers")));
    }
    let mut out = [0usize; N];
    for (o, t) in out.iter_mut().zip(toks) {
        *o = t
            .parse()
            .map_err(|e| Error::format(line, format!("`{t}`: {e}")))?;
    }
    Ok(out)
}

pub fn parse_checkpoint(text: &str) -> Result<MlpParams> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (line, magic) = lines.next("magic")?;
    if magic.trim() != CHECKPOINT_MAGIC {
        return Err(Error::format(line, format!("bad magic `{magic}`")));
    }
    let (line, dims) = lines.next("dimensions")?;
    let [n, d] = parse_usizes::<2>(line, &dims.split_ascii_whitespace().collect::<Vec<_>>())?;

    let mut layers = Vec::new();
    loop {
        let Some((line, header)) = lines.inner.next().map(|(i, l)| (i + 1, l)) else {
            break;
        };
        if header.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = header.split_ascii_whitespace().collect();
        if toks.first() != Some(&"layer") {
            return Err(Error::format(line, format!("expected layer header, got `{header}`")));
        }
        let [k, rows, cols] = parse_usizes::<3>(line, &toks[1..])?;
        if k != layers.len() {
            return Err(Error::format(line, format!("layer {k} out of order")));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            data.extend(lines.floats(cols, &format!("layer {k} weight row {r}"))?);
        }
        let bias = lines.floats(cols, &format!("layer {k} bias"))?;
        let slopes = lines.floats(cols, &format!("layer {k} slopes"))?;
        layers.push(Dense {
            weights: Matrix::from_vec(rows, cols, data)?,
            bias,
            slopes,
        });
    }
    let params = MlpParams::from_layers(layers)?;
    if params.input_dim() != n || params.output_dim() != d {
        return Err(Error::format(
            2,
            format!(
                "header declares {n}->{d} but layers map {}->{}",
                params.input_dim(),
                params.output_dim()
            ),
        ));
    }
    Ok(params)
}
