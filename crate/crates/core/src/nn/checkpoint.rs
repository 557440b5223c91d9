//! Text-headed checkpoint format: the model spec as text lines, a `params <n>` line,
//! an `end` line, then `n` little-endian `f32` values.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::nn::model::Model;
use crate::nn::spec::ModelSpec;
use crate::tensor::Tensor;

const MAGIC_LINE: &str = "fedfd-model v1";

pub fn write_checkpoint(model: &Model, mut out: impl Write) -> Result<()> {
    writeln!(out, "{MAGIC_LINE}")?;
    out.write_all(model.spec().to_text().as_bytes())?;
    writeln!(out, "params {}", model.param_count())?;
    writeln!(out, "end")?;
    for p in model.params() {
        for &v in p.data() {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint(mut input: impl BufRead) -> Result<Model> {
    let bad = |reason: &str| Error::Format {
        format: "checkpoint",
        reason: reason.to_string(),
    };
    let mut line = String::new();
    input.read_line(&mut line)?;
    if line.trim_end() != MAGIC_LINE {
        return Err(bad("missing header line"));
    }
    let mut spec_text = String::new();
    let mut count = None;
    loop {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            return Err(bad("header not terminated"));
        }
        let l = line.trim_end();
        if l == "end" {
            break;
        }
        if let Some(n) = l.strip_prefix("params ") {
            count = Some(n.parse::<usize>().map_err(|_| bad("bad params line"))?);
        } else {
            spec_text.push_str(l);
            spec_text.push('\n');
        }
    }
    let spec = ModelSpec::from_text(&spec_text)?;
    let count = count.ok_or_else(|| bad("missing params line"))?;
    if count != spec.param_count() {
        return Err(bad("parameter count does not match the model spec"));
    }
    let mut raw = vec![0u8; count * 4];
    input
        .read_exact(&mut raw)
        .map_err(|_| bad("truncated parameter record"))?;
    let mut values = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
    let params = spec
        .param_shapes()
        .iter()
        .map(|s| Tensor::from_fn(s, |_| values.next().unwrap()))
        .collect();
    Model::from_params(spec, params)
}
