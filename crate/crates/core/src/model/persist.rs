//! Text persistence for layer stacks and VAE models.
//!
//! Stack format: a header line `layers=<L> dims=<d0,...,dL>`, an
//! `activations=<a0,...,a(L-1)>` line, then two lines per layer — the weight
//! matrix (row-major) and the bias vector — as space-separated decimal
//! floats printed with 17 significant digits, which round-trips 64-bit
//! floats exactly.
//!
//! VAE format: a `vae latent=<d>` line, then a `decoder` section and an
//! `encoder` section, each a stack in the format above.

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};

use super::layer::{Activation, Layer};
use super::stack::LayerStack;
use super::vae::{Encoder, VaeModel};

/// 17 significant digits: exact round-trip for f64.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_floats(out: &mut String, values: impl Iterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        out.push_str(&format_f64(v));
        first = false;
    }
    out.push('\n');
}

pub fn save_stack(stack: &LayerStack) -> String {
    let mut dims: Vec<String> = vec![stack.input_dim().to_string()];
    dims.extend(stack.layers().iter().map(|l| l.output_dim().to_string()));
    let acts: Vec<&str> = stack.layers().iter().map(|l| l.activation().name()).collect();
    let mut out = format!(
        "layers={} dims={}\nactivations={}\n",
        stack.depth(),
        dims.join(","),
        acts.join(",")
    );
    for layer in stack.layers() {
        push_floats(&mut out, layer.weight().as_slice().iter().copied());
        push_floats(&mut out, layer.bias().iter().copied());
    }
    out
}

pub fn save_vae(vae: &VaeModel) -> String {
    format!(
        "vae latent={}\ndecoder\n{}encoder\n{}",
        vae.latent_dim(),
        save_stack(&vae.decoder),
        save_stack(vae.encoder.stack()),
    )
}

/// Line-oriented cursor carrying 1-based line numbers into parse errors.
struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            iter: text.lines().enumerate(),
        }
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        for (idx, line) in self.iter.by_ref() {
            if !line.trim().is_empty() {
                return Ok((idx + 1, line.trim()));
            }
        }
        Err(Error::Parse {
            line: 0,
            message: "unexpected end of file".into(),
        })
    }
}

fn parse_floats(line_no: usize, line: &str, expected: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad float '{tok}'"),
            })
        })
        .collect::<Result<_>>()?;
    if values.len() != expected {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected {expected} values, found {}", values.len()),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parse {
            line: line_no,
            message: "non-finite value".into(),
        });
    }
    Ok(values)
}

fn parse_stack(lines: &mut Lines) -> Result<LayerStack> {
    let (header_no, header) = lines.next()?;
    let mut depth: Option<usize> = None;
    let mut dims: Option<Vec<usize>> = None;
    for field in header.split_whitespace() {
        if let Some(v) = field.strip_prefix("layers=") {
            depth = Some(v.parse().map_err(|_| Error::Parse {
                line: header_no,
                message: format!("bad layer count '{v}'"),
            })?);
        } else if let Some(v) = field.strip_prefix("dims=") {
            dims = Some(
                v.split(',')
                    .map(|tok| {
                        tok.parse::<usize>().map_err(|_| Error::Parse {
                            line: header_no,
                            message: format!("bad dimension '{tok}'"),
                        })
                    })
                    .collect::<Result<_>>()?,
            );
        }
    }
    let depth = depth.ok_or_else(|| Error::Parse {
        line: header_no,
        message: "missing layers= field".into(),
    })?;
    let dims = dims.ok_or_else(|| Error::Parse {
        line: header_no,
        message: "missing dims= field".into(),
    })?;
    if dims.len() != depth + 1 {
        return Err(Error::Parse {
            line: header_no,
            message: format!("dims lists {} entries for {} layers", dims.len(), depth),
        });
    }

    let (acts_no, acts_line) = lines.next()?;
    let acts_str = acts_line.strip_prefix("activations=").ok_or_else(|| Error::Parse {
        line: acts_no,
        message: "expected activations= line".into(),
    })?;
    let activations: Vec<Activation> = acts_str
        .split(',')
        .map(|tok| {
            Activation::parse(tok).map_err(|_| Error::Parse {
                line: acts_no,
                message: format!("unknown activation '{tok}'"),
            })
        })
        .collect::<Result<_>>()?;
    if activations.len() != depth {
        return Err(Error::Parse {
            line: acts_no,
            message: format!(
                "{} activations listed for {} layers",
                activations.len(),
                depth
            ),
        });
    }

    let mut layers = Vec::with_capacity(depth);
    for l in 0..depth {
        let (rows, cols) = (dims[l + 1], dims[l]);
        let (wno, wline) = lines.next()?;
        let weight = Matrix::new(rows, cols, parse_floats(wno, wline, rows * cols)?)
            .map_err(|e| Error::Parse {
                line: wno,
                message: e.to_string(),
            })?;
        let (bno, bline) = lines.next()?;
        let bias = Vector::new(parse_floats(bno, bline, rows)?);
        layers.push(Layer::new(weight, bias, activations[l]).map_err(|e| Error::Parse {
            line: bno,
            message: e.to_string(),
        })?);
    }
    LayerStack::new(layers).map_err(|e| Error::Parse {
        line: header_no,
        message: e.to_string(),
    })
}

pub fn load_stack(text: &str) -> Result<LayerStack> {
    parse_stack(&mut Lines::new(text))
}

pub fn load_vae(text: &str) -> Result<VaeModel> {
    let mut lines = Lines::new(text);
    let (no, header) = lines.next()?;
    let latent = header
        .strip_prefix("vae latent=")
        .and_then(|v| v.parse::<usize>().ok())
        .ok_or_else(|| Error::Parse {
            line: no,
            message: "expected 'vae latent=<d>' header".into(),
        })?;
    let (no, tag) = lines.next()?;
    if tag != "decoder" {
        return Err(Error::Parse {
            line: no,
            message: format!("expected 'decoder', found '{tag}'"),
        });
    }
    let decoder = parse_stack(&mut lines)?;
    let (no, tag) = lines.next()?;
    if tag != "encoder" {
        return Err(Error::Parse {
            line: no,
            message: format!("expected 'encoder', found '{tag}'"),
        });
    }
    let enc_stack = parse_stack(&mut lines)?;
    let encoder = Encoder::new(enc_stack, latent).map_err(|e| Error::Parse {
        line: no,
        message: e.to_string(),
    })?;
    VaeModel::new(encoder, decoder).map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })
}
