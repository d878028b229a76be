//! Versioned flat-text model files.
//!
//! The format is line oriented: a `rejopt-model v1` header, `key = value`
//! lines, and `begin svm`/`begin mlp` ... `end` blocks holding one vector
//! per line. Floats are written with their shortest round-trip
//! representation, so saving and loading reproduces a model bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::baselines::{IndependentPairModel, SingleThresholdModel};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::mlp::{Layer, MlpModel};
use crate::model::{ExtendedClassifier, RejectModel, TrainedModel};
use crate::svm::SvmModel;

const HEADER: &str = "rejopt-model v1";

fn fail(line: usize, msg: impl Into<String>) -> Error {
    Error::ModelFormat { line, msg: msg.into() }
}

// ---------------------------------------------------------------- writing

fn push_floats(out: &mut String, key: &str, values: impl IntoIterator<Item = f64>) {
    out.push_str(key);
    out.push_str(" =");
    for v in values {
        let _ = write!(out, " {v}");
    }
    out.push('\n');
}

fn write_svm_block(out: &mut String, m: &SvmModel) {
    out.push_str("begin svm\n");
    match m.kernel() {
        KernelSpec::Linear => out.push_str("kernel = linear\n"),
        KernelSpec::Rbf { gamma } => {
            let _ = writeln!(out, "kernel = rbf {gamma}");
        }
    }
    let _ = writeln!(out, "c = {}", m.c());
    let _ = writeln!(out, "bias = {}", m.bias());
    let _ = writeln!(out, "dim = {}", m.dim());
    let _ = writeln!(out, "support = {}", m.n_support());
    push_floats(out, "coeffs", m.coeffs().iter().copied());
    push_floats(out, "costs", m.row_costs().iter().copied());
    for row in m.support_rows().rows() {
        push_floats(out, "row", row.iter().copied());
    }
    out.push_str("end svm\n");
}

fn write_mlp_block(out: &mut String, m: &MlpModel) {
    out.push_str("begin mlp\n");
    let _ = writeln!(out, "layers = {}", m.layers.len());
    for layer in &m.layers {
        let _ = writeln!(out, "layer = {} {}", layer.w.nrows(), layer.w.ncols());
        push_floats(out, "w", layer.w.iter().copied());
        push_floats(out, "b", layer.b.iter().copied());
    }
    push_floats(out, "out_w", m.out_w.iter().copied());
    push_floats(out, "u", m.u.iter().copied());
    let _ = writeln!(out, "bias = {}", m.bias);
    out.push_str("end mlp\n");
}

fn svm_finite(m: &SvmModel) -> bool {
    let kernel_ok = match m.kernel() {
        KernelSpec::Linear => true,
        KernelSpec::Rbf { gamma } => gamma.is_finite(),
    };
    kernel_ok
        && m.c().is_finite()
        && m.bias().is_finite()
        && m.coeffs().iter().all(|v| v.is_finite())
        && m.row_costs().iter().all(|v| v.is_finite())
        && m.support_rows().iter().all(|v| v.is_finite())
}

/// Serializes a model to the v1 text format. Fails on non-finite
/// parameters rather than writing a file that cannot be loaded back.
pub fn save_model(model: &TrainedModel) -> Result<String> {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    let _ = writeln!(out, "kind = {}", model.kind());
    let finite = match model {
        TrainedModel::Rejo(m) => {
            m.h.is_finite()
                && m.w_r.is_finite()
                && match &m.classifier {
                    ExtendedClassifier::Svm(s) => svm_finite(s),
                    ExtendedClassifier::Mlp(n) => {
                        n.layers
                            .iter()
                            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
                            && n.out_w.iter().chain(n.u.iter()).all(|v| v.is_finite())
                            && n.bias.is_finite()
                    }
                }
        }
        TrainedModel::SingleThreshold(m) => {
            m.t.is_finite() && m.w_r.is_finite() && svm_finite(&m.svm)
        }
        TrainedModel::IndependentPair(m) => {
            m.w_r.is_finite() && m.members.iter().all(svm_finite)
        }
    };
    if !finite {
        return Err(Error::NonFinite("model parameters".into()));
    }
    match model {
        TrainedModel::Rejo(m) => {
            let _ = writeln!(out, "p = {}", m.p);
            let _ = writeln!(out, "k = {}", m.k);
            let _ = writeln!(out, "h = {}", m.h);
            let _ = writeln!(out, "w_r = {}", m.w_r);
            match &m.classifier {
                ExtendedClassifier::Svm(s) => write_svm_block(&mut out, s),
                ExtendedClassifier::Mlp(n) => write_mlp_block(&mut out, n),
            }
        }
        TrainedModel::SingleThreshold(m) => {
            let _ = writeln!(out, "w_r = {}", m.w_r);
            let _ = writeln!(out, "threshold = {}", m.t);
            write_svm_block(&mut out, &m.svm);
        }
        TrainedModel::IndependentPair(m) => {
            let _ = writeln!(out, "k = {}", m.k);
            let _ = writeln!(out, "w_r = {}", m.w_r);
            let _ = writeln!(out, "members = {}", m.members.len());
            for member in &m.members {
                write_svm_block(&mut out, member);
            }
        }
    }
    Ok(out)
}

/// Saves a model to a file (see [`save_model`]).
pub fn write_model(path: impl AsRef<Path>, model: &TrainedModel) -> Result<()> {
    let text = save_model(model)?;
    std::fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------- parsing

struct Reader<'a> {
    lines: std::vec::IntoIter<(usize, &'a str)>,
    /// 1-based number of the last line handed out (for EOF reporting).
    last: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        let lines: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect();
        Self { lines: lines.into_iter(), last: 0 }
    }

    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        match self.lines.next() {
            Some((n, l)) => {
                self.last = n;
                Ok((n, l.trim_end()))
            }
            None => Err(fail(self.last + 1, "unexpected end of file")),
        }
    }

    /// Consumes a `key = value` line, checking the key.
    fn key_value(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, line) = self.next_line()?;
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| fail(n, format!("expected `{key} = ...`, got `{line}`")))?;
        if k.trim() != key {
            return Err(fail(n, format!("expected key `{key}`, got `{}`", k.trim())));
        }
        Ok((n, v.trim()))
    }

    fn expect_literal(&mut self, lit: &str) -> Result<()> {
        let (n, line) = self.next_line()?;
        if line != lit {
            return Err(fail(n, format!("expected `{lit}`, got `{line}`")));
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        for (n, l) in self.lines.by_ref() {
            if !l.trim().is_empty() {
                return Err(fail(n, "trailing content after model"));
            }
        }
        Ok(())
    }
}

fn parse_f64(n: usize, s: &str) -> Result<f64> {
    let v: f64 =
        s.parse().map_err(|_| fail(n, format!("expected a number, got `{s}`")))?;
    if !v.is_finite() {
        return Err(fail(n, format!("non-finite value `{s}`")));
    }
    Ok(v)
}

fn parse_usize(n: usize, s: &str) -> Result<usize> {
    s.parse().map_err(|_| fail(n, format!("expected a non-negative integer, got `{s}`")))
}

fn parse_floats(n: usize, s: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> =
        s.split_whitespace().map(|t| parse_f64(n, t)).collect::<Result<_>>()?;
    if values.len() != expected {
        return Err(fail(
            n,
            format!("{what}: expected {expected} values, got {}", values.len()),
        ));
    }
    Ok(values)
}

fn read_float_key(r: &mut Reader<'_>, key: &str) -> Result<f64> {
    let (n, v) = r.key_value(key)?;
    parse_f64(n, v)
}

fn read_usize_key(r: &mut Reader<'_>, key: &str) -> Result<usize> {
    let (n, v) = r.key_value(key)?;
    parse_usize(n, v)
}

fn parse_svm_block(r: &mut Reader<'_>) -> Result<SvmModel> {
    r.expect_literal("begin svm")?;
    let (kn, kv) = r.key_value("kernel")?;
    let kernel = if kv == "linear" {
        KernelSpec::Linear
    } else if let Some(g) = kv.strip_prefix("rbf ") {
        KernelSpec::Rbf { gamma: parse_f64(kn, g.trim())? }
    } else {
        return Err(fail(kn, format!("unknown kernel `{kv}`")));
    };
    kernel.validate().map_err(|e| fail(kn, e.to_string()))?;
    let c = read_float_key(r, "c")?;
    let bias = read_float_key(r, "bias")?;
    let dim = read_usize_key(r, "dim")?;
    if dim == 0 {
        return Err(fail(r.last, "dim must be >= 1"));
    }
    let support = read_usize_key(r, "support")?;
    let (n, v) = r.key_value("coeffs")?;
    let coeffs = parse_floats(n, v, support, "coeffs")?;
    let (n, v) = r.key_value("costs")?;
    let costs = parse_floats(n, v, support, "costs")?;
    let mut flat = Vec::with_capacity(support * dim);
    for _ in 0..support {
        let (n, v) = r.key_value("row")?;
        flat.extend(parse_floats(n, v, dim, "row")?);
    }
    r.expect_literal("end svm")?;
    let rows = Array2::from_shape_vec((support, dim), flat).expect("shape checked per row");
    Ok(SvmModel::from_parts(rows, coeffs, bias, kernel, c, costs))
}

fn parse_mlp_block(r: &mut Reader<'_>, p: usize, ext_len: usize) -> Result<MlpModel> {
    r.expect_literal("begin mlp")?;
    let n_layers = read_usize_key(r, "layers")?;
    let mut layers = Vec::with_capacity(n_layers);
    let mut fan_in = p;
    for _ in 0..n_layers {
        let (n, v) = r.key_value("layer")?;
        let sizes: Vec<&str> = v.split_whitespace().collect();
        if sizes.len() != 2 {
            return Err(fail(n, format!("expected `layer = <out> <in>`, got `{v}`")));
        }
        let rows = parse_usize(n, sizes[0])?;
        let cols = parse_usize(n, sizes[1])?;
        if rows == 0 || cols != fan_in {
            return Err(fail(
                n,
                format!("layer shape {rows}x{cols} does not follow fan-in {fan_in}"),
            ));
        }
        let (wn, wv) = r.key_value("w")?;
        let w_flat = parse_floats(wn, wv, rows * cols, "w")?;
        let (bn, bv) = r.key_value("b")?;
        let b = parse_floats(bn, bv, rows, "b")?;
        layers.push(Layer {
            w: Array2::from_shape_vec((rows, cols), w_flat).expect("length checked"),
            b: Array1::from_vec(b),
        });
        fan_in = rows;
    }
    let (n, v) = r.key_value("out_w")?;
    let out_w = parse_floats(n, v, fan_in, "out_w")?;
    let (n, v) = r.key_value("u")?;
    let u = parse_floats(n, v, ext_len, "u")?;
    let bias = read_float_key(r, "bias")?;
    r.expect_literal("end mlp")?;
    Ok(MlpModel {
        layers,
        out_w: Array1::from_vec(out_w),
        u: Array1::from_vec(u),
        bias,
        p,
    })
}

/// Parses the v1 text format produced by [`save_model`].
pub fn parse_model(text: &str) -> Result<TrainedModel> {
    let mut r = Reader::new(text);
    r.expect_literal(HEADER)?;
    let (kind_line, kind) = r.key_value("kind")?;
    let model = match kind {
        "rejo-svm" | "rejo-nn" => {
            let p = read_usize_key(&mut r, "p")?;
            let k = read_usize_key(&mut r, "k")?;
            if p == 0 || k < 2 {
                return Err(fail(r.last, format!("need p >= 1 and k >= 2, got p={p}, k={k}")));
            }
            let h = read_float_key(&mut r, "h")?;
            let w_r = read_float_key(&mut r, "w_r")?;
            let ext_len = 2 * (k - 1) - 1;
            let classifier = if kind == "rejo-svm" {
                let svm = parse_svm_block(&mut r)?;
                if svm.dim() != p + ext_len {
                    return Err(fail(
                        r.last,
                        format!("svm dim {} does not match p + {ext_len} = {}", svm.dim(), p + ext_len),
                    ));
                }
                ExtendedClassifier::Svm(svm)
            } else {
                ExtendedClassifier::Mlp(parse_mlp_block(&mut r, p, ext_len)?)
            };
            TrainedModel::Rejo(RejectModel { classifier, p, k, h, w_r })
        }
        "single-threshold" => {
            let w_r = read_float_key(&mut r, "w_r")?;
            let (tn, tv) = r.key_value("threshold")?;
            let t = parse_f64(tn, tv)?;
            if t < 0.0 {
                return Err(fail(tn, "threshold must be non-negative"));
            }
            let svm = parse_svm_block(&mut r)?;
            TrainedModel::SingleThreshold(SingleThresholdModel { svm, t, w_r })
        }
        "independent-pair" => {
            let k = read_usize_key(&mut r, "k")?;
            if k < 2 {
                return Err(fail(r.last, format!("k must be >= 2, got {k}")));
            }
            let w_r = read_float_key(&mut r, "w_r")?;
            let (mn, mv) = r.key_value("members")?;
            let members_n = parse_usize(mn, mv)?;
            if members_n != 2 * (k - 1) {
                return Err(fail(
                    mn,
                    format!("expected {} members for k = {k}, got {members_n}", 2 * (k - 1)),
                ));
            }
            let mut members = Vec::with_capacity(members_n);
            for _ in 0..members_n {
                members.push(parse_svm_block(&mut r)?);
            }
            if let Some(m) = members.iter().find(|m| m.dim() != members[0].dim()) {
                return Err(fail(
                    r.last,
                    format!("member dims disagree: {} vs {}", members[0].dim(), m.dim()),
                ));
            }
            TrainedModel::IndependentPair(IndependentPairModel { members, k, w_r })
        }
        other => return Err(fail(kind_line, format!("unknown model kind `{other}`"))),
    };
    r.finish()?;
    Ok(model)
}

/// Loads a model file (see [`parse_model`]).
pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path)?;
    parse_model(&text)
}
