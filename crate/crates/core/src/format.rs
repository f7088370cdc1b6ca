//! Plain-text formats for networks, fit results and datasets.
//!
//! A network file is a header line, `key value` metadata lines, `depth` and
//! `widths`, then each weight matrix `W<l> <rows> <cols>` followed by its
//! rows, one per line. Values use 17 significant digits so they read back
//! bit for bit. Blank lines and lines starting with `#` are ignored.
//!
//! ```text
//! scalereg network v1
//! depth 1
//! widths 1 1 1
//! W0 1 1
//! 5.0000000000000000e-1
//! W1 1 1
//! -5.0000000000000000e-1
//! ```

use std::fmt::Write as _;
use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::estimator::FitResult;
use crate::network::{Activation, Architecture, Dataset, NetworkParams, ScaledNetwork};
use crate::regularizers::RegularizerKind;

pub const NETWORK_HEADER: &str = "scalereg network v1";
pub const FIT_HEADER: &str = "scalereg fit v1";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_body(out: &mut String, omega: &NetworkParams) {
    let arch = omega.arch();
    let widths: Vec<String> = arch.widths().iter().map(|w| w.to_string()).collect();
    writeln!(out, "depth {}", arch.depth()).unwrap();
    writeln!(out, "widths {}", widths.join(" ")).unwrap();
    for (l, w) in omega.layers().iter().enumerate() {
        writeln!(out, "W{l} {} {}", w.nrows(), w.ncols()).unwrap();
        for row in w.rows() {
            let vals: Vec<String> = row.iter().map(|&v| num(v)).collect();
            writeln!(out, "{}", vals.join(" ")).unwrap();
        }
    }
}

pub fn write_network(omega: &NetworkParams) -> String {
    let mut out = format!("{NETWORK_HEADER}\n");
    write_body(&mut out, omega);
    out
}

pub fn write_scaled_network(net: &ScaledNetwork) -> String {
    let mut out = format!("{NETWORK_HEADER}\nkappa {}\n", num(net.kappa));
    write_body(&mut out, &net.omega);
    out
}

/// Result of a fit together with the settings needed to reuse it.
#[derive(Clone, Debug, PartialEq)]
pub struct FitRecord {
    pub net: ScaledNetwork,
    pub activation: Activation,
    pub regularizer: RegularizerKind,
    pub lambda: f64,
    pub objective: f64,
    pub iterations: usize,
    pub restart: usize,
}

impl FitRecord {
    pub fn new(res: &FitResult, activation: Activation, regularizer: RegularizerKind, lambda: f64) -> Self {
        Self {
            net: res.net.clone(),
            activation,
            regularizer,
            lambda,
            objective: res.objective,
            iterations: res.iterations,
            restart: res.restart_index,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{FIT_HEADER}\n");
        write!(out, "activation {}", self.activation.name()).unwrap();
        match self.activation {
            Activation::LeakyRelu(c) | Activation::Elu(c) => writeln!(out, " {}", num(c)).unwrap(),
            _ => out.push('\n'),
        }
        writeln!(out, "regularizer {}", self.regularizer.name()).unwrap();
        writeln!(out, "lambda {}", num(self.lambda)).unwrap();
        writeln!(out, "objective {}", num(self.objective)).unwrap();
        writeln!(out, "iterations {}", self.iterations).unwrap();
        writeln!(out, "restart {}", self.restart).unwrap();
        writeln!(out, "kappa {}", num(self.net.kappa)).unwrap();
        write_body(&mut out, &self.net.omega);
        out
    }
}

/// Meaningful lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("'{tok}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("'{tok}' is not finite")));
    }
    Ok(v)
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("'{tok}' is not a nonnegative integer")))
}

struct Parsed<'a> {
    meta: Vec<(usize, &'a str, Vec<&'a str>)>,
    omega: NetworkParams,
}

fn parse_document<'a>(text: &'a str, header: &str) -> Result<Parsed<'a>> {
    let all: Vec<(usize, &str)> = lines(text).collect();
    let mut it = all.iter().copied().peekable();
    match it.next() {
        Some((_, l)) if l == header => {}
        Some((n, _)) => return Err(Error::parse(n, format!("expected '{header}'"))),
        None => return Err(Error::parse(1, "empty input")),
    }
    let mut meta = Vec::new();
    let mut depth = None;
    let mut widths: Option<Vec<usize>> = None;
    while let Some(&(n, l)) = it.peek() {
        if l.starts_with('W') {
            break;
        }
        it.next();
        let mut toks = l.split_whitespace();
        let key = toks.next().unwrap_or_default();
        let rest: Vec<&str> = toks.collect();
        match key {
            "depth" => {
                if rest.len() != 1 || depth.is_some() {
                    return Err(Error::parse(n, "expected a single 'depth' value"));
                }
                depth = Some(parse_usize(rest[0], n)?);
            }
            "widths" => {
                if widths.is_some() {
                    return Err(Error::parse(n, "duplicate 'widths'"));
                }
                let ws = rest.iter().map(|t| parse_usize(t, n)).collect::<Result<Vec<_>>>()?;
                // Every weight needs its own token, which bounds any sane width.
                if ws.iter().any(|&w| w > text.len()) {
                    return Err(Error::parse(n, "width larger than the input"));
                }
                widths = Some(ws);
            }
            _ => meta.push((n, key, rest)),
        }
    }
    let at = all.last().map_or(1, |l| l.0);
    let widths = widths.ok_or_else(|| Error::parse(at, "missing 'widths'"))?;
    let depth = depth.ok_or_else(|| Error::parse(at, "missing 'depth'"))?;
    let arch = Architecture::new(widths).map_err(|e| Error::parse(at, e.to_string()))?;
    if arch.depth() != depth {
        return Err(Error::parse(at, format!("depth {depth} does not match widths")));
    }
    let mut layers = Vec::with_capacity(arch.num_layers());
    for l in 0..arch.num_layers() {
        let (rows, cols) = arch.layer_shape(l);
        let (n, head) = it
            .next()
            .ok_or_else(|| Error::parse(at, format!("missing layer W{l}")))?;
        let expected = format!("W{l} {rows} {cols}");
        if head.split_whitespace().collect::<Vec<_>>().join(" ") != expected {
            return Err(Error::parse(n, format!("expected '{expected}'")));
        }
        let mut values = Vec::with_capacity(rows.saturating_mul(cols).min(text.len()));
        for _ in 0..rows {
            let (n, row) = it
                .next()
                .ok_or_else(|| Error::parse(at, format!("layer W{l} is missing rows")))?;
            let vals = row.split_whitespace().map(|t| parse_f64(t, n)).collect::<Result<Vec<_>>>()?;
            if vals.len() != cols {
                return Err(Error::parse(n, format!("expected {cols} values, got {}", vals.len())));
            }
            values.extend(vals);
        }
        layers.push(Array2::from_shape_vec((rows, cols), values).expect("rows × cols values"));
    }
    if let Some((n, _)) = it.next() {
        return Err(Error::parse(n, "trailing content after the last layer"));
    }
    let omega = NetworkParams::from_layers(layers).map_err(|e| Error::parse(at, e.to_string()))?;
    Ok(Parsed { meta, omega })
}

fn single<'a>(meta: &[(usize, &str, Vec<&'a str>)], key: &str) -> Result<Option<(usize, &'a str)>> {
    let mut found = None;
    for (n, k, rest) in meta {
        if *k == key {
            if found.is_some() {
                return Err(Error::parse(*n, format!("duplicate '{key}'")));
            }
            if rest.len() != 1 {
                return Err(Error::parse(*n, format!("'{key}' takes one value")));
            }
            found = Some((*n, rest[0]));
        }
    }
    Ok(found)
}

fn reject_unknown(meta: &[(usize, &str, Vec<&str>)], allowed: &[&str]) -> Result<()> {
    match meta.iter().find(|(_, k, _)| !allowed.contains(k)) {
        Some((n, k, _)) => Err(Error::parse(*n, format!("unknown key '{k}'"))),
        None => Ok(()),
    }
}

pub fn parse_network(text: &str) -> Result<NetworkParams> {
    let p = parse_document(text, NETWORK_HEADER)?;
    reject_unknown(&p.meta, &[])?;
    Ok(p.omega)
}

/// Reads a network with a `kappa` line.
pub fn parse_scaled_network(text: &str) -> Result<ScaledNetwork> {
    let p = parse_document(text, NETWORK_HEADER)?;
    reject_unknown(&p.meta, &["kappa"])?;
    let (n, tok) = single(&p.meta, "kappa")?.ok_or_else(|| Error::parse(1, "missing 'kappa'"))?;
    let kappa = parse_f64(tok, n)?;
    ScaledNetwork::new(kappa, p.omega).map_err(|e| Error::parse(n, e.to_string()))
}

pub fn parse_fit_record(text: &str) -> Result<FitRecord> {
    let p = parse_document(text, FIT_HEADER)?;
    reject_unknown(
        &p.meta,
        &["activation", "regularizer", "lambda", "objective", "iterations", "restart", "kappa"],
    )?;
    let need = |key: &str| -> Result<(usize, &str)> {
        single(&p.meta, key)?.ok_or_else(|| Error::parse(1, format!("missing '{key}'")))
    };
    let (an, act_line) = p
        .meta
        .iter()
        .find(|(_, k, _)| *k == "activation")
        .map(|(n, _, rest)| (*n, rest.clone()))
        .ok_or_else(|| Error::parse(1, "missing 'activation'"))?;
    if p.meta.iter().filter(|(_, k, _)| *k == "activation").count() > 1 || act_line.is_empty() || act_line.len() > 2 {
        return Err(Error::parse(an, "expected 'activation <name> [param]'"));
    }
    let param = act_line.get(1).map(|t| parse_f64(t, an)).transpose()?;
    let activation = Activation::from_name(act_line[0], param).map_err(|e| Error::parse(an, e.to_string()))?;
    let (rn, reg) = need("regularizer")?;
    let regularizer = reg.parse().map_err(|e: Error| Error::parse(rn, e.to_string()))?;
    let (ln, lam) = need("lambda")?;
    let lambda = parse_f64(lam, ln)?;
    if lambda < 0.0 {
        return Err(Error::parse(ln, "lambda must be nonnegative"));
    }
    let (on, obj) = need("objective")?;
    let (itn, its) = need("iterations")?;
    let (rsn, rs) = need("restart")?;
    let (kn, k) = need("kappa")?;
    let kappa = parse_f64(k, kn)?;
    Ok(FitRecord {
        net: ScaledNetwork::new(kappa, p.omega).map_err(|e| Error::parse(kn, e.to_string()))?,
        activation,
        regularizer,
        lambda,
        objective: parse_f64(obj, on)?,
        iterations: parse_usize(its, itn)?,
        restart: parse_usize(rs, rsn)?,
    })
}

/// Dataset CSV with header `x0,…,x{d−1},y` and an optional `truth` column.
pub fn write_dataset_csv<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    if data.truth().is_some() {
        header.push("truth".into());
    }
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec: Vec<String> = data.inputs().row(i).iter().map(|v| v.to_string()).collect();
        rec.push(data.responses()[i].to_string());
        if let Some(t) = data.truth() {
            rec.push(t[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(input: R) -> Result<Dataset> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    let has_truth = header.last().is_some_and(|h| h == "truth");
    let d = header.len().saturating_sub(if has_truth { 2 } else { 1 });
    let expected: Vec<String> = (0..d)
        .map(|j| format!("x{j}"))
        .chain(std::iter::once("y".to_string()))
        .chain(has_truth.then(|| "truth".to_string()))
        .collect();
    if d == 0 || header != expected {
        return Err(Error::parse(1, "expected header x0,...,x{d-1},y[,truth]"));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut truth = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let vals = rec.iter().map(|t| parse_f64(t.trim(), line)).collect::<Result<Vec<_>>>()?;
        if vals.len() != header.len() {
            return Err(Error::parse(line, format!("expected {} columns", header.len())));
        }
        x.extend_from_slice(&vals[..d]);
        y.push(vals[d]);
        if has_truth {
            truth.push(vals[d + 1]);
        }
    }
    let n = y.len();
    if n == 0 {
        return Err(Error::Empty("dataset"));
    }
    let x = Array2::from_shape_vec((n, d), x).expect("n·d values");
    Dataset::new(x, Array1::from(y), has_truth.then(|| Array1::from(truth)))
}
