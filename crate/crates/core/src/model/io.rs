//! Structured-text model container.
//!
//! ```text
//! AUDM 1
//! K 2
//! M 1
//! dim 1
//! gamma 1.0000000000000000e0
//! ...                      (remaining hyperparameters, one per line)
//! meta mean_normalize=0    (optional free-form key=value lines)
//! unit_alpha <K values>
//! unit 0
//! trans 0 <self> <advance>
//! trans 1 <self> <advance>
//! trans 2 <self> <advance>
//! state 0
//! mix <M values>
//! comp 0
//! mean <D values>
//! kappa <D values>
//! shape <D values>
//! rate <D values>
//! ...
//! end
//! ```
//!
//! Every real is printed with 17 significant digits so a load restores the
//! exact bits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{GmmState, HyperParams, NormalGamma, PhoneLoopPosterior, UnitPosterior, N_STATES};
use crate::error::{AudError, Result};

pub const MODEL_MAGIC: &str = "AUDM";
pub const MODEL_VERSION: u32 = 1;

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn push_line(out: &mut String, key: &str, values: &[f64]) {
    out.push_str(key);
    for v in values {
        out.push(' ');
        out.push_str(&fmt_f64(*v));
    }
    out.push('\n');
}

/// Line cursor with keyed accessors; errors name the expected field.
pub(crate) struct Tokens<'a> {
    lines: std::iter::Peekable<std::iter::Filter<std::str::Lines<'a>, fn(&&str) -> bool>>,
}

fn keep(l: &&str) -> bool {
    !l.trim().is_empty()
}

impl<'a> Tokens<'a> {
    pub fn new(text: &'a str) -> Self {
        Self { lines: text.lines().filter(keep as fn(&&str) -> bool).peekable() }
    }

    pub fn peek_key(&mut self) -> Option<&'a str> {
        self.lines.peek().and_then(|l| l.split_whitespace().next())
    }

    pub fn line(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let line = self.lines.next().ok_or_else(|| AudError::format(key, "unexpected end of file"))?;
        let mut it = line.split_whitespace();
        match it.next() {
            Some(k) if k == key => Ok(it.collect()),
            other => Err(AudError::format(key, format!("expected `{key}`, found `{}`", other.unwrap_or("")))),
        }
    }

    pub fn floats(&mut self, key: &str, n: usize) -> Result<Vec<f64>> {
        let toks = self.line(key)?;
        if toks.len() != n {
            return Err(AudError::format(key, format!("expected {n} values, found {}", toks.len())));
        }
        toks.iter().map(|t| parse_f64(key, t)).collect()
    }

    pub fn float(&mut self, key: &str) -> Result<f64> {
        Ok(self.floats(key, 1)?[0])
    }

    pub fn uint(&mut self, key: &str) -> Result<u64> {
        let toks = self.line(key)?;
        match toks.as_slice() {
            [t] => t.parse().map_err(|_| AudError::format(key, format!("bad integer {t:?}"))),
            _ => Err(AudError::format(key, "expected one integer")),
        }
    }

    pub fn indexed(&mut self, key: &str, index: usize) -> Result<Vec<&'a str>> {
        let toks = self.line(key)?;
        match toks.split_first() {
            Some((i, rest)) if i.parse::<usize>().ok() == Some(index) => Ok(rest.to_vec()),
            _ => Err(AudError::format(key, format!("expected `{key} {index}`"))),
        }
    }
}

pub(crate) fn parse_f64(field: &str, t: &str) -> Result<f64> {
    t.parse::<f64>().map_err(|_| AudError::format(field, format!("bad number {t:?}")))
}

pub(crate) fn write_hyper(out: &mut String, h: &HyperParams) {
    let _ = writeln!(out, "K {}", h.n_units);
    let _ = writeln!(out, "M {}", h.n_components);
    let _ = writeln!(out, "dim {}", h.dim());
    push_line(out, "gamma", &[h.gamma]);
    push_line(out, "alpha_mix", &[h.alpha_mix]);
    push_line(out, "alpha_trans", &[h.alpha_trans]);
    let _ = writeln!(out, "seed {}", h.seed);
    push_line(out, "perturb_scale", &[h.perturb_scale]);
    push_line(out, "prior_mean", &h.prior_mean);
    push_line(out, "prior_kappa", &h.prior_kappa);
    push_line(out, "prior_shape", &h.prior_shape);
    push_line(out, "prior_rate", &h.prior_rate);
}

pub(crate) fn parse_hyper(tok: &mut Tokens<'_>) -> Result<HyperParams> {
    let n_units = tok.uint("K")? as usize;
    let n_components = tok.uint("M")? as usize;
    let dim = tok.uint("dim")? as usize;
    let h = HyperParams {
        n_units,
        n_components,
        gamma: tok.float("gamma")?,
        alpha_mix: tok.float("alpha_mix")?,
        alpha_trans: tok.float("alpha_trans")?,
        seed: tok.uint("seed")?,
        perturb_scale: tok.float("perturb_scale")?,
        prior_mean: tok.floats("prior_mean", dim)?,
        prior_kappa: tok.floats("prior_kappa", dim)?,
        prior_shape: tok.floats("prior_shape", dim)?,
        prior_rate: tok.floats("prior_rate", dim)?,
    };
    h.validate()?;
    Ok(h)
}

pub(crate) fn write_unit_block(out: &mut String, u: &UnitPosterior) {
    for (s, t) in u.trans_alpha.iter().enumerate() {
        push_line(out, &format!("trans {s}"), t);
    }
    for (s, st) in u.states.iter().enumerate() {
        let _ = writeln!(out, "state {s}");
        push_line(out, "mix", &st.mix_alpha);
        for (c, g) in st.components.iter().enumerate() {
            let _ = writeln!(out, "comp {c}");
            push_line(out, "mean", &g.mean);
            push_line(out, "kappa", &g.kappa);
            push_line(out, "shape", &g.shape);
            push_line(out, "rate", &g.rate);
        }
    }
}

pub(crate) fn parse_unit_block(tok: &mut Tokens<'_>, m: usize, dim: usize) -> Result<UnitPosterior> {
    let mut trans_alpha = [[0.0; 2]; N_STATES];
    for (s, row) in trans_alpha.iter_mut().enumerate() {
        let vals = tok.indexed("trans", s)?;
        if vals.len() != 2 {
            return Err(AudError::format("trans", "expected 2 values"));
        }
        *row = [parse_f64("trans", vals[0])?, parse_f64("trans", vals[1])?];
    }
    let mut states = Vec::with_capacity(N_STATES);
    for s in 0..N_STATES {
        tok.indexed("state", s)?;
        let mix_alpha = tok.floats("mix", m)?;
        let mut components = Vec::with_capacity(m);
        for c in 0..m {
            tok.indexed("comp", c)?;
            components.push(NormalGamma {
                mean: tok.floats("mean", dim)?,
                kappa: tok.floats("kappa", dim)?,
                shape: tok.floats("shape", dim)?,
                rate: tok.floats("rate", dim)?,
            });
        }
        states.push(GmmState { mix_alpha, components });
    }
    let states: [GmmState; N_STATES] = states.try_into().expect("three states");
    let unit = UnitPosterior { states, trans_alpha };
    unit.validate(m, dim)?;
    Ok(unit)
}

/// A serialized model plus free-form metadata (e.g. preprocessing flags).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub posterior: PhoneLoopPosterior,
    pub meta: Vec<(String, String)>,
}

impl ModelFile {
    pub fn new(posterior: PhoneLoopPosterior) -> Self {
        Self { posterior, meta: Vec::new() }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let p = &self.posterior;
        let mut out = format!("{MODEL_MAGIC} {MODEL_VERSION}\n");
        write_hyper(&mut out, &p.hyper);
        for (k, v) in &self.meta {
            let _ = writeln!(out, "meta {k}={v}");
        }
        push_line(&mut out, "unit_alpha", &p.unit_alpha);
        for (k, u) in p.units.iter().enumerate() {
            let _ = writeln!(out, "unit {k}");
            write_unit_block(&mut out, u);
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tok = Tokens::new(text);
        let version = tok.line(MODEL_MAGIC).map_err(|_| AudError::format("magic", "not an AUDM model file"))?;
        if version != [MODEL_VERSION.to_string().as_str()] {
            return Err(AudError::format("version", format!("unsupported model version {version:?}")));
        }
        let hyper = parse_hyper(&mut tok)?;
        let mut meta = Vec::new();
        while tok.peek_key() == Some("meta") {
            for kv in tok.line("meta")? {
                let (k, v) = kv.split_once('=').ok_or_else(|| AudError::format("meta", "expected key=value"))?;
                meta.push((k.to_string(), v.to_string()));
            }
        }
        let (k, m, dim) = (hyper.n_units, hyper.n_components, hyper.dim());
        let unit_alpha = tok.floats("unit_alpha", k)?;
        let mut units = Vec::with_capacity(k);
        for i in 0..k {
            tok.indexed("unit", i)?;
            units.push(parse_unit_block(&mut tok, m, dim)?);
        }
        tok.line("end")?;
        let posterior = PhoneLoopPosterior { units, unit_alpha, hyper };
        posterior.validate()?;
        Ok(Self { posterior, meta })
    }
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| AudError::io(path, e))?;
    ModelFile::from_text(&text)
}

pub fn write_model(path: impl AsRef<Path>, model: &ModelFile) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model.to_text()).map_err(|e| AudError::io(path, e))
}
