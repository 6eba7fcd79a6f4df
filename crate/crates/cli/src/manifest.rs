//! TOML model manifest (`format_version = 1`).
//!
//! ```toml
//! format_version = 1
//!
//! [model]
//! dim = 1
//! n_dyn = 1            # optional
//! E = "E.mtx"          # optional, identity when omitted
//! A0 = "A0.mtx"
//! [[model.delays]]
//! tau = 1.0
//! A = "A1.mtx"
//!
//! [family]
//! kind = "delay_parameter"   # affine | tabulated | delay_parameter
//! p_range = [0.5, 3.0]
//! delay_index = 0            # 0-based, delay_parameter only
//! fd_step = 1e-6             # optional
//! [family.slope]             # affine: any omitted slot has zero slope
//! A0 = "dA0.mtx"
//! delays = ["dA1.mtx"]
//! [[family.snapshots]]       # tabulated: E and delays default to [model]
//! p = 0.0
//! A0 = "A0_0.mtx"
//!
//! [regime]
//! kind = "delay_param"       # single | multi | delay_param | wams
//! [regime.wams]
//! tau0 = 0.1
//! p_dr = 0.1
//! period = 0.02
//! alpha = 1e-3
//! shape = 2.0
//!
//! [tracking]
//! p_init = 1.0
//! p_fin = 2.0
//! dp = 1e-3
//! method = "euler"
//! corrector_every = 10
//! corrector_tol = 1e-10
//! fold_eps = 1e-4
//! reinit = false
//!
//! [init]
//! nodes = 16
//! shift = [0.0, 1.0]         # or f_target = 0.16 for shift = j 2π f_target
//! count = 6
//! ```
//!
//! Matrix paths are relative to the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use delaytrack::charfun::WamsSpec;
use delaytrack::model::{DelayTerm, DelayedLinearModel, FamilyKind, ModelDerivatives, ModelFamily};
use delaytrack::sparse::SparseMat;
use delaytrack::track::{InitSettings, Method, Regime, TrackOptions};
use num_complex::Complex64;
use serde::Deserialize;
use toml::Spanned;

use crate::error::CliError;
use crate::mtx::read_matrix_market;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    format_version: Spanned<i64>,
    model: Spanned<RawModel>,
    family: Option<Spanned<RawFamily>>,
    regime: Option<Spanned<RawRegime>>,
    tracking: Option<Spanned<RawTracking>>,
    init: Option<Spanned<RawInit>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    dim: Spanned<usize>,
    n_dyn: Option<usize>,
    #[serde(rename = "E")]
    e: Option<Spanned<String>>,
    #[serde(rename = "A0")]
    a0: Spanned<String>,
    #[serde(default)]
    delays: Vec<Spanned<RawDelay>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDelay {
    tau: f64,
    #[serde(rename = "A")]
    a: Spanned<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFamily {
    kind: Spanned<String>,
    p_range: Option<[f64; 2]>,
    fd_step: Option<f64>,
    delay_index: Option<usize>,
    slope: Option<RawSlope>,
    #[serde(default)]
    snapshots: Vec<Spanned<RawSnapshot>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSlope {
    #[serde(rename = "E")]
    e: Option<Spanned<String>>,
    #[serde(rename = "A0")]
    a0: Option<Spanned<String>>,
    #[serde(default)]
    delays: Vec<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSnapshot {
    p: f64,
    #[serde(rename = "E")]
    e: Option<Spanned<String>>,
    #[serde(rename = "A0")]
    a0: Spanned<String>,
    #[serde(default)]
    delays: Vec<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegime {
    kind: Spanned<String>,
    delay_index: Option<usize>,
    wams: Option<WamsSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTracking {
    p_init: Option<f64>,
    p_fin: Option<f64>,
    dp: Option<f64>,
    method: Option<Spanned<String>>,
    corrector_every: Option<usize>,
    corrector_tol: Option<f64>,
    fold_eps: Option<f64>,
    reinit: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInit {
    nodes: Option<usize>,
    shift: Option<[f64; 2]>,
    f_target: Option<f64>,
    count: Option<usize>,
}

/// A loaded manifest: the family plus the run settings it declares.
#[derive(Clone, Debug)]
pub struct Manifest {
    pub path: PathBuf,
    pub family: ModelFamily,
    pub p_init: f64,
    pub options: TrackOptions,
}

impl Manifest {
    pub fn regime(&self) -> &Regime {
        &self.options.regime
    }

    /// Re-targets a delay-parameter family (and its regime) at another delay.
    pub fn with_delay_index(mut self, index: usize) -> Result<Self, CliError> {
        let FamilyKind::DelayParameter { model, .. } = self.family.kind() else {
            return Err(CliError::Usage("--delay-index applies only to delay_parameter families".into()));
        };
        let mut family = ModelFamily::delay_parameter(model.clone(), index, self.family.p_range())?;
        if let Some(h) = self.family.fd_step() {
            family = family.with_fd_step(h);
        }
        self.family = family;
        self.options.regime = Regime::DelayParam { index };
        Ok(self)
    }
}

struct Ctx<'a> {
    path: &'a Path,
    dir: PathBuf,
    text: &'a str,
}

impl Ctx<'_> {
    fn line(&self, span: std::ops::Range<usize>) -> usize {
        self.text[..span.start.min(self.text.len())].matches('\n').count() + 1
    }

    fn err(&self, span: std::ops::Range<usize>, msg: impl Into<String>) -> CliError {
        CliError::Manifest { path: self.path.to_path_buf(), line: self.line(span), msg: msg.into() }
    }

    fn matrix(&self, file: &Spanned<String>, dim: usize, slot: &str) -> Result<SparseMat<f64>, CliError> {
        let m = read_matrix_market(&self.dir.join(file.get_ref()))?;
        if m.shape() != (dim, dim) {
            return Err(CliError::Dimension {
                path: self.path.to_path_buf(),
                line: self.line(file.span()),
                msg: format!(
                    "{slot} '{}' is {}x{}, model dimension is {dim}",
                    file.get_ref(),
                    m.nrows(),
                    m.ncols()
                ),
            });
        }
        Ok(m)
    }

    fn delay_list(
        &self,
        files: &[Spanned<String>],
        expected: usize,
        dim: usize,
        span: std::ops::Range<usize>,
        what: &str,
    ) -> Result<Vec<SparseMat<f64>>, CliError> {
        if files.len() != expected {
            return Err(CliError::Dimension {
                path: self.path.to_path_buf(),
                line: self.line(span),
                msg: format!("{what} lists {} delay matrices, model has {expected} delays", files.len()),
            });
        }
        files.iter().enumerate().map(|(j, f)| self.matrix(f, dim, &format!("delay matrix {j}"))).collect()
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::MissingFile { path: path.to_path_buf(), source: e })?;
    parse_manifest(&text, path)
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<Manifest, CliError> {
    let raw: RawManifest = toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(1, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        CliError::Manifest { path: path.to_path_buf(), line, msg: e.message().to_string() }
    })?;
    let ctx = Ctx { path, dir: path.parent().map(Path::to_path_buf).unwrap_or_default(), text };
    if *raw.format_version.get_ref() != 1 {
        return Err(ctx.err(
            raw.format_version.span(),
            format!("unsupported format_version {} (expected 1)", raw.format_version.get_ref()),
        ));
    }

    // Base model.
    let model_span = raw.model.span();
    let rm = raw.model.into_inner();
    let dim = *rm.dim.get_ref();
    if dim == 0 {
        return Err(ctx.err(rm.dim.span(), "dim must be positive"));
    }
    let e = match &rm.e {
        Some(f) => ctx.matrix(f, dim, "E")?,
        None => SparseMat::identity(dim),
    };
    let a0 = ctx.matrix(&rm.a0, dim, "A0")?;
    let mut delays = Vec::with_capacity(rm.delays.len());
    for d in &rm.delays {
        let m = ctx.matrix(&d.get_ref().a, dim, "delay matrix")?;
        delays.push(DelayTerm::new(d.get_ref().tau, m));
    }
    let mut base = DelayedLinearModel::new(e, a0, delays);
    if let Some(n) = rm.n_dyn {
        base = base.with_n_dyn(n);
    }
    let issues = base.validate();
    if !issues.is_empty() {
        let list: Vec<String> = issues.iter().map(ToString::to_string).collect();
        return Err(ctx.err(model_span, format!("invalid model: {}", list.join("; "))));
    }
    let mu = base.delay_count();

    let tracking = raw.tracking.map(Spanned::into_inner);
    let track_range = tracking.as_ref().and_then(|t| Some((t.p_init?, t.p_fin?)));

    // Family.
    let family = match raw.family {
        None => {
            let (a, b) = track_range.unwrap_or((0.0, 1.0));
            ModelFamily::constant(base.clone(), (a.min(b), a.max(b)))?
        }
        Some(sf) => {
            let fam_span = sf.span();
            let rf = sf.into_inner();
            let p_range = rf
                .p_range
                .map(|r| (r[0], r[1]))
                .or(track_range.map(|(a, b)| (a.min(b), a.max(b))));
            let need_range = || p_range.ok_or_else(|| ctx.err(fam_span.clone(), "family needs p_range"));
            let fam = match rf.kind.get_ref().as_str() {
                "affine" => {
                    let mut slope = ModelDerivatives::zeros_like(&base);
                    if let Some(s) = &rf.slope {
                        if let Some(f) = &s.e {
                            slope.d_e = ctx.matrix(f, dim, "slope E")?;
                        }
                        if let Some(f) = &s.a0 {
                            slope.d_a0 = ctx.matrix(f, dim, "slope A0")?;
                        }
                        if !s.delays.is_empty() {
                            slope.d_delays = ctx.delay_list(&s.delays, mu, dim, fam_span.clone(), "slope")?;
                        }
                    }
                    ModelFamily::affine(base.clone(), slope, need_range()?)?
                }
                "tabulated" => {
                    let mut snaps = Vec::with_capacity(rf.snapshots.len());
                    for ss in &rf.snapshots {
                        let s = ss.get_ref();
                        let e = match &s.e {
                            Some(f) => ctx.matrix(f, dim, "snapshot E")?,
                            None => base.e.clone(),
                        };
                        let a0 = ctx.matrix(&s.a0, dim, "snapshot A0")?;
                        let mats = if s.delays.is_empty() {
                            base.delays.iter().map(|d| d.matrix.clone()).collect()
                        } else {
                            ctx.delay_list(&s.delays, mu, dim, ss.span(), "snapshot")?
                        };
                        let delays = base.delays.iter().zip(mats).map(|(d, m)| DelayTerm::new(d.tau, m)).collect();
                        let mut m = DelayedLinearModel::new(e, a0, delays);
                        m.n_dyn = base.n_dyn;
                        snaps.push((s.p, m));
                    }
                    ModelFamily::tabulated(snaps).map_err(|e| ctx.err(fam_span.clone(), e.to_string()))?
                }
                "delay_parameter" => {
                    let index = rf.delay_index.unwrap_or(0);
                    ModelFamily::delay_parameter(base.clone(), index, need_range()?)
                        .map_err(|e| ctx.err(fam_span.clone(), e.to_string()))?
                }
                other => {
                    return Err(ctx.err(
                        rf.kind.span(),
                        format!("unknown family kind '{other}' (expected affine, tabulated or delay_parameter)"),
                    ))
                }
            };
            match rf.fd_step {
                Some(h) if !(h > 0.0) => return Err(ctx.err(fam_span, "fd_step must be positive")),
                Some(h) => fam.with_fd_step(h),
                None => fam,
            }
        }
    };

    // Regime.
    let regime = match raw.regime {
        None => match family.delay_index() {
            Some(index) => Regime::DelayParam { index },
            None if mu == 1 => Regime::Single,
            None => Regime::Multi,
        },
        Some(sr) => {
            let span = sr.span();
            let rr = sr.into_inner();
            match rr.kind.get_ref().as_str() {
                "single" => Regime::Single,
                "multi" => Regime::Multi,
                "delay_param" => {
                    let index = rr.delay_index.or(family.delay_index()).unwrap_or(0);
                    if family.delay_index() != Some(index) {
                        return Err(ctx.err(span, "delay_param regime needs a delay_parameter family over the same delay"));
                    }
                    Regime::DelayParam { index }
                }
                "wams" => {
                    let spec = rr.wams.ok_or_else(|| ctx.err(span.clone(), "wams regime needs a [regime.wams] table"))?;
                    spec.validate().map_err(|e| ctx.err(span.clone(), e.to_string()))?;
                    Regime::Wams(spec)
                }
                other => {
                    return Err(CliError::UnknownRegime {
                        path: path.to_path_buf(),
                        line: ctx.line(rr.kind.span()),
                        name: other.to_string(),
                    })
                }
            }
        }
    };
    if matches!(regime, Regime::Single | Regime::Wams(_)) && mu != 1 {
        return Err(CliError::Dimension {
            path: path.to_path_buf(),
            line: ctx.line(model_span),
            msg: format!("{} regime needs exactly one delay term, model has {mu}", regime.name()),
        });
    }

    // Tracking and initialization.
    let (lo, hi) = family.p_range();
    let t = tracking.unwrap_or(RawTracking {
        p_init: None,
        p_fin: None,
        dp: None,
        method: None,
        corrector_every: None,
        corrector_tol: None,
        fold_eps: None,
        reinit: None,
    });
    let p_init = t.p_init.unwrap_or(lo);
    let p_fin = t.p_fin.unwrap_or(hi);
    let mut options = TrackOptions::new(p_init, p_fin, regime);
    if let Some(dp) = t.dp {
        options.dp = dp;
    }
    if let Some(m) = &t.method {
        options.method = m.get_ref().parse::<Method>().map_err(|e| ctx.err(m.span(), e.to_string()))?;
    }
    if let Some(k) = t.corrector_every {
        options.corrector_every = k;
    }
    if let Some(v) = t.corrector_tol {
        options.corrector_tol = v;
    }
    if let Some(v) = t.fold_eps {
        options.fold_eps = v;
    }
    if let Some(v) = t.reinit {
        options.reinit = v;
    }
    if let Some(si) = raw.init {
        let span = si.span();
        let ri = si.into_inner();
        let mut init = InitSettings::default();
        if let Some(n) = ri.nodes {
            init.nodes = n;
        }
        if let Some(c) = ri.count {
            if c == 0 {
                return Err(ctx.err(span, "init.count must be at least 1"));
            }
            init.count = c;
        }
        init.shift = match (ri.shift, ri.f_target) {
            (Some(_), Some(_)) => return Err(ctx.err(span, "give either init.shift or init.f_target, not both")),
            (Some([re, im]), None) => Complex64::new(re, im),
            (None, Some(f)) => Complex64::new(0.0, 2.0 * std::f64::consts::PI * f),
            (None, None) => Complex64::new(0.0, 0.0),
        };
        options.init = init;
    }
    Ok(Manifest { path: path.to_path_buf(), family, p_init, options })
}
