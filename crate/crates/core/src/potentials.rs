//! Reaction terms `f`, their potentials `F = ∫ 2f`, and the ε-rescaled versions
//! `f_ε(t) = f(t/ε)/ε`, `F_ε(t) = F(t/ε)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used by the bisection in [`ReactionTerm::finv`].
const FINV_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// `f(s) = (6/T⁴) s (T−s)²` on `[0, T]`.
    Reference,
    /// Piecewise linear interpolation of `(s, f(s))` samples.
    Tabulated(Table),
}

#[derive(Debug, Clone, PartialEq)]
struct Table {
    s: Vec<f64>,
    f: Vec<f64>,
    /// `F` at the sample abscissae.
    cum: Vec<f64>,
}

impl Table {
    fn new(samples: &[[f64; 2]]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("tabulated term needs at least two samples"));
        }
        let s: Vec<f64> = samples.iter().map(|p| p[0]).collect();
        let f: Vec<f64> = samples.iter().map(|p| p[1]).collect();
        if s.iter().chain(f.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("tabulated samples must be finite"));
        }
        if s[0] != 0.0 {
            return Err(Error::invalid("tabulated samples must start at s = 0"));
        }
        if s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("tabulated abscissae must be strictly increasing"));
        }
        let mut cum = vec![0.0; s.len()];
        for k in 0..s.len() - 1 {
            cum[k + 1] = cum[k] + (s[k + 1] - s[k]) * (f[k] + f[k + 1]);
        }
        Ok(Table { s, f, cum })
    }

    fn segment(&self, v: f64) -> usize {
        match self.s.partition_point(|&x| x <= v) {
            0 => 0,
            k => (k - 1).min(self.s.len() - 2),
        }
    }

    fn f(&self, v: f64) -> f64 {
        let k = self.segment(v);
        let (s0, s1) = (self.s[k], self.s[k + 1]);
        let w = (v - s0) / (s1 - s0);
        self.f[k] * (1.0 - w) + self.f[k + 1] * w
    }

    fn fprime(&self, v: f64) -> f64 {
        let k = self.segment(v);
        (self.f[k + 1] - self.f[k]) / (self.s[k + 1] - self.s[k])
    }

    fn potential(&self, v: f64) -> f64 {
        let k = self.segment(v);
        let d = v - self.s[k];
        let slope = (self.f[k + 1] - self.f[k]) / (self.s[k + 1] - self.s[k]);
        self.cum[k] + 2.0 * (self.f[k] * d + 0.5 * slope * d * d)
    }
}

/// A nonlinearity `f ≥ 0` supported on `[0, T]`, together with the window `[0, τ]`
/// on which `c₀ s ≤ f(s) ≤ s / c₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TermWire", into = "TermWire")]
pub struct ReactionTerm {
    shape: Shape,
    support: f64,
    tau: f64,
    c0: f64,
}

impl ReactionTerm {
    /// The closed-form reference family `f(s) = (6/T⁴) s (T−s)²`, normalized so
    /// that `∫₀ᵀ 2f = 1`. Its window constants are `τ = T/2` and
    /// `c₀ = min(1, 3/(2T²), T²/6)`, the exact extremes of `f(s)/s` on `[0, T/2]`.
    pub fn reference(support: f64) -> Result<Self> {
        if !(support > 0.0 && support.is_finite()) {
            return Err(Error::invalid(format!("support endpoint T must be positive, got {support}")));
        }
        let t2 = support * support;
        let c0 = (1.5 / t2).min(t2 / 6.0).min(1.0);
        Ok(ReactionTerm { shape: Shape::Reference, support, tau: support / 2.0, c0 })
    }

    /// Piecewise linear `f` through `samples = [[s, f(s)], ...]`, starting at `s = 0`.
    /// The support endpoint is the last abscissa, `τ = T/2`, and `c₀` is the worst
    /// sampled ratio in the window. Normalization is not enforced; see [`validate`].
    pub fn tabulated(samples: &[[f64; 2]]) -> Result<Self> {
        let table = Table::new(samples)?;
        let support = *table.s.last().unwrap();
        let tau = support / 2.0;
        let mut c0 = 1.0_f64;
        for (&s, &f) in table.s.iter().zip(&table.f) {
            if s > 0.0 && s <= tau {
                let r = f / s;
                c0 = c0.min(r).min(if f > 0.0 { 1.0 / r } else { 0.0 });
            }
        }
        Ok(ReactionTerm { shape: Shape::Tabulated(table), support, tau, c0: c0.max(0.0) })
    }

    /// Overrides the window constants.
    pub fn with_window(mut self, tau: f64, c0: f64) -> Self {
        self.tau = tau;
        self.c0 = c0;
        self
    }

    /// Support endpoint `T`.
    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn is_reference(&self) -> bool {
        matches!(self.shape, Shape::Reference)
    }

    pub fn f(&self, s: f64) -> f64 {
        if s <= 0.0 || s >= self.support {
            return 0.0;
        }
        match &self.shape {
            Shape::Reference => {
                let t = self.support;
                let d = t - s;
                6.0 * s * d * d / (t * t * t * t)
            }
            Shape::Tabulated(tab) => tab.f(s),
        }
    }

    pub fn fprime(&self, s: f64) -> f64 {
        if s < 0.0 || s > self.support {
            return 0.0;
        }
        match &self.shape {
            Shape::Reference => {
                let t = self.support;
                6.0 * (t - s) * (t - 3.0 * s) / (t * t * t * t)
            }
            Shape::Tabulated(tab) => tab.fprime(s),
        }
    }

    /// `F(v) = ∫₀ᵛ 2f`, equal to 0 for `v ≤ 0` and constant for `v ≥ T`.
    pub fn potential(&self, v: f64) -> f64 {
        let v = v.clamp(0.0, self.support);
        match &self.shape {
            Shape::Reference => {
                let x = v / self.support;
                x * x * (6.0 - 8.0 * x + 3.0 * x * x)
            }
            Shape::Tabulated(tab) => tab.potential(v),
        }
    }

    /// Inverse of `F` on `[0, T]`, by bisection.
    pub fn finv(&self, y: f64) -> f64 {
        let top = self.potential(self.support);
        if y <= 0.0 {
            return 0.0;
        }
        if y >= top {
            return self.support;
        }
        let (mut lo, mut hi) = (0.0, self.support);
        while hi - lo > FINV_TOL {
            let mid = 0.5 * (lo + hi);
            if self.potential(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// The term rescaled at `eps ≥ 0`.
    pub fn scaled(&self, eps: f64) -> Result<Scaled<'_>> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("eps must be nonnegative, got {eps}")));
        }
        Ok(Scaled { term: self, eps })
    }
}

/// A reaction term at a fixed scale `ε`. At `ε = 0` only [`Scaled::potential`] is
/// meaningful (the indicator of `(0, ∞)`); `f` and `f'` report 0 there.
#[derive(Debug, Clone, Copy)]
pub struct Scaled<'a> {
    term: &'a ReactionTerm,
    eps: f64,
}

impl Scaled<'_> {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn term(&self) -> &ReactionTerm {
        self.term
    }

    #[inline]
    pub fn f(&self, t: f64) -> f64 {
        if self.eps == 0.0 {
            return 0.0;
        }
        self.term.f(t / self.eps) / self.eps
    }

    #[inline]
    pub fn fprime(&self, t: f64) -> f64 {
        if self.eps == 0.0 {
            return 0.0;
        }
        self.term.fprime(t / self.eps) / (self.eps * self.eps)
    }

    #[inline]
    pub fn potential(&self, t: f64) -> f64 {
        if self.eps == 0.0 {
            return if t > 0.0 { 1.0 } else { 0.0 };
        }
        if t <= 0.0 {
            0.0
        } else if t >= self.term.support * self.eps {
            self.term.potential(self.term.support)
        } else {
            self.term.potential(t / self.eps)
        }
    }
}

/// `f_ε(t) = f(t/ε)/ε`.
pub fn f_eps(term: &ReactionTerm, eps: f64, t: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    Ok(term.scaled(eps)?.f(t))
}

/// `F_ε(t)`; for `eps = 0` the indicator of `t > 0`.
pub fn potential_eps(term: &ReactionTerm, eps: f64, t: f64) -> Result<f64> {
    Ok(term.scaled(eps)?.potential(t))
}

/// One structural condition checked by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub pass: bool,
    /// Worst measured value for the condition (see [`validate`]).
    pub measured: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub conditions: Vec<Condition>,
    /// `|∫₀ᵀ 2f − 1|`.
    pub normalization_error: f64,
    pub pass: bool,
}

impl ValidationReport {
    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

/// Checks the structural hypotheses on `f` by sampling with `n_samples` points:
///
/// * `nonnegativity`: measured = min f on `[−T/4, 5T/4]`;
/// * `support`: measured = max |f| outside `[0, T]`; also requires `f > 0` inside;
/// * `normalization`: measured = `|∫₀ᵀ 2f − 1|` (composite Simpson), pass below 1e−8;
/// * `window`: measured = min of `f(s)/(c₀s)` and `s/(c₀ f(s))` over `(0, τ]`, pass at ≥ 1.
pub fn validate(term: &ReactionTerm, n_samples: usize) -> Result<ValidationReport> {
    if n_samples < 100 {
        return Err(Error::invalid("validate needs at least 100 samples"));
    }
    let t = term.support;
    let n = n_samples;

    let mut min_f = f64::INFINITY;
    let mut outside = 0.0_f64;
    let mut interior_positive = true;
    for k in 0..=n {
        let s = -0.25 * t + 1.5 * t * k as f64 / n as f64;
        let v = term.f(s);
        min_f = min_f.min(v);
        if s < 0.0 || s > t {
            outside = outside.max(v.abs());
        } else if s > 0.0 && s < t && v <= 0.0 {
            interior_positive = false;
        }
    }

    let integral = 2.0 * simpson_with_breaks(|s| term.f(s), &breakpoints(term), n);
    let normalization_error = (integral - 1.0).abs();

    let mut window = f64::INFINITY;
    let c0 = term.c0;
    for k in 1..=n {
        let s = term.tau * k as f64 / n as f64;
        let v = term.f(s);
        let lower = if c0 * s > 0.0 { v / (c0 * s) } else { f64::INFINITY };
        let upper = if v > 0.0 { s / (c0 * v) } else { f64::INFINITY };
        window = window.min(lower).min(upper);
    }
    let window_ok = term.tau > 0.0 && term.tau < t && c0 > 0.0 && c0 <= 1.0 && window >= 1.0 - 1e-12;

    let conditions = vec![
        Condition { name: "nonnegativity".into(), pass: min_f >= 0.0, measured: min_f },
        Condition { name: "support".into(), pass: outside == 0.0 && interior_positive, measured: outside },
        Condition { name: "normalization".into(), pass: normalization_error < 1e-8, measured: normalization_error },
        Condition { name: "window".into(), pass: window_ok, measured: window },
    ];
    let pass = conditions.iter().all(|c| c.pass);
    Ok(ValidationReport { conditions, normalization_error, pass })
}

fn breakpoints(term: &ReactionTerm) -> Vec<f64> {
    match &term.shape {
        Shape::Reference => vec![0.0, term.support],
        Shape::Tabulated(tab) => tab.s.clone(),
    }
}

/// Composite Simpson over each interval between consecutive breakpoints, with at
/// least `n` subintervals in total.
fn simpson_with_breaks(g: impl Fn(f64) -> f64, breaks: &[f64], n: usize) -> f64 {
    let per = (n / (breaks.len() - 1)).max(2);
    let per = per + per % 2;
    breaks
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let h = (b - a) / per as f64;
            let mut acc = g(a) + g(b);
            for k in 1..per {
                acc += if k % 2 == 1 { 4.0 } else { 2.0 } * g(a + h * k as f64);
            }
            acc * h / 3.0
        })
        .sum()
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
enum TermWire {
    Reference {
        #[serde(rename = "T")]
        support: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tau: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c0: Option<f64>,
    },
    Tabulated {
        samples: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tau: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c0: Option<f64>,
    },
}

impl TryFrom<TermWire> for ReactionTerm {
    type Error = Error;

    fn try_from(w: TermWire) -> Result<Self> {
        let (term, tau, c0) = match w {
            TermWire::Reference { support, tau, c0 } => (ReactionTerm::reference(support)?, tau, c0),
            TermWire::Tabulated { samples, tau, c0 } => (ReactionTerm::tabulated(&samples)?, tau, c0),
        };
        let tau = tau.unwrap_or(term.tau);
        let c0 = c0.unwrap_or(term.c0);
        if !(tau.is_finite() && c0.is_finite()) {
            return Err(Error::invalid("window constants must be finite"));
        }
        Ok(term.with_window(tau, c0))
    }
}

impl From<ReactionTerm> for TermWire {
    fn from(t: ReactionTerm) -> Self {
        match t.shape {
            Shape::Reference => TermWire::Reference { support: t.support, tau: Some(t.tau), c0: Some(t.c0) },
            Shape::Tabulated(tab) => {
                TermWire::Tabulated { samples: tab.s.iter().zip(&tab.f).map(|(&s, &f)| [s, f]).collect(), tau: Some(t.tau), c0: Some(t.c0) }
            }
        }
    }
}

impl ReactionTerm {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("reaction term serializes")
    }

    /// `n + 1` equispaced samples of `f` on `[0, T]`.
    pub fn tabulate(&self, n: usize) -> Vec<[f64; 2]> {
        (0..=n)
            .map(|k| {
                let s = self.support * k as f64 / n as f64;
                [s, self.f(s)]
            })
            .collect()
    }
}
