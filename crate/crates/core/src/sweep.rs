//! One-parameter scans of the closed-form steady state, rendered as CSV.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{steady_observables, SteadyObservables};
use crate::error::{Error, Result};
use crate::model::{drift_diffusion, SystemParams};

/// Longest grid a spec may request.
pub const MAX_POINTS: usize = 10_000_000;

/// The five physical parameters, in CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Param {
    #[serde(rename = "A")]
    Gain,
    #[serde(rename = "kappa")]
    Kappa,
    #[serde(rename = "eta")]
    Eta,
    #[serde(rename = "omega")]
    Omega,
    #[serde(rename = "N")]
    Noise,
}

impl Param {
    pub const ALL: [Param; 5] = [Param::Gain, Param::Kappa, Param::Eta, Param::Omega, Param::Noise];

    pub fn name(self) -> &'static str {
        match self {
            Param::Gain => "A",
            Param::Kappa => "kappa",
            Param::Eta => "eta",
            Param::Omega => "omega",
            Param::Noise => "N",
        }
    }

    pub fn get(self, p: &SystemParams) -> f64 {
        match self {
            Param::Gain => p.gain,
            Param::Kappa => p.kappa,
            Param::Eta => p.eta,
            Param::Omega => p.omega,
            Param::Noise => p.noise,
        }
    }

    fn set(self, p: &mut SystemParams, v: f64) {
        match self {
            Param::Gain => p.gain = v,
            Param::Kappa => p.kappa = v,
            Param::Eta => p.eta = v,
            Param::Omega => p.omega = v,
            Param::Noise => p.noise = v,
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown parameter `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    VarMinusCav,
    VarMinusOut,
    VarPlusCav,
    VarPlusOut,
    NCav,
    NOut,
    SqueezePctCav,
    SqueezePctOut,
    LambdaMinus,
    BelowThreshold,
}

impl Observable {
    pub const ALL: [Observable; 10] = [
        Observable::VarMinusCav,
        Observable::VarMinusOut,
        Observable::VarPlusCav,
        Observable::VarPlusOut,
        Observable::NCav,
        Observable::NOut,
        Observable::SqueezePctCav,
        Observable::SqueezePctOut,
        Observable::LambdaMinus,
        Observable::BelowThreshold,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Observable::VarMinusCav => "var_minus_cav",
            Observable::VarMinusOut => "var_minus_out",
            Observable::VarPlusCav => "var_plus_cav",
            Observable::VarPlusOut => "var_plus_out",
            Observable::NCav => "n_cav",
            Observable::NOut => "n_out",
            Observable::SqueezePctCav => "squeeze_pct_cav",
            Observable::SqueezePctOut => "squeeze_pct_out",
            Observable::LambdaMinus => "lambda_minus",
            Observable::BelowThreshold => "below_threshold",
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Observable::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown observable `{s}`")))
    }
}

/// Steady observables at one point; `None` above threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEval {
    pub params: SystemParams,
    pub below_threshold: bool,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub observables: Option<SteadyObservables>,
}

impl PointEval {
    /// Numeric value of `obs`; every column but `below_threshold` is empty
    /// above threshold.
    pub fn value(&self, obs: Observable) -> Option<f64> {
        if obs == Observable::BelowThreshold {
            return Some(if self.below_threshold { 1.0 } else { 0.0 });
        }
        let o = self.observables.as_ref()?;
        Some(match obs {
            Observable::VarMinusCav => o.var_minus_cav,
            Observable::VarMinusOut => o.var_minus_out,
            Observable::VarPlusCav => o.var_plus_cav,
            Observable::VarPlusOut => o.var_plus_out,
            Observable::NCav => o.n_cav,
            Observable::NOut => o.n_out,
            Observable::SqueezePctCav => o.squeeze_pct_cav,
            Observable::SqueezePctOut => o.squeeze_pct_out,
            Observable::LambdaMinus => self.lambda_minus,
            Observable::BelowThreshold => unreachable!(),
        })
    }

    fn cell(&self, obs: Observable) -> String {
        if obs == Observable::BelowThreshold {
            return self.below_threshold.to_string();
        }
        self.value(obs).map(format_number).unwrap_or_default()
    }
}

pub fn evaluate_point(params: &SystemParams) -> PointEval {
    let dd = drift_diffusion(params);
    let observables = if dd.below_threshold {
        steady_observables(params).ok()
    } else {
        None
    };
    PointEval {
        params: *params,
        below_threshold: observables.is_some(),
        lambda_plus: dd.lambda_plus,
        lambda_minus: dd.lambda_minus,
        observables,
    }
}

impl PointEval {
    /// Flat JSON object: the parameters, the drift rates, the threshold flag
    /// and every observable (`null` above threshold).
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for p in Param::ALL {
            map.insert(p.name().into(), p.get(&self.params).into());
        }
        map.insert("lambda_plus".into(), self.lambda_plus.into());
        map.insert("lambda_minus".into(), self.lambda_minus.into());
        map.insert("below_threshold".into(), self.below_threshold.into());
        map.insert(
            "near_threshold".into(),
            self.observables.map(|o| o.near_threshold).into(),
        );
        for obs in Observable::ALL {
            if matches!(obs, Observable::LambdaMinus | Observable::BelowThreshold) {
                continue;
            }
            map.insert(obs.name().into(), self.value(obs).into());
        }
        serde_json::Value::Object(map)
    }
}

/// `%g`-style rendering with 12 significant digits.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(start: f64, stop: f64, step: f64) -> Self {
        Grid { start, stop, step }
    }

    /// `start + i * step` up to `stop`, tolerating rounding at the end point.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.start + i as f64 * self.step).collect()
    }

    fn validate(&self) -> Result<()> {
        let Grid { start, stop, step } = *self;
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
            return Err(Error::Invalid("grid values must be finite".into()));
        }
        if step <= 0.0 {
            return Err(Error::Invalid(format!("grid step must be > 0, got {step}")));
        }
        if start > stop {
            return Err(Error::Invalid(format!("grid start {start} exceeds stop {stop}")));
        }
        if (stop - start) / step >= MAX_POINTS as f64 {
            return Err(Error::Invalid(format!("grid exceeds {MAX_POINTS} points")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub fixed: BTreeMap<Param, f64>,
    pub axis: Param,
    pub grid: Grid,
    pub outputs: Vec<Observable>,
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Invalid(format!("bad sweep spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.fixed.contains_key(&self.axis) {
            return Err(Error::Invalid(format!(
                "axis `{}` must not also be fixed",
                self.axis
            )));
        }
        let missing: Vec<&str> = Param::ALL
            .into_iter()
            .filter(|p| *p != self.axis && !self.fixed.contains_key(p))
            .map(Param::name)
            .collect();
        if !missing.is_empty() {
            return Err(Error::Invalid(format!("no value for {}", missing.join(", "))));
        }
        if self.outputs.is_empty() {
            return Err(Error::Invalid("no outputs requested".into()));
        }
        self.grid.validate()?;
        for &p in &[self.grid.start, self.grid.stop] {
            self.params_at(p)?;
        }
        Ok(())
    }

    fn params_at(&self, x: f64) -> Result<SystemParams> {
        let mut p = SystemParams {
            gain: 0.0,
            kappa: 0.0,
            eta: 0.0,
            omega: 0.0,
            noise: 0.0,
        };
        for (&k, &v) in &self.fixed {
            k.set(&mut p, v);
        }
        self.axis.set(&mut p, x);
        p.validate()?;
        Ok(p)
    }

    /// Every grid point's parameters, or the first domain error.
    pub fn grid_params(&self) -> Result<Vec<SystemParams>> {
        self.validate()?;
        self.grid.points().into_iter().map(|x| self.params_at(x)).collect()
    }

    pub fn header(&self) -> String {
        let mut cols: Vec<&str> = Param::ALL.iter().map(|p| p.name()).collect();
        cols.extend(self.outputs.iter().map(|o| o.name()));
        cols.join(",")
    }
}

/// Evaluates the grid concurrently; rows come back in grid order.
pub fn evaluate_sweep(spec: &SweepSpec) -> Result<Vec<PointEval>> {
    let params = spec.grid_params()?;
    Ok(params.par_iter().map(evaluate_point).collect())
}

fn render_rows(spec: &SweepSpec, rows: &[PointEval], out: &mut String) {
    for row in rows {
        let mut cells: Vec<String> = Param::ALL
            .iter()
            .map(|p| format_number(p.get(&row.params)))
            .collect();
        cells.extend(spec.outputs.iter().map(|&o| row.cell(o)));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
}

pub fn run_sweep(spec: &SweepSpec) -> Result<String> {
    run_sweeps(std::slice::from_ref(spec))
}

/// Concatenates several sweeps that share one set of outputs under a single
/// header.
pub fn run_sweeps(specs: &[SweepSpec]) -> Result<String> {
    let first = specs
        .first()
        .ok_or_else(|| Error::Invalid("no sweeps given".into()))?;
    if specs.iter().any(|s| s.outputs != first.outputs) {
        return Err(Error::Invalid("sweeps must share their outputs".into()));
    }
    let mut out = first.header();
    out.push('\n');
    for spec in specs {
        let rows = evaluate_sweep(spec)?;
        render_rows(spec, &rows, &mut out);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FigurePreset {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
}

/// Noise intensities drawn as separate curves.
pub const CURVE_NOISE: [f64; 3] = [0.0, 0.1, 0.4];

impl FigurePreset {
    pub const ALL: [FigurePreset; 6] = [
        FigurePreset::Fig2,
        FigurePreset::Fig3,
        FigurePreset::Fig4,
        FigurePreset::Fig5,
        FigurePreset::Fig6,
        FigurePreset::Fig7,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigurePreset::Fig2 => "fig2",
            FigurePreset::Fig3 => "fig3",
            FigurePreset::Fig4 => "fig4",
            FigurePreset::Fig5 => "fig5",
            FigurePreset::Fig6 => "fig6",
            FigurePreset::Fig7 => "fig7",
        }
    }

    /// The sweeps behind the figure, one per curve family member.
    ///
    /// fig7 has no stated axis; it shares fig6's drive-amplitude axis and
    /// maximal initial coherence (`eta = 0`).
    pub fn specs(self) -> Vec<SweepSpec> {
        use Observable::*;
        use Param::*;
        let eta_axis = Grid::new(0.0, 1.0, 0.01);
        let omega_axis = Grid::new(0.0, 2.0, 0.01);
        let spec = |fixed: &[(Param, f64)], axis, grid, outputs: &[Observable]| SweepSpec {
            fixed: fixed.iter().copied().collect(),
            axis,
            grid,
            outputs: outputs.to_vec(),
        };
        let squeeze = [VarMinusOut, SqueezePctOut, BelowThreshold];
        let both = [VarMinusCav, VarMinusOut, SqueezePctCav, SqueezePctOut, BelowThreshold];
        match self {
            FigurePreset::Fig2 => CURVE_NOISE
                .iter()
                .map(|&n| spec(&[(Kappa, 0.2), (Omega, 0.0), (Gain, 10.0), (Noise, n)], Eta, eta_axis, &squeeze))
                .collect(),
            FigurePreset::Fig3 => CURVE_NOISE
                .iter()
                .map(|&n| spec(&[(Kappa, 0.2), (Eta, 0.0), (Gain, 10.0), (Noise, n)], Omega, omega_axis, &squeeze))
                .collect(),
            FigurePreset::Fig4 => vec![spec(
                &[(Kappa, 0.2), (Omega, 0.0), (Gain, 1000.0), (Noise, 0.4)],
                Eta,
                eta_axis,
                &both,
            )],
            FigurePreset::Fig5 => vec![spec(
                &[(Kappa, 0.2), (Eta, 0.0), (Gain, 1000.0), (Noise, 0.4)],
                Omega,
                omega_axis,
                &both,
            )],
            FigurePreset::Fig6 => CURVE_NOISE
                .iter()
                .map(|&n| spec(&[(Kappa, 0.2), (Gain, 1.0), (Eta, 0.0), (Noise, n)], Omega, omega_axis, &[NOut, BelowThreshold]))
                .collect(),
            FigurePreset::Fig7 => vec![spec(
                &[(Kappa, 0.2), (Noise, 0.4), (Gain, 1.0), (Eta, 0.0)],
                Omega,
                omega_axis,
                &[NCav, NOut, BelowThreshold],
            )],
        }
    }

    pub fn csv(self) -> Result<String> {
        run_sweeps(&self.specs())
    }
}

impl FromStr for FigurePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigurePreset::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown figure `{s}`, expected fig2..fig7")))
    }
}
