//! Experiment drivers: landscape snapshot, matched-energy sweeps, polar
//! contours, the internal consistency suite and convergence probes.
//!
//! Every driver is deterministic. Independent jobs run on the rayon pool and
//! are collected in input order, so the exported tables do not depend on
//! scheduling.

use std::f64::consts::{FRAC_1_PI, PI};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt17;
use crate::fock::{make_squeezed_fock, mean_photon, parity_expectation, state_fidelity, subtract_photons};
use crate::matching::{db_to_r, solve_family, with_escalation, Family, MatchSolution};
use crate::response::{
    advantage_sector, axis_radii, polar_contour, tolerance_sector, PolarContour, ScanSettings, SectorResult,
};
use crate::spec::{StateFamily, StateSpec};
use crate::wigner::{
    convergence_probe, integrated_negativity, wigner_field, ConvergenceReport, PhaseGrid, ProbeSetting,
};

pub const TOOL_NAME: &str = "cvbench";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const LANDSCAPE_R_DB: f64 = 6.0;
pub const LANDSCAPE_CAT_ALPHA: f64 = 1.6;
/// Squeeze magnitudes for the flatness check on `δ(S(r)|1⟩)`.
pub const FLATNESS_R: [f64; 5] = [0.0, 0.3, 0.69078, 1.0, 1.4391];
pub const FLATNESS_TOLERANCE: f64 = 6e-3;
pub const SUBTRACTION_FIDELITY_TOLERANCE: f64 = 1e-10;
pub const ISOTROPY_TOLERANCE: f64 = 1e-3;
pub const CAT_GAP_TARGETS: [f64; 3] = [2.0, 3.0, 4.0];
pub const CAT_AGREEMENT_TOLERANCE: f64 = 1e-2;
pub const PROBE_DELTA_TOLERANCE: f64 = 6e-3;
pub const PROBE_DELTA_PER_N_TOLERANCE: f64 = 2e-3;
pub const REFINED_CUTOFF: usize = 120;
pub const REFINED_GRID_POINTS: usize = 301;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Parse(format!("unknown output format {other:?}"))),
        }
    }
}

/// Full configuration of a run. Missing fields take the baseline values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cutoff: usize,
    pub grid_points: usize,
    pub window: f64,
    pub threshold: f64,
    pub eps_max: f64,
    pub eps_steps: usize,
    pub angles: usize,
    pub targets: Vec<f64>,
    pub families: Vec<Family>,
    pub polar_target: f64,
    pub reference: Family,
    pub eta: f64,
    pub export_fields: bool,
    pub out: PathBuf,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cutoff: crate::spec::DEFAULT_CUTOFF,
            grid_points: crate::wigner::DEFAULT_POINTS,
            window: crate::wigner::DEFAULT_HALF_WIDTH,
            threshold: crate::response::DEFAULT_THRESHOLD,
            eps_max: crate::response::DEFAULT_EPS_MAX,
            eps_steps: crate::response::DEFAULT_EPS_STEPS,
            angles: crate::response::DEFAULT_ANGLES,
            targets: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0],
            families: vec![
                Family::OnePhotonSubtracted,
                Family::TwoPhotonSubtracted,
                Family::EvenCat,
                Family::OddCat,
                Family::Fock,
            ],
            polar_target: 3.0,
            reference: Family::Fock,
            eta: 0.9,
            export_fields: true,
            out: PathBuf::from("cvbench-out"),
            format: OutputFormat::Csv,
        }
    }
}

impl RunConfig {
    /// Reads a JSON config. A `run.json` manifest is accepted too; its
    /// embedded `config` object is used.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let inner = match value.get("config") {
            Some(cfg) if value.get("tool").is_some() => cfg.clone(),
            _ => value,
        };
        let cfg: Self = serde_json::from_value(inner)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if self.cutoff < 2 {
            return Err(Error::invalid("cutoff must be at least 2"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid("threshold must lie in (0, 1)"));
        }
        if !(self.eps_max.is_finite() && self.eps_max > 0.0) || self.eps_steps < crate::response::MIN_SCAN_STEPS {
            return Err(Error::invalid("invalid epsilon scan settings"));
        }
        if self.angles < crate::response::MIN_ANGLES {
            return Err(Error::invalid("too few polar angles"));
        }
        if self.targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("targets must be finite"));
        }
        if self.families.is_empty() {
            return Err(Error::invalid("family list is empty"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid("eta must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<PhaseGrid> {
        PhaseGrid::square(self.window, self.grid_points)
    }

    pub fn scan(&self) -> ScanSettings {
        ScanSettings {
            eps_max: self.eps_max,
            steps: self.eps_steps,
        }
    }
}

/// Numerical settings carried by every output row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub cutoff: usize,
    pub grid_points: usize,
    pub window: f64,
    pub threshold: f64,
    pub eps_max: f64,
    pub eps_steps: usize,
    pub angles: usize,
}

impl Provenance {
    fn new(cfg: &RunConfig, cutoff: usize) -> Self {
        Self {
            cutoff,
            grid_points: cfg.grid_points,
            window: cfg.window,
            threshold: cfg.threshold,
            eps_max: cfg.eps_max,
            eps_steps: cfg.eps_steps,
            angles: cfg.angles,
        }
    }

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.cutoff.to_string(),
            self.grid_points.to_string(),
            fmt17(self.window),
            fmt17(self.threshold),
            fmt17(self.eps_max),
            self.eps_steps.to_string(),
            self.angles.to_string(),
        ]
    }
}

const PROVENANCE_HEADER: [&str; 7] = [
    "cutoff",
    "grid_points",
    "window",
    "threshold",
    "eps_max",
    "eps_steps",
    "angles",
];

fn opt_f(v: Option<f64>) -> String {
    v.map(fmt17).unwrap_or_default()
}

fn opt_b(v: Option<bool>) -> String {
    v.map(|b| b.to_string()).unwrap_or_default()
}

/// One matched-energy sweep point. Metrics that a sweep does not compute are
/// left empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub family: Family,
    pub target_n: f64,
    pub feasible: bool,
    pub reason: Option<String>,
    pub parameter: Option<f64>,
    pub r_db: Option<f64>,
    /// `⟨n⟩` of the constructed state.
    pub achieved_n: Option<f64>,
    pub delta: Option<f64>,
    pub delta_per_n: Option<f64>,
    pub window_limited: Option<bool>,
    pub r_x: Option<f64>,
    pub r_x_lower_bound: Option<bool>,
    pub r_p: Option<f64>,
    pub r_p_lower_bound: Option<bool>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    /// `R_max/R_min` over the polar contour; empty when any direction is a lower bound.
    pub anisotropy: Option<f64>,
    pub provenance: Provenance,
}

pub const RECORD_CSV_HEADER: [&str; 17] = [
    "family",
    "target_n",
    "feasible",
    "parameter",
    "r_db_or_alpha",
    "achieved_n",
    "delta",
    "delta_per_n",
    "window_limited",
    "r_x",
    "r_x_lower_bound",
    "r_p",
    "r_p_lower_bound",
    "r_min",
    "r_max",
    "anisotropy",
    "reason",
];

impl BenchmarkRecord {
    fn from_solution(sol: &MatchSolution, provenance: Provenance) -> Self {
        Self {
            family: sol.family,
            target_n: sol.target_n,
            feasible: sol.feasible,
            reason: sol.reason.clone(),
            parameter: sol.parameter,
            r_db: sol.r_db,
            achieved_n: None,
            delta: None,
            delta_per_n: None,
            window_limited: None,
            r_x: None,
            r_x_lower_bound: None,
            r_p: None,
            r_p_lower_bound: None,
            r_min: None,
            r_max: None,
            anisotropy: None,
            provenance,
        }
    }

    fn mark_failed(&mut self, err: &Error) {
        self.feasible = false;
        self.reason = Some(format!("construction failed: {err}"));
    }

    pub fn csv_header() -> Vec<&'static str> {
        RECORD_CSV_HEADER.iter().chain(&PROVENANCE_HEADER).copied().collect()
    }

    pub fn csv_record(&self) -> Vec<String> {
        let secondary = if self.family.is_squeezed() {
            self.r_db
        } else {
            self.parameter
        };
        let mut row = vec![
            self.family.tag().to_string(),
            fmt17(self.target_n),
            self.feasible.to_string(),
            opt_f(self.parameter),
            opt_f(secondary),
            opt_f(self.achieved_n),
            opt_f(self.delta),
            opt_f(self.delta_per_n),
            opt_b(self.window_limited),
            opt_f(self.r_x),
            opt_b(self.r_x_lower_bound),
            opt_f(self.r_p),
            opt_b(self.r_p_lower_bound),
            opt_f(self.r_min),
            opt_f(self.r_max),
            opt_f(self.anisotropy),
            self.reason.clone().unwrap_or_default(),
        ];
        row.extend(self.provenance.csv_fields());
        row
    }
}

fn sweep_jobs(cfg: &RunConfig) -> Vec<(f64, Family)> {
    cfg.targets
        .iter()
        .flat_map(|&t| cfg.families.iter().map(move |&f| (t, f)))
        .collect()
}

fn run_point<F>(cfg: &RunConfig, target: f64, family: Family, fill: F) -> Result<BenchmarkRecord>
where
    F: Fn(&crate::fock::FockVector, &mut BenchmarkRecord) -> Result<()>,
{
    let sol = solve_family(family, target)?;
    let mut rec = BenchmarkRecord::from_solution(&sol, Provenance::new(cfg, cfg.cutoff));
    let Some(spec) = sol.state_spec(cfg.cutoff) else {
        return Ok(rec);
    };
    let outcome = with_escalation(&spec, |state| {
        let mut filled = rec.clone();
        filled.achieved_n = Some(mean_photon(state));
        fill(state, &mut filled)?;
        Ok(filled)
    });
    match outcome {
        Ok((mut filled, cutoff)) => {
            filled.provenance.cutoff = cutoff;
            Ok(filled)
        }
        Err(e) => {
            rec.mark_failed(&e);
            Ok(rec)
        }
    }
}

/// `δ`, `δ/⟨n⟩` and the parameter cost at every (target, family) pair.
pub fn scalar_sweep(cfg: &RunConfig) -> Result<Vec<BenchmarkRecord>> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    sweep_jobs(cfg)
        .into_par_iter()
        .map(|(t, f)| {
            run_point(cfg, t, f, |state, rec| {
                let neg = integrated_negativity(&wigner_field(state, &grid)?);
                let n = mean_photon(state);
                rec.delta = Some(neg.delta);
                rec.delta_per_n = (n > 0.0).then(|| neg.delta / n);
                rec.window_limited = Some(neg.window_limited);
                Ok(())
            })
        })
        .collect()
}

/// Axis radii and contour anisotropy at every (target, family) pair.
pub fn radii_sweep(cfg: &RunConfig) -> Result<Vec<BenchmarkRecord>> {
    cfg.validate()?;
    let scan = cfg.scan();
    sweep_jobs(cfg)
        .into_par_iter()
        .map(|(t, f)| {
            run_point(cfg, t, f, |state, rec| {
                let (rx, rp) = axis_radii(state, cfg.threshold, &scan)?;
                let contour = polar_contour(state, cfg.angles, cfg.threshold, &scan)?;
                let (lo, hi) = contour.radius_range();
                rec.r_x = Some(rx.radius);
                rec.r_x_lower_bound = Some(rx.is_lower_bound);
                rec.r_p = Some(rp.radius);
                rec.r_p_lower_bound = Some(rp.is_lower_bound);
                rec.r_min = Some(lo);
                rec.r_max = Some(hi);
                rec.anisotropy = contour.anisotropy();
                Ok(())
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LandscapePanel {
    pub name: &'static str,
    pub spec: String,
    pub mean_photon: f64,
    pub parity: f64,
    pub w_origin: f64,
    pub delta: f64,
    pub delta_per_n: Option<f64>,
    pub normalization: f64,
    pub window_limited: bool,
    pub provenance: Provenance,
}

pub const LANDSCAPE_CSV_HEADER: [&str; 9] = [
    "panel",
    "spec",
    "mean_photon",
    "parity",
    "w_origin",
    "delta",
    "delta_per_n",
    "normalization",
    "window_limited",
];

impl LandscapePanel {
    pub fn csv_record(&self) -> Vec<String> {
        let mut row = vec![
            self.name.to_string(),
            self.spec.clone(),
            fmt17(self.mean_photon),
            fmt17(self.parity),
            fmt17(self.w_origin),
            fmt17(self.delta),
            opt_f(self.delta_per_n),
            fmt17(self.normalization),
            self.window_limited.to_string(),
        ];
        row.extend(self.provenance.csv_fields());
        row
    }
}

/// The six snapshot states: `S|0⟩`, `aS|0⟩`, `a²S|0⟩` at `r_db`, `|1⟩`, `|2⟩`
/// and the odd cat at `cat_alpha`.
pub fn landscape_specs(r_db: f64, theta: f64, cat_alpha: f64, cutoff: usize) -> Result<Vec<(&'static str, StateSpec)>> {
    let panels = [
        ("squeezed_vacuum", StateFamily::SqueezedFock { r_db, theta, n: 0 }),
        (
            "one_photon_subtracted",
            StateFamily::SubtractedSqueezed { r_db, theta, k: 1 },
        ),
        (
            "two_photon_subtracted",
            StateFamily::SubtractedSqueezed { r_db, theta, k: 2 },
        ),
        ("fock_1", StateFamily::Fock { n: 1 }),
        ("fock_2", StateFamily::Fock { n: 2 }),
        (
            "odd_cat",
            StateFamily::OddCat {
                alpha: cat_alpha.into(),
            },
        ),
    ];
    panels
        .into_iter()
        .map(|(name, family)| Ok((name, StateSpec::new(family, cutoff)?)))
        .collect()
}

/// Per-panel scalars; the Wigner fields are returned alongside for export.
pub fn landscape_snapshot(
    cfg: &RunConfig,
    r_db: f64,
    theta: f64,
    cat_alpha: f64,
) -> Result<Vec<(LandscapePanel, crate::wigner::WignerField)>> {
    let grid = cfg.grid()?;
    landscape_specs(r_db, theta, cat_alpha, cfg.cutoff)?
        .into_par_iter()
        .map(|(name, spec)| {
            let ((state, field), cutoff) =
                with_escalation(&spec, |state| Ok((state.clone(), wigner_field(state, &grid)?)))?;
            let neg = integrated_negativity(&field);
            let n = mean_photon(&state);
            let panel = LandscapePanel {
                name,
                spec: spec.with_cutoff(cutoff).to_string(),
                mean_photon: n,
                parity: parity_expectation(&state),
                w_origin: field.value_at_origin(),
                delta: neg.delta,
                delta_per_n: (n > 0.0).then(|| neg.delta / n),
                normalization: neg.normalization,
                window_limited: neg.window_limited,
                provenance: Provenance::new(cfg, cutoff),
            };
            Ok((panel, field))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarEntry {
    pub family: Family,
    pub solution: MatchSolution,
    pub cutoff: usize,
    pub contour: Option<PolarContour>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorRow {
    pub family: Family,
    pub reference: Family,
    pub sector: SectorResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarReport {
    pub target_n: f64,
    pub entries: Vec<PolarEntry>,
    pub sectors: Vec<SectorRow>,
    /// `max_φ |R_even − R_odd| / R_odd` when both cats are present.
    pub cat_max_relative_gap: Option<f64>,
    pub provenance: Provenance,
}

pub fn cat_relative_gap(even: &PolarContour, odd: &PolarContour) -> Result<f64> {
    if even.angles != odd.angles {
        return Err(Error::AngleMismatch);
    }
    Ok(even
        .radii
        .iter()
        .zip(&odd.radii)
        .map(|(e, o)| (e.radius - o.radius).abs() / o.radius)
        .fold(0.0, f64::max))
}

fn matched_contour(cfg: &RunConfig, family: Family, target: f64) -> Result<PolarEntry> {
    let solution = solve_family(family, target)?;
    let (cutoff, contour) = match solution.state_spec(cfg.cutoff) {
        Some(spec) => {
            let (contour, cutoff) = with_escalation(&spec, |state| {
                polar_contour(state, cfg.angles, cfg.threshold, &cfg.scan())
            })?;
            (cutoff, Some(contour))
        }
        None => (cfg.cutoff, None),
    };
    Ok(PolarEntry {
        family,
        solution,
        cutoff,
        contour,
    })
}

/// Contours of every configured family at `cfg.polar_target`, with `Ω_adv`
/// and `Ω_η` against `cfg.reference`.
pub fn polar_report(cfg: &RunConfig) -> Result<PolarReport> {
    cfg.validate()?;
    let target = cfg.polar_target;
    let mut families = cfg.families.clone();
    if !families.contains(&cfg.reference) {
        families.push(cfg.reference);
    }
    let entries: Vec<PolarEntry> = families
        .par_iter()
        .map(|&f| matched_contour(cfg, f, target))
        .collect::<Result<_>>()?;
    let contour_of = |f: Family| entries.iter().find(|e| e.family == f).and_then(|e| e.contour.as_ref());
    let reference = contour_of(cfg.reference).ok_or_else(|| {
        Error::Infeasible(format!(
            "reference family {} has no state at target {target}",
            cfg.reference
        ))
    })?;
    let mut sectors = Vec::new();
    for e in entries.iter().filter(|e| e.family != cfg.reference) {
        if let Some(c) = &e.contour {
            for sector in [
                advantage_sector(c, reference)?,
                tolerance_sector(c, reference, cfg.eta)?,
            ] {
                sectors.push(SectorRow {
                    family: e.family,
                    reference: cfg.reference,
                    sector,
                });
            }
        }
    }
    let cat_max_relative_gap = match (contour_of(Family::EvenCat), contour_of(Family::OddCat)) {
        (Some(e), Some(o)) => Some(cat_relative_gap(e, o)?),
        _ => None,
    };
    Ok(PolarReport {
        target_n: target,
        entries,
        sectors,
        cat_max_relative_gap,
        provenance: Provenance::new(cfg, cfg.cutoff),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    /// Positive when the check passes with room to spare.
    pub margin: f64,
    pub detail: String,
}

impl CheckResult {
    fn upper(name: &str, measured: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: measured <= tolerance,
            measured,
            tolerance,
            margin: tolerance - measured,
            detail,
        }
    }

    fn failed(name: &str, err: &Error) -> Self {
        Self {
            name: name.into(),
            passed: false,
            measured: f64::NAN,
            tolerance: f64::NAN,
            margin: f64::NAN,
            detail: format!("error: {err}"),
        }
    }

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.name.clone(),
            self.passed.to_string(),
            fmt17(self.measured),
            fmt17(self.tolerance),
            fmt17(self.margin),
            self.detail.clone(),
        ]
    }
}

pub const CHECK_CSV_HEADER: [&str; 6] = ["check", "passed", "measured", "tolerance", "margin", "detail"];

/// `1 − F(normalized aS(r)|0⟩, S(r)|1⟩)` at 6 dB.
pub fn check_subtraction_identity() -> Result<CheckResult> {
    let r = db_to_r(LANDSCAPE_R_DB);
    let cutoff = crate::spec::DEFAULT_CUTOFF;
    let sub = subtract_photons(&make_squeezed_fock(r, 0.0, 0, cutoff)?, 1)?;
    let s1 = make_squeezed_fock(r, 0.0, 1, cutoff)?;
    let infidelity = 1.0 - state_fidelity(&sub, &s1)?;
    Ok(CheckResult::upper(
        "subtraction_identity",
        infidelity.max(0.0),
        SUBTRACTION_FIDELITY_TOLERANCE,
        format!("r={r}, measured value is 1 - fidelity"),
    ))
}

/// `δ(S(r)|1⟩)` at each of [`FLATNESS_R`]. Returns `(r, effective cutoff, δ)`.
pub fn single_photon_negativity_curve(cfg: &RunConfig) -> Result<Vec<(f64, usize, f64)>> {
    let grid = cfg.grid()?;
    FLATNESS_R
        .par_iter()
        .map(|&r| {
            let spec = StateSpec::new(
                StateFamily::SqueezedFock {
                    r_db: crate::matching::r_to_db(r),
                    theta: 0.0,
                    n: 1,
                },
                cfg.cutoff,
            )?;
            let (delta, cutoff) = with_escalation(&spec, |state| {
                Ok(integrated_negativity(&wigner_field(state, &grid)?).delta)
            })?;
            Ok((r, cutoff, delta))
        })
        .collect()
}

pub fn check_negativity_flatness(cfg: &RunConfig) -> Result<CheckResult> {
    let curve = single_photon_negativity_curve(cfg)?;
    let (lo, hi) = curve
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, _, d)| {
            (lo.min(d), hi.max(d))
        });
    let detail = curve
        .iter()
        .map(|(r, c, d)| format!("r={r}:delta={d:.6}@cutoff{c}"))
        .collect::<Vec<_>>()
        .join(" ");
    Ok(CheckResult::upper(
        "negativity_flatness",
        hi - lo,
        FLATNESS_TOLERANCE,
        detail,
    ))
}

pub fn check_fock_isotropy(cfg: &RunConfig) -> Result<CheckResult> {
    let worst = [1usize, 2, 3]
        .par_iter()
        .map(|&n| {
            let state = crate::fock::make_fock(n, cfg.cutoff)?;
            let c = polar_contour(&state, cfg.angles, cfg.threshold, &cfg.scan())?;
            c.anisotropy()
                .map(|a| a - 1.0)
                .ok_or_else(|| Error::invalid(format!("Fock |{n}> contour hit the scan limit")))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(CheckResult::upper(
        "fock_isotropy",
        worst,
        ISOTROPY_TOLERANCE,
        "max over n in {1,2,3} of R_max/R_min - 1".into(),
    ))
}

/// Relative even/odd contour gap at each of [`CAT_GAP_TARGETS`].
pub fn cat_gap_curve(cfg: &RunConfig) -> Result<Vec<(f64, f64)>> {
    CAT_GAP_TARGETS
        .par_iter()
        .map(|&t| {
            let even = matched_contour(cfg, Family::EvenCat, t)?;
            let odd = matched_contour(cfg, Family::OddCat, t)?;
            match (&even.contour, &odd.contour) {
                (Some(e), Some(o)) => Ok((t, cat_relative_gap(e, o)?)),
                _ => Err(Error::Infeasible(format!("cat pair not available at target {t}"))),
            }
        })
        .collect()
}

/// Gap at the largest target must be within tolerance, and the gap must
/// shrink strictly along the targets. The measured value is the final gap;
/// monotonicity failures fail the check regardless.
pub fn check_cat_convergence(cfg: &RunConfig) -> Result<CheckResult> {
    let curve = cat_gap_curve(cfg)?;
    let monotone = curve.windows(2).all(|w| w[1].1 < w[0].1);
    let last = curve.last().map(|&(_, g)| g).unwrap_or(f64::NAN);
    let mut res = CheckResult::upper(
        "cat_convergence",
        last,
        CAT_AGREEMENT_TOLERANCE,
        curve
            .iter()
            .map(|(t, g)| format!("n={t}:gap={g:.6}"))
            .collect::<Vec<_>>()
            .join(" "),
    );
    if !monotone {
        res.passed = false;
        res.detail.push_str(" (gap not monotonically shrinking)");
    }
    Ok(res)
}

/// A scan that cannot reach the threshold must flag every radius as a lower
/// bound and leave the anisotropy undefined; the baseline scan must produce
/// no lower bounds for the vacuum.
pub fn check_lower_bound_bookkeeping(cfg: &RunConfig) -> Result<CheckResult> {
    let vac = crate::fock::make_fock(0, cfg.cutoff)?;
    let radius = (-cfg.threshold.ln()).sqrt();
    let short = ScanSettings {
        eps_max: 0.5 * radius,
        steps: cfg.eps_steps,
    };
    let clipped = polar_contour(&vac, crate::response::MIN_ANGLES, cfg.threshold, &short)?;
    let full = polar_contour(&vac, crate::response::MIN_ANGLES, cfg.threshold, &cfg.scan())?;
    let flagged = clipped.radii.iter().all(|r| r.is_lower_bound) && clipped.anisotropy().is_none();
    let clean = full.radii.iter().all(|r| !r.is_lower_bound) && full.anisotropy().is_some();
    let misflagged = clipped.radii.iter().filter(|r| !r.is_lower_bound).count()
        + full.radii.iter().filter(|r| r.is_lower_bound).count();
    let mut res = CheckResult::upper(
        "lower_bound_bookkeeping",
        misflagged as f64,
        0.0,
        format!("clipped scan flagged={flagged}, baseline scan clean={clean}"),
    );
    res.passed &= flagged && clean;
    Ok(res)
}

/// The four internal consistency checks plus lower-bound bookkeeping. A
/// check that errors is reported as failed with the error text.
pub fn consistency_suite(cfg: &RunConfig) -> Result<Vec<CheckResult>> {
    cfg.validate()?;
    type CheckFn = fn(&RunConfig) -> Result<CheckResult>;
    let checks: [(&str, CheckFn); 5] = [
        ("subtraction_identity", |_| check_subtraction_identity()),
        ("negativity_flatness", check_negativity_flatness),
        ("fock_isotropy", check_fock_isotropy),
        ("cat_convergence", check_cat_convergence),
        ("lower_bound_bookkeeping", check_lower_bound_bookkeeping),
    ];
    Ok(checks
        .iter()
        .map(|(name, f)| f(cfg).unwrap_or_else(|e| CheckResult::failed(name, &e)))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeRow {
    pub panel: &'static str,
    pub kind: &'static str,
    pub report: ConvergenceReport,
}

impl ProbeRow {
    pub fn passed(&self) -> bool {
        self.report.delta_change < PROBE_DELTA_TOLERANCE && self.report.delta_per_n_change < PROBE_DELTA_PER_N_TOLERANCE
    }

    pub fn csv_record(&self) -> Vec<String> {
        let (b, r) = (&self.report.base, &self.report.refined);
        vec![
            self.panel.to_string(),
            self.kind.to_string(),
            b.cutoff.to_string(),
            b.grid_points.to_string(),
            fmt17(b.half_width),
            r.cutoff.to_string(),
            r.grid_points.to_string(),
            fmt17(r.half_width),
            fmt17(b.delta),
            fmt17(r.delta),
            fmt17(self.report.delta_change),
            fmt17(self.report.delta_per_n_change),
            self.passed().to_string(),
        ]
    }
}

pub const PROBE_CSV_HEADER: [&str; 13] = [
    "panel",
    "probe",
    "base_cutoff",
    "base_grid_points",
    "base_window",
    "refined_cutoff",
    "refined_grid_points",
    "refined_window",
    "base_delta",
    "refined_delta",
    "delta_change",
    "delta_per_n_change",
    "passed",
];

/// Probe settings relative to `cfg`: `resolution` raises the cutoff to 120
/// and the grid to 301 points on the same window; `window` enlarges the
/// window by half at unchanged spacing.
pub fn probe_settings(cfg: &RunConfig) -> Result<Vec<(&'static str, ProbeSetting, ProbeSetting)>> {
    let base = ProbeSetting {
        cutoff: cfg.cutoff,
        grid: cfg.grid()?,
    };
    let resolution = ProbeSetting {
        cutoff: cfg.cutoff.max(REFINED_CUTOFF),
        grid: PhaseGrid::square(cfg.window, cfg.grid_points.max(REFINED_GRID_POINTS))?,
    };
    let half_steps = (cfg.grid_points - 1) / 2;
    let wide_half_steps = half_steps + half_steps / 2;
    let spacing = cfg.window / half_steps as f64;
    let window = ProbeSetting {
        cutoff: cfg.cutoff,
        grid: PhaseGrid::square(spacing * wide_half_steps as f64, 2 * wide_half_steps + 1)?,
    };
    Ok(vec![("resolution", base, resolution), ("window", base, window)])
}

/// Runs every probe on every landscape panel.
pub fn convergence_probes(cfg: &RunConfig) -> Result<Vec<ProbeRow>> {
    let specs = landscape_specs(LANDSCAPE_R_DB, 0.0, LANDSCAPE_CAT_ALPHA, cfg.cutoff)?;
    let settings = probe_settings(cfg)?;
    let jobs: Vec<_> = specs
        .iter()
        .flat_map(|(name, spec)| settings.iter().map(move |s| (*name, spec, s)))
        .collect();
    jobs.into_par_iter()
        .map(|(panel, spec, (kind, base, refined))| {
            Ok(ProbeRow {
                panel,
                kind,
                report: convergence_probe(spec, base, refined)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, outputs: Vec<String>) -> Self {
        Self {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            command: command.into(),
            config: config.clone(),
            outputs,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("run.json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}

/// Writes one experiment table as `<stem>.csv` or `<stem>.json`.
pub fn write_table<T: Serialize>(
    dir: &Path,
    stem: &str,
    format: OutputFormat,
    header: &[&str],
    rows: &[Vec<String>],
    records: &T,
) -> Result<String> {
    fs::create_dir_all(dir)?;
    let name = match format {
        OutputFormat::Csv => {
            let name = format!("{stem}.csv");
            let mut wtr = csv::Writer::from_path(dir.join(&name))?;
            wtr.write_record(header)?;
            for row in rows {
                wtr.write_record(row)?;
            }
            wtr.flush()?;
            name
        }
        OutputFormat::Json => {
            let name = format!("{stem}.json");
            let mut text = serde_json::to_string_pretty(records)?;
            text.push('\n');
            fs::write(dir.join(&name), text)?;
            name
        }
    };
    Ok(name)
}

pub fn write_records(dir: &Path, stem: &str, format: OutputFormat, records: &[BenchmarkRecord]) -> Result<String> {
    let rows: Vec<_> = records.iter().map(BenchmarkRecord::csv_record).collect();
    write_table(dir, stem, format, &BenchmarkRecord::csv_header(), &rows, &records)
}

pub fn write_landscape(
    dir: &Path,
    format: OutputFormat,
    panels: &[(LandscapePanel, crate::wigner::WignerField)],
    export_fields: bool,
) -> Result<Vec<String>> {
    let header: Vec<&str> = LANDSCAPE_CSV_HEADER.iter().chain(&PROVENANCE_HEADER).copied().collect();
    let rows: Vec<_> = panels.iter().map(|(p, _)| p.csv_record()).collect();
    let summary: Vec<&LandscapePanel> = panels.iter().map(|(p, _)| p).collect();
    let mut names = vec![write_table(dir, "landscape", format, &header, &rows, &summary)?];
    if export_fields {
        for (panel, field) in panels {
            let name = match format {
                OutputFormat::Csv => {
                    let name = format!("wigner_{}.csv", panel.name);
                    field.write_csv(fs::File::create(dir.join(&name))?)?;
                    name
                }
                OutputFormat::Json => {
                    let name = format!("wigner_{}.json", panel.name);
                    fs::write(dir.join(&name), serde_json::to_string(&field.json_envelope())? + "\n")?;
                    name
                }
            };
            names.push(name);
        }
    }
    Ok(names)
}

pub fn write_polar(dir: &Path, format: OutputFormat, report: &PolarReport) -> Result<Vec<String>> {
    let mut header = vec![
        "family",
        "target_n",
        "feasible",
        "phi",
        "radius",
        "is_lower_bound",
        "reason",
    ];
    header.extend(PROVENANCE_HEADER);
    let mut rows = Vec::new();
    for e in &report.entries {
        let mut prov = report.provenance;
        prov.cutoff = e.cutoff;
        match &e.contour {
            Some(c) => {
                for (phi, r) in c.angles.iter().zip(&c.radii) {
                    let mut row = vec![
                        e.family.tag().to_string(),
                        fmt17(report.target_n),
                        "true".into(),
                        fmt17(*phi),
                        fmt17(r.radius),
                        r.is_lower_bound.to_string(),
                        String::new(),
                    ];
                    row.extend(prov.csv_fields());
                    rows.push(row);
                }
            }
            None => {
                let mut row = vec![
                    e.family.tag().to_string(),
                    fmt17(report.target_n),
                    "false".into(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.solution.reason.clone().unwrap_or_default(),
                ];
                row.extend(prov.csv_fields());
                rows.push(row);
            }
        }
    }
    let mut names = vec![write_table(dir, "polar", format, &header, &rows, report)?];
    if format == OutputFormat::Csv {
        let header = ["family", "reference", "sector", "eta", "measure", "uncertainty"];
        let rows: Vec<_> = report
            .sectors
            .iter()
            .map(|s| {
                let (kind, eta) = match s.sector.predicate {
                    crate::response::SectorPredicate::Advantage => ("advantage", String::new()),
                    crate::response::SectorPredicate::Tolerance { eta } => ("tolerance", fmt17(eta)),
                };
                vec![
                    s.family.tag().to_string(),
                    s.reference.tag().to_string(),
                    kind.to_string(),
                    eta,
                    fmt17(s.sector.measure),
                    fmt17(s.sector.uncertainty),
                ]
            })
            .collect();
        names.push(write_table(
            dir,
            "polar_sectors",
            format,
            &header,
            &rows,
            &report.sectors,
        )?);
    }
    Ok(names)
}

pub fn write_checks(dir: &Path, format: OutputFormat, checks: &[CheckResult]) -> Result<String> {
    let rows: Vec<_> = checks.iter().map(CheckResult::csv_record).collect();
    write_table(dir, "consistency", format, &CHECK_CSV_HEADER, &rows, &checks)
}

pub fn write_probes(dir: &Path, format: OutputFormat, probes: &[ProbeRow]) -> Result<String> {
    let rows: Vec<_> = probes.iter().map(ProbeRow::csv_record).collect();
    write_table(dir, "convergence", format, &PROBE_CSV_HEADER, &rows, &probes)
}

/// Expected central value for a state of definite parity.
pub fn parity_origin_value(parity: f64) -> f64 {
    parity * FRAC_1_PI
}

/// Angle of the anti-squeezed quadrature for squeeze phase `theta`.
pub fn antisqueezed_axis(theta: f64) -> f64 {
    (theta + PI) / 2.0
}
