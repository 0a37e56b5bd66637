//! Matched-mean-photon-number solver.
//!
//! For each benchmark family the free parameter (squeeze magnitude `r` or cat
//! amplitude `alpha`) is chosen so that `⟨a†a⟩` hits a common target. The
//! squeezed families are capped at 12.5 dB. Closed-form inversions are used
//! where they exist; the two-photon-subtracted family and both cat parities
//! are solved by bisection on a monotone energy curve.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{mean_photon, FockVector};
use crate::spec::{StateFamily, StateSpec, DEFAULT_CUTOFF};

pub const MAX_SQUEEZE_DB: f64 = 12.5;
/// Cat amplitudes are searched in `[ALPHA_MIN, ALPHA_MAX]`.
pub const ALPHA_MIN: f64 = 1e-6;
pub const ALPHA_MAX: f64 = 6.0;
pub const BISECTION_MAX_ITER: usize = 200;
pub const BISECTION_PARAM_TOL: f64 = 1e-12;
/// Highest cutoff tried when a state does not fit in the requested basis.
pub const MAX_CUTOFF: usize = 320;
pub const CUTOFF_STEP: usize = 40;

pub fn db_to_r(r_db: f64) -> f64 {
    std::f64::consts::LN_10 / 20.0 * r_db
}

pub fn r_to_db(r: f64) -> f64 {
    r * 20.0 / std::f64::consts::LN_10
}

/// Squeeze magnitude of the 12.5 dB cap.
pub fn max_squeeze_r() -> f64 {
    db_to_r(MAX_SQUEEZE_DB)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    SqueezedVacuum,
    OnePhotonSubtracted,
    TwoPhotonSubtracted,
    EvenCat,
    OddCat,
    Fock,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::SqueezedVacuum,
        Family::OnePhotonSubtracted,
        Family::TwoPhotonSubtracted,
        Family::EvenCat,
        Family::OddCat,
        Family::Fock,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Family::SqueezedVacuum => "squeezed_vacuum",
            Family::OnePhotonSubtracted => "one_photon_subtracted",
            Family::TwoPhotonSubtracted => "two_photon_subtracted",
            Family::EvenCat => "even_cat",
            Family::OddCat => "odd_cat",
            Family::Fock => "fock",
        }
    }

    pub fn is_squeezed(&self) -> bool {
        matches!(
            self,
            Family::SqueezedVacuum | Family::OnePhotonSubtracted | Family::TwoPhotonSubtracted
        )
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.tag() == s.trim())
            .ok_or_else(|| Error::Parse(format!("unknown family {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchSolution {
    pub family: Family,
    pub target_n: f64,
    /// `r` for squeezed families, `alpha` for cats, `n` for the Fock reference.
    pub parameter: Option<f64>,
    pub r_db: Option<f64>,
    pub achieved_n: Option<f64>,
    pub feasible: bool,
    pub reason: Option<String>,
}

impl MatchSolution {
    fn feasible(family: Family, target_n: f64, parameter: f64, achieved_n: f64) -> Self {
        Self {
            family,
            target_n,
            parameter: Some(parameter),
            r_db: family.is_squeezed().then(|| r_to_db(parameter)),
            achieved_n: Some(achieved_n),
            feasible: true,
            reason: None,
        }
    }

    fn infeasible(family: Family, target_n: f64, reason: impl Into<String>) -> Self {
        Self {
            family,
            target_n,
            parameter: None,
            r_db: None,
            achieved_n: None,
            feasible: false,
            reason: Some(reason.into()),
        }
    }

    /// Recipe for the matched state (real squeezing or real cat amplitude).
    pub fn state_spec(&self, cutoff: usize) -> Option<StateSpec> {
        let p = self.parameter.filter(|_| self.feasible)?;
        let family = match self.family {
            Family::SqueezedVacuum => StateFamily::SqueezedFock {
                r_db: r_to_db(p),
                theta: 0.0,
                n: 0,
            },
            // r = 0 limits of the subtracted states
            Family::OnePhotonSubtracted if p == 0.0 => StateFamily::Fock { n: 1 },
            Family::TwoPhotonSubtracted if p == 0.0 => StateFamily::Fock { n: 0 },
            Family::OnePhotonSubtracted => StateFamily::SubtractedSqueezed {
                r_db: r_to_db(p),
                theta: 0.0,
                k: 1,
            },
            Family::TwoPhotonSubtracted => StateFamily::SubtractedSqueezed {
                r_db: r_to_db(p),
                theta: 0.0,
                k: 2,
            },
            Family::EvenCat => StateFamily::EvenCat { alpha: p.into() },
            Family::OddCat => StateFamily::OddCat { alpha: p.into() },
            Family::Fock => StateFamily::Fock { n: p as usize },
        };
        Some(StateSpec { family, cutoff })
    }

    /// Column order: `family,target_n,parameter,r_db_or_alpha,achieved_n,feasible,reason`.
    pub fn csv_record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(crate::fmt17).unwrap_or_default();
        let secondary = if self.family.is_squeezed() {
            self.r_db
        } else {
            self.parameter
        };
        vec![
            self.family.tag().to_string(),
            crate::fmt17(self.target_n),
            opt(self.parameter),
            opt(secondary),
            opt(self.achieved_n),
            self.feasible.to_string(),
            self.reason.clone().unwrap_or_default(),
        ]
    }
}

pub const MATCH_CSV_HEADER: [&str; 7] = [
    "family",
    "target_n",
    "parameter",
    "r_db_or_alpha",
    "achieved_n",
    "feasible",
    "reason",
];

/// Builds `spec` and runs `job` on the state, raising the cutoff in steps of
/// [`CUTOFF_STEP`] up to [`MAX_CUTOFF`] while either stage trips the
/// truncation guard. Returns the job output and the cutoff that was used.
pub fn with_escalation<T, F>(spec: &StateSpec, mut job: F) -> Result<(T, usize)>
where
    F: FnMut(&FockVector) -> Result<T>,
{
    let mut cutoff = spec.cutoff;
    loop {
        match spec.with_cutoff(cutoff).build().and_then(|state| job(&state)) {
            Ok(out) => return Ok((out, cutoff)),
            Err(Error::TailGuard { .. }) if cutoff + CUTOFF_STEP <= MAX_CUTOFF => {
                cutoff += CUTOFF_STEP;
            }
            Err(e) => return Err(e),
        }
    }
}

/// [`with_escalation`] with construction as the only stage.
pub fn build_with_escalation(spec: &StateSpec) -> Result<(FockVector, usize)> {
    with_escalation(spec, |state| Ok(state.clone()))
}

/// `⟨n⟩` of the normalized `a²S(r)|0⟩`, evaluated through state construction.
pub fn two_photon_subtracted_energy(r: f64) -> Result<f64> {
    if r == 0.0 {
        // limit r -> 0: the normalized state tends to the vacuum
        return Ok(0.0);
    }
    let spec = StateSpec {
        family: StateFamily::SubtractedSqueezed {
            r_db: r_to_db(r),
            theta: 0.0,
            k: 2,
        },
        cutoff: DEFAULT_CUTOFF,
    };
    let (state, _) = build_with_escalation(&spec)?;
    Ok(mean_photon(&state))
}

fn bisect<F>(mut lo: f64, mut hi: f64, target: f64, mut f: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    for _ in 0..BISECTION_MAX_ITER {
        if hi - lo <= BISECTION_PARAM_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_target(target_n: f64) -> Result<()> {
    if target_n.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("target mean photon number must be finite"))
    }
}

pub fn solve_squeezed_family(family: Family, target_n: f64) -> Result<MatchSolution> {
    check_target(target_n)?;
    let r_cap = max_squeeze_r();
    let cap_msg = |r: f64| {
        format!(
            "required squeezing {:.4} dB exceeds the {MAX_SQUEEZE_DB} dB cap",
            r_to_db(r)
        )
    };
    match family {
        Family::SqueezedVacuum => {
            if target_n < 0.0 {
                return Ok(MatchSolution::infeasible(
                    family,
                    target_n,
                    "target below family minimum 0",
                ));
            }
            let r = target_n.sqrt().asinh();
            if r > r_cap {
                return Ok(MatchSolution::infeasible(family, target_n, cap_msg(r)));
            }
            Ok(MatchSolution::feasible(family, target_n, r, r.sinh().powi(2)))
        }
        Family::OnePhotonSubtracted => {
            if target_n < 1.0 {
                return Ok(MatchSolution::infeasible(
                    family,
                    target_n,
                    "target below family minimum 1",
                ));
            }
            let r = ((target_n - 1.0) / 3.0).sqrt().asinh();
            if r > r_cap {
                return Ok(MatchSolution::infeasible(family, target_n, cap_msg(r)));
            }
            Ok(MatchSolution::feasible(
                family,
                target_n,
                r,
                1.0 + 3.0 * r.sinh().powi(2),
            ))
        }
        Family::TwoPhotonSubtracted => {
            if target_n <= 0.0 {
                return Ok(MatchSolution::infeasible(
                    family,
                    target_n,
                    "target at or below family minimum 0",
                ));
            }
            let n_cap = two_photon_subtracted_energy(r_cap)?;
            if target_n > n_cap {
                return Ok(MatchSolution::infeasible(
                    family,
                    target_n,
                    format!("target above {n_cap:.6} reachable at the {MAX_SQUEEZE_DB} dB cap"),
                ));
            }
            let r = bisect(0.0, r_cap, target_n, two_photon_subtracted_energy)?;
            let achieved = two_photon_subtracted_energy(r)?;
            Ok(MatchSolution::feasible(family, target_n, r, achieved))
        }
        other => Err(Error::invalid(format!("{other} is not a squeezed family"))),
    }
}

/// Closed-form cat energy: `u tanh u` (even) or `u coth u` (odd), `u = α²`.
pub fn cat_mean_photon(alpha: f64, odd: bool) -> f64 {
    let u = alpha * alpha;
    if odd {
        if u < 1e-8 {
            // u coth u = 1 + u²/3 + O(u⁴)
            1.0 + u * u / 3.0
        } else {
            u / u.tanh()
        }
    } else {
        u * u.tanh()
    }
}

pub fn solve_cat_alpha(odd: bool, target_n: f64) -> Result<MatchSolution> {
    check_target(target_n)?;
    let family = if odd { Family::OddCat } else { Family::EvenCat };
    let (minimum, label) = if odd { (1.0, "1") } else { (0.0, "0") };
    if target_n <= minimum {
        return Ok(MatchSolution::infeasible(
            family,
            target_n,
            format!("target at or below family minimum {label}"),
        ));
    }
    if target_n > cat_mean_photon(ALPHA_MAX, odd) {
        return Ok(MatchSolution::infeasible(
            family,
            target_n,
            format!("target requires alpha above {ALPHA_MAX}"),
        ));
    }
    let alpha = bisect(ALPHA_MIN, ALPHA_MAX, target_n, |a| Ok(cat_mean_photon(a, odd)))?;
    Ok(MatchSolution::feasible(
        family,
        target_n,
        alpha,
        cat_mean_photon(alpha, odd),
    ))
}

fn solve_fock(target_n: f64) -> Result<MatchSolution> {
    check_target(target_n)?;
    let n = target_n.round();
    if target_n < 0.0 || (target_n - n).abs() > 1e-12 {
        return Ok(MatchSolution::infeasible(
            Family::Fock,
            target_n,
            "Fock reference exists only at integer mean photon number",
        ));
    }
    Ok(MatchSolution::feasible(Family::Fock, target_n, n, n))
}

pub fn solve_family(family: Family, target_n: f64) -> Result<MatchSolution> {
    match family {
        Family::EvenCat => solve_cat_alpha(false, target_n),
        Family::OddCat => solve_cat_alpha(true, target_n),
        Family::Fock => solve_fock(target_n),
        squeezed => solve_squeezed_family(squeezed, target_n),
    }
}

/// One solution per family, infeasible entries included.
pub fn matched_set(target_n: f64, families: &[Family]) -> Result<Vec<MatchSolution>> {
    if families.is_empty() {
        return Err(Error::invalid("family list is empty"));
    }
    families.par_iter().map(|&f| solve_family(f, target_n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn decibel_conversion() {
        assert_abs_diff_eq!(db_to_r(6.0), 0.690_776, epsilon = 1e-6);
        assert_eq!(db_to_r(0.0), 0.0);
        assert_abs_diff_eq!(max_squeeze_r(), 1.439_116, epsilon = 1e-6);
        for db in [0.1, 3.0, 6.0, 12.5] {
            assert_abs_diff_eq!(r_to_db(db_to_r(db)), db, epsilon = 1e-14);
        }
    }

    #[test]
    fn closed_form_squeezed_solutions() {
        let s1 = solve_squeezed_family(Family::OnePhotonSubtracted, 3.0).unwrap();
        assert!(s1.feasible);
        // 3 = 1 + 3 sinh^2 r  ->  r = asinh(sqrt(2/3))
        assert_abs_diff_eq!(s1.parameter.unwrap(), 0.745_498_154_497_404_2, epsilon = 1e-12);
        assert_abs_diff_eq!(s1.r_db.unwrap(), 6.475_314_695_345_61, epsilon = 1e-9);
        let s0 = solve_squeezed_family(Family::SqueezedVacuum, 0.5581).unwrap();
        assert_abs_diff_eq!(s0.parameter.unwrap(), 0.690_794_248_102_754, epsilon = 1e-12);
        let low = solve_squeezed_family(Family::OnePhotonSubtracted, 0.5).unwrap();
        assert!(!low.feasible);
        assert!(low.reason.unwrap().contains("minimum 1"));
        let capped = solve_squeezed_family(Family::SqueezedVacuum, 4.0).unwrap();
        assert!(!capped.feasible);
        assert!(capped.reason.unwrap().contains("cap"));
        assert!(solve_squeezed_family(Family::OddCat, 2.0).is_err());
    }

    #[test]
    fn cat_solutions() {
        let odd = solve_cat_alpha(true, 3.0).unwrap();
        // bisection on u coth u = 3 computed independently: alpha = 1.7276297593402026
        assert_abs_diff_eq!(odd.parameter.unwrap(), 1.727_629_759_340_202_6, epsilon = 1e-9);
        assert!((odd.achieved_n.unwrap() - 3.0).abs() <= 1e-8);
        assert!(!solve_cat_alpha(true, 1.0).unwrap().feasible);
        let even = solve_cat_alpha(false, 2.5298).unwrap();
        assert_abs_diff_eq!(even.parameter.unwrap(), 1.6, epsilon = 1e-4);
        assert!(!solve_cat_alpha(false, 0.0).unwrap().feasible);
        assert!(!solve_cat_alpha(false, 100.0).unwrap().feasible);
    }

    #[test]
    fn fock_reference_is_parameter_free() {
        let set = matched_set(3.0, &[Family::Fock]).unwrap();
        assert_eq!(set[0].achieved_n, Some(3.0));
        assert!(!solve_fock(2.5).unwrap().feasible);
    }

    #[test]
    fn infeasible_reasons_are_distinct() {
        let set = matched_set(0.5, &[Family::OnePhotonSubtracted, Family::OddCat]).unwrap();
        assert!(set.iter().all(|s| !s.feasible));
        assert_ne!(set[0].reason, set[1].reason);
        assert!(matched_set(1.0, &[]).is_err());
    }

    #[test]
    fn specializations_of_squeezed_fock_energy() {
        // n + (2n+1) sinh^2 r at n = 0 and n = 1
        for r in [0.0, 0.3, 0.9, 1.4] {
            let general = |n: f64| n + (2.0 * n + 1.0) * f64::sinh(r).powi(2);
            assert_eq!(general(0.0), f64::sinh(r).powi(2));
            assert_abs_diff_eq!(general(1.0), 1.0 + 3.0 * f64::sinh(r).powi(2), epsilon = 1e-15);
        }
    }

    #[test]
    fn energy_curves_are_monotone() {
        let r_cap = max_squeeze_r();
        let mut prev = -1.0;
        for i in 0..50 {
            let r = r_cap * i as f64 / 49.0;
            let n = two_photon_subtracted_energy(r).unwrap();
            assert!(n > prev, "not increasing at r={r}");
            prev = n;
        }
        for odd in [false, true] {
            let mut prev = -1.0;
            for i in 0..50 {
                let a = ALPHA_MIN + (ALPHA_MAX - ALPHA_MIN) * i as f64 / 49.0;
                let n = cat_mean_photon(a, odd);
                assert!(n > prev);
                prev = n;
            }
        }
    }
}
