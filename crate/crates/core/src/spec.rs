//! Declarative state recipes and their canonical text form.
//!
//! Grammar (whitespace around tokens is ignored):
//!
//! ```text
//! spec    := family "{" field ("," field)* "}"
//! family  := "fock" | "coherent" | "even_cat" | "odd_cat"
//!          | "squeezed_fock" | "subtracted_squeezed"
//! field   := key "=" number
//! ```
//!
//! | family                | required keys        | optional keys            |
//! |-----------------------|----------------------|--------------------------|
//! | `fock`                | `n`                  | `cutoff`                 |
//! | `coherent`            | `alpha`              | `alpha_im`, `cutoff`     |
//! | `even_cat`, `odd_cat` | `alpha`              | `alpha_im`, `cutoff`     |
//! | `squeezed_fock`       | `r_db` or `r`, `n`   | `theta`, `cutoff`        |
//! | `subtracted_squeezed` | `r_db` or `r`, `k`   | `theta`, `cutoff`        |
//!
//! `cutoff` defaults to 80 and `theta`/`alpha_im` to 0. Canonical output
//! always spells `cutoff`, `theta` and `r_db`, prints floats with the shortest
//! representation that parses back to the same bits, and lists `alpha_im`
//! only when it is non-zero, e.g.
//! `subtracted_squeezed{r_db=6.0,theta=0.0,k=2,cutoff=80}`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{make_cat, make_coherent, make_fock, make_squeezed_fock, subtract_photons, CatParity, FockVector};
use crate::matching::{db_to_r, r_to_db, MAX_SQUEEZE_DB};

pub const DEFAULT_CUTOFF: usize = 80;

#[derive(Clone, Debug, PartialEq)]
pub enum StateFamily {
    Fock { n: usize },
    Coherent { alpha: C64 },
    EvenCat { alpha: C64 },
    OddCat { alpha: C64 },
    SqueezedFock { r_db: f64, theta: f64, n: usize },
    SubtractedSqueezed { r_db: f64, theta: f64, k: usize },
}

impl StateFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            StateFamily::Fock { .. } => "fock",
            StateFamily::Coherent { .. } => "coherent",
            StateFamily::EvenCat { .. } => "even_cat",
            StateFamily::OddCat { .. } => "odd_cat",
            StateFamily::SqueezedFock { .. } => "squeezed_fock",
            StateFamily::SubtractedSqueezed { .. } => "subtracted_squeezed",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateSpec {
    pub family: StateFamily,
    pub cutoff: usize,
}

impl StateSpec {
    pub fn new(family: StateFamily, cutoff: usize) -> Result<Self> {
        let spec = Self { family, cutoff };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        Self {
            family: self.family.clone(),
            cutoff,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.cutoff < 2 {
            return Err(Error::invalid("cutoff must be at least 2"));
        }
        let check_alpha = |a: &C64| {
            if a.re.is_finite() && a.im.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid("alpha must be finite"))
            }
        };
        let check_squeeze = |r_db: f64, theta: f64| {
            if !(r_db.is_finite() && theta.is_finite()) {
                Err(Error::invalid("squeeze parameters must be finite"))
            } else if !(0.0..=MAX_SQUEEZE_DB).contains(&r_db) {
                Err(Error::invalid(format!("r_db={r_db} outside [0, {MAX_SQUEEZE_DB}]")))
            } else {
                Ok(())
            }
        };
        match &self.family {
            StateFamily::Fock { n } | StateFamily::SqueezedFock { n, .. } if n + 2 > self.cutoff => {
                Err(Error::invalid(format!("n={n} too close to cutoff {}", self.cutoff)))
            }
            StateFamily::Fock { .. } => Ok(()),
            StateFamily::Coherent { alpha } | StateFamily::EvenCat { alpha } => check_alpha(alpha),
            StateFamily::OddCat { alpha } => {
                check_alpha(alpha)?;
                if alpha.norm() <= crate::fock::MIN_ODD_CAT_ALPHA {
                    Err(Error::invalid("odd cat needs |alpha| > 1e-6"))
                } else {
                    Ok(())
                }
            }
            StateFamily::SqueezedFock { r_db, theta, .. } => check_squeeze(*r_db, *theta),
            StateFamily::SubtractedSqueezed { r_db, theta, k } => {
                check_squeeze(*r_db, *theta)?;
                if *k == 1 || *k == 2 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("subtraction order k={k} not in {{1, 2}}")))
                }
            }
        }
    }

    pub fn build(&self) -> Result<FockVector> {
        self.validate()?;
        let cutoff = self.cutoff;
        match &self.family {
            StateFamily::Fock { n } => make_fock(*n, cutoff),
            StateFamily::Coherent { alpha } => make_coherent(*alpha, cutoff),
            StateFamily::EvenCat { alpha } => make_cat(*alpha, CatParity::Even, cutoff),
            StateFamily::OddCat { alpha } => make_cat(*alpha, CatParity::Odd, cutoff),
            StateFamily::SqueezedFock { r_db, theta, n } => make_squeezed_fock(db_to_r(*r_db), *theta, *n, cutoff),
            StateFamily::SubtractedSqueezed { r_db, theta, k } => {
                let parent = make_squeezed_fock(db_to_r(*r_db), *theta, 0, cutoff)?;
                subtract_photons(&parent, *k)
            }
        }
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{{", self.family.tag())?;
        let alpha = |f: &mut fmt::Formatter<'_>, a: &C64| {
            write!(f, "alpha={:?}", a.re)?;
            if a.im.to_bits() != 0 {
                write!(f, ",alpha_im={:?}", a.im)?;
            }
            Ok(())
        };
        match &self.family {
            StateFamily::Fock { n } => write!(f, "n={n}")?,
            StateFamily::Coherent { alpha: a }
            | StateFamily::EvenCat { alpha: a }
            | StateFamily::OddCat { alpha: a } => alpha(f, a)?,
            StateFamily::SqueezedFock { r_db, theta, n } => write!(f, "r_db={r_db:?},theta={theta:?},n={n}")?,
            StateFamily::SubtractedSqueezed { r_db, theta, k } => write!(f, "r_db={r_db:?},theta={theta:?},k={k}")?,
        }
        write!(f, ",cutoff={}}}", self.cutoff)
    }
}

impl FromStr for StateSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let open = s
            .find('{')
            .ok_or_else(|| Error::Parse(format!("missing '{{' in {s:?}")))?;
        if !s.ends_with('}') {
            return Err(Error::Parse(format!("missing closing '}}' in {s:?}")));
        }
        let name = s[..open].trim();
        let body = &s[open + 1..s.len() - 1];

        let mut fields = BTreeMap::new();
        for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("field {part:?} is not key=value")))?;
            let key = key.trim();
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("value of {key:?} is not a number")))?;
            if fields.insert(key.to_string(), value).is_some() {
                return Err(Error::Parse(format!("duplicate field {key:?}")));
            }
        }
        let mut fields = Fields(fields);

        let cutoff = fields.take_index("cutoff")?.unwrap_or(DEFAULT_CUTOFF);
        let family = match name {
            "fock" => StateFamily::Fock {
                n: fields.require_index("n")?,
            },
            "coherent" => StateFamily::Coherent {
                alpha: fields.take_alpha()?,
            },
            "even_cat" => StateFamily::EvenCat {
                alpha: fields.take_alpha()?,
            },
            "odd_cat" => StateFamily::OddCat {
                alpha: fields.take_alpha()?,
            },
            "squeezed_fock" => StateFamily::SqueezedFock {
                r_db: fields.take_r_db()?,
                theta: fields.take("theta").unwrap_or(0.0),
                n: fields.require_index("n")?,
            },
            "subtracted_squeezed" => StateFamily::SubtractedSqueezed {
                r_db: fields.take_r_db()?,
                theta: fields.take("theta").unwrap_or(0.0),
                k: fields.require_index("k")?,
            },
            other => return Err(Error::Parse(format!("unknown state family {other:?}"))),
        };
        if let Some(extra) = fields.0.keys().next() {
            return Err(Error::Parse(format!("unexpected field {extra:?} for {name}")));
        }
        StateSpec::new(family, cutoff)
    }
}

struct Fields(BTreeMap<String, f64>);

impl Fields {
    fn take(&mut self, key: &str) -> Option<f64> {
        self.0.remove(key)
    }

    fn take_index(&mut self, key: &str) -> Result<Option<usize>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) if v >= 0.0 && v.fract() == 0.0 && v < 1e9 => Ok(Some(v as usize)),
            Some(v) => Err(Error::Parse(format!("{key}={v} is not a non-negative integer"))),
        }
    }

    fn require_index(&mut self, key: &str) -> Result<usize> {
        self.take_index(key)?
            .ok_or_else(|| Error::Parse(format!("missing field {key:?}")))
    }

    fn take_alpha(&mut self) -> Result<C64> {
        let re = self
            .take("alpha")
            .ok_or_else(|| Error::Parse("missing field \"alpha\"".into()))?;
        Ok(C64::new(re, self.take("alpha_im").unwrap_or(0.0)))
    }

    fn take_r_db(&mut self) -> Result<f64> {
        match (self.take("r_db"), self.take("r")) {
            (Some(db), None) => Ok(db),
            (None, Some(r)) => Ok(r_to_db(r)),
            (Some(_), Some(_)) => Err(Error::Parse("give either r_db or r, not both".into())),
            (None, None) => Err(Error::Parse("missing field \"r_db\"".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_documented_example() {
        let spec: StateSpec = "subtracted_squeezed{r_db=6.0,theta=0,k=2,cutoff=80}".parse().unwrap();
        assert_eq!(
            spec.family,
            StateFamily::SubtractedSqueezed {
                r_db: 6.0,
                theta: 0.0,
                k: 2
            }
        );
        assert_eq!(spec.cutoff, 80);
        assert_eq!(
            spec.to_string(),
            "subtracted_squeezed{r_db=6.0,theta=0.0,k=2,cutoff=80}"
        );
    }

    #[test]
    fn defaults_and_aliases() {
        let spec: StateSpec = " odd_cat { alpha = 1.6 } ".parse().unwrap();
        assert_eq!(spec.cutoff, DEFAULT_CUTOFF);
        assert_eq!(spec.to_string(), "odd_cat{alpha=1.6,cutoff=80}");
        let spec: StateSpec = "squeezed_fock{r=0.5,n=1}".parse().unwrap();
        match spec.family {
            StateFamily::SqueezedFock { r_db, .. } => assert!((db_to_r(r_db) - 0.5).abs() < 1e-15),
            _ => unreachable!(),
        }
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in [
            "fock{n=1",
            "fock n=1}",
            "fock{n=1.5}",
            "fock{n=79,cutoff=80}",
            "fock{}",
            "fock{n=1,n=2}",
            "fock{n=1,k=2}",
            "squid{n=1}",
            "odd_cat{alpha=0}",
            "subtracted_squeezed{r_db=6,k=3}",
            "subtracted_squeezed{r_db=13,k=1}",
            "squeezed_fock{r_db=3,r=0.1,n=0}",
            "coherent{alpha=abc}",
        ] {
            assert!(bad.parse::<StateSpec>().is_err(), "{bad} accepted");
        }
    }

    #[test]
    fn builds_each_family() {
        for text in [
            "fock{n=2,cutoff=40}",
            "coherent{alpha=1.0,alpha_im=-0.5,cutoff=40}",
            "even_cat{alpha=1.6,cutoff=60}",
            "odd_cat{alpha=1.6,cutoff=60}",
            "squeezed_fock{r_db=6.0,n=1,cutoff=80}",
            "subtracted_squeezed{r_db=6.0,k=2,cutoff=80}",
        ] {
            let state = text.parse::<StateSpec>().unwrap().build().unwrap();
            assert!((state.norm_sqr() - 1.0).abs() < 1e-12, "{text}");
        }
    }

    fn family_strategy() -> impl Strategy<Value = StateFamily> {
        let alpha = (-3.0f64..3.0, prop_oneof![Just(0.0), -3.0f64..3.0]).prop_map(|(re, im)| C64::new(re, im));
        prop_oneof![
            (0usize..50).prop_map(|n| StateFamily::Fock { n }),
            alpha.clone().prop_map(|alpha| StateFamily::Coherent { alpha }),
            alpha.clone().prop_map(|alpha| StateFamily::EvenCat { alpha }),
            (0.1f64..3.0).prop_map(|a| StateFamily::OddCat {
                alpha: C64::new(a, 0.0)
            }),
            (0.0f64..12.5, 0.0f64..6.0, 0usize..50).prop_map(|(r_db, theta, n)| StateFamily::SqueezedFock {
                r_db,
                theta,
                n
            }),
            (0.0f64..12.5, 0.0f64..6.0, 1usize..3).prop_map(|(r_db, theta, k)| StateFamily::SubtractedSqueezed {
                r_db,
                theta,
                k
            }),
        ]
    }

    proptest! {
        #[test]
        fn canonical_text_round_trips(family in family_strategy(), cutoff in 60usize..200) {
            let spec = StateSpec::new(family, cutoff).unwrap();
            let text = spec.to_string();
            let back: StateSpec = text.parse().unwrap();
            prop_assert_eq!(&back, &spec);
            prop_assert_eq!(back.to_string(), text);
        }
    }
}
