//! Textual kick-source specifications.
//!
//! | form | kicks |
//! |------|-------|
//! | `identity` | `Φ_n = I` |
//! | `constant-m:C` | `Φ_n = M(C)` |
//! | `constant:A,B,C,D` | `Φ_n = ((A, B), (C, D))` |
//! | `random:seed=S,bound=C` | seeded random kicks with `‖Φ_n‖ ≤ C` |
//! | `dyadic:C0,C1,…` | `Φ_n = M(c_{ruler(n)})` |
//! | `dyadic-build:PATH` | coefficients of a saved construction |
//! | `seq:T1,T2,…` | rotations annihilating the traces at the targets |
//! | `triangular:L1/S1,L2/S2,…` | `((λ_n, s_n), (0, 1/λ_n))` |

use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use crate::analysis::TriKicks;
use crate::construct_eus::EusBuild;
use crate::construct_seq::SeqConstruction;
use crate::dyadic::DyadicKicks;
use crate::evolution::{ConstantKicks, KickSource, RandomBoundedKicks};
use crate::mat2::Mat2R;

use super::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum KickSpec {
    Identity,
    ConstantKick(f64),
    Constant(Mat2R),
    Random { seed: u64, bound: f64 },
    Dyadic(Vec<f64>),
    DyadicBuild(PathBuf),
    Seq(Vec<f64>),
    Triangular { scales: Vec<f64>, shears: Vec<f64> },
}

pub fn parse_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split([',', ' '])
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Usage(format!("bad number {s:?}: {e}")))
        })
        .collect()
}

impl FromStr for KickSpec {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Self, CliError> {
        let bad = |why: &str| CliError::Usage(format!("kick spec {text:?}: {why}"));
        let (kind, body) = text.split_once(':').unwrap_or((text, ""));
        match kind.trim() {
            "identity" => Ok(KickSpec::Identity),
            "constant-m" => {
                let c = body
                    .trim()
                    .parse()
                    .map_err(|_| bad("expected constant-m:C"))?;
                Ok(KickSpec::ConstantKick(c))
            }
            "constant" => match parse_list(body)?.as_slice() {
                &[a, b, c, d] => Ok(KickSpec::Constant(Mat2R::new(a, b, c, d))),
                _ => Err(bad("expected four entries")),
            },
            "random" => {
                let (mut seed, mut bound) = (0u64, 2.0f64);
                for part in body.split(',').filter(|p| !p.trim().is_empty()) {
                    let (key, value) = part
                        .split_once('=')
                        .ok_or_else(|| bad("expected key=value"))?;
                    match key.trim() {
                        "seed" => {
                            seed = value
                                .trim()
                                .parse()
                                .map_err(|_| bad("seed must be an integer"))?
                        }
                        "bound" => {
                            bound = value
                                .trim()
                                .parse()
                                .map_err(|_| bad("bound must be a number"))?
                        }
                        other => return Err(bad(&format!("unknown key {other}"))),
                    }
                }
                if !(bound >= 1.0 && bound.is_finite()) {
                    return Err(bad("bound must be at least 1"));
                }
                Ok(KickSpec::Random { seed, bound })
            }
            "dyadic" => Ok(KickSpec::Dyadic(parse_list(body)?)),
            "dyadic-build" if !body.is_empty() => Ok(KickSpec::DyadicBuild(PathBuf::from(body))),
            "seq" => Ok(KickSpec::Seq(parse_list(body)?)),
            "triangular" => {
                let mut scales = Vec::new();
                let mut shears = Vec::new();
                for pair in body.split(',').filter(|p| !p.trim().is_empty()) {
                    let (l, s) = pair
                        .split_once('/')
                        .ok_or_else(|| bad("expected L/S pairs"))?;
                    scales.push(l.trim().parse().map_err(|_| bad("bad scale"))?);
                    shears.push(s.trim().parse().map_err(|_| bad("bad shear"))?);
                }
                Ok(KickSpec::Triangular { scales, shears })
            }
            _ => Err(bad("unknown kind")),
        }
    }
}

impl KickSpec {
    /// A source able to serve at least `horizon` kicks where that matters.
    pub fn source(&self, horizon: u64) -> Result<Box<dyn KickSource>, CliError> {
        let usage = |e: String| CliError::Usage(e);
        Ok(match self {
            KickSpec::Identity => Box::new(ConstantKicks::identity()),
            KickSpec::ConstantKick(c) => {
                Box::new(ConstantKicks::new(Mat2R::kick(*c)).map_err(|e| usage(e.to_string()))?)
            }
            KickSpec::Constant(m) => {
                Box::new(ConstantKicks::new(*m).map_err(|e| usage(e.to_string()))?)
            }
            KickSpec::Random { seed, bound } => Box::new(RandomBoundedKicks::new(*seed, *bound)),
            KickSpec::Dyadic(coeffs) => {
                Box::new(DyadicKicks::new(coeffs.clone()).map_err(|e| usage(e.to_string()))?)
            }
            KickSpec::DyadicBuild(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| usage(format!("{}: {e}", path.display())))?;
                let build = EusBuild::from_json(&text).map_err(|e| usage(e.to_string()))?;
                Box::new(
                    build
                        .kicks(horizon.max(2))
                        .map_err(|e| usage(e.to_string()))?,
                )
            }
            KickSpec::Seq(targets) => Box::new(
                SeqConstruction::build(targets)
                    .map_err(CliError::from)?
                    .kicks(),
            ),
            KickSpec::Triangular { scales, shears } => {
                Box::new(TriKicks::new(scales.clone(), shears.clone()).map_err(CliError::from)?)
            }
        })
    }
}
