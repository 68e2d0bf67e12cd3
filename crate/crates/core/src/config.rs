//! `key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! family = sim_f2
//! n = 3
//! seed = 42
//! B1 = 1 0 0.5
//! claims = weyl_zero, lemma1
//! ```

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::families::FamilyId;
use crate::fields::UPoly;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SAMPLES: usize = 100;
pub const DEFAULT_NS: [usize; 3] = [2, 3, 4];

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub family: Option<FamilyId>,
    pub ns: Vec<usize>,
    pub seed: u64,
    pub samples: usize,
    pub order: usize,
    /// Overrides the tolerance of claims with a plain residual.
    pub tol: Option<f64>,
    /// Parameter overrides keyed `a`, `B1`.., `C1`.., `D`, `lambda`.
    pub params: BTreeMap<String, UPoly>,
    pub c_const: Option<f64>,
    /// `None` runs every registered claim.
    pub claims: Option<Vec<String>>,
}

impl Default for Config {
    fn default() -> Config {
        Config {
            family: None,
            ns: DEFAULT_NS.to_vec(),
            seed: DEFAULT_SEED,
            samples: DEFAULT_SAMPLES,
            order: 2,
            tol: None,
            params: BTreeMap::new(),
            c_const: None,
            claims: None,
        }
    }
}

fn is_param_key(key: &str) -> bool {
    let indexed = |prefix: char| {
        key.len() > 1
            && key.starts_with(prefix)
            && key[1..].parse::<usize>().map(|i| i >= 1).unwrap_or(false)
    };
    matches!(key, "a" | "D" | "lambda") || indexed('B') || indexed('C')
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse::<T>().map_err(|_| Error::Config {
        line,
        msg: format!("invalid value `{value}` for `{key}`"),
    })
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                msg: format!("expected `key = value`, got `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            cfg.set(line, key, value)?;
        }
        Ok(cfg)
    }

    /// Applies one `key = value` pair; `line` is used in error messages.
    pub fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        match key {
            "family" => {
                self.family = Some(value.parse::<FamilyId>().map_err(|e| Error::Config {
                    line,
                    msg: e.to_string(),
                })?)
            }
            "n" => {
                let ns = value
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|t| !t.is_empty())
                    .map(|t| parse_value::<usize>(line, key, t))
                    .collect::<Result<Vec<_>>>()?;
                if ns.is_empty() || ns.iter().any(|&n| n < 2) {
                    return Err(Error::Config {
                        line,
                        msg: format!("`n` must be a list of integers >= 2, got `{value}`"),
                    });
                }
                self.ns = ns;
            }
            "seed" => self.seed = parse_value(line, key, value)?,
            "samples" => {
                self.samples = parse_value(line, key, value)?;
                if self.samples == 0 {
                    return Err(Error::Config {
                        line,
                        msg: "`samples` must be positive".into(),
                    });
                }
            }
            "order" => {
                let order: usize = parse_value(line, key, value)?;
                if !(2..=crate::jets::MAX_ORDER).contains(&order) {
                    return Err(Error::Config {
                        line,
                        msg: format!("`order` must be 2 or 3, got {order}"),
                    });
                }
                self.order = order;
            }
            "tol" => {
                let tol: f64 = parse_value(line, key, value)?;
                if !(tol > 0.0 && tol.is_finite()) {
                    return Err(Error::Config {
                        line,
                        msg: format!("`tol` must be positive, got `{value}`"),
                    });
                }
                self.tol = Some(tol);
            }
            "c" => self.c_const = Some(parse_value(line, key, value)?),
            "claims" => {
                self.claims = Some(
                    value
                        .split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|t| !t.is_empty())
                        .map(str::to_string)
                        .collect(),
                )
            }
            k if is_param_key(k) => {
                let p = UPoly::parse(value).map_err(|e| Error::Config {
                    line,
                    msg: e.to_string(),
                })?;
                self.params.insert(k.to_string(), p);
            }
            other => {
                return Err(Error::Config {
                    line,
                    msg: format!("unknown key `{other}`"),
                })
            }
        }
        Ok(())
    }
}
