//! Built-in operator catalog addressable by string id, plus JSON spec files
//! for user-supplied group structures and neighborhood systems.
//!
//! Id grammar: `name:key=value:...`, e.g. `soft:lambda=1`,
//! `group_lasso:groups=1,1,2,2:lambda=1`, `wglasso:n=3:window=1:lambda=1`.
//! The unicode key `λ` is accepted as an alias for `lambda`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shrinkage::group::{group_ew_operator, group_lasso_operator, GroupStructure};
use crate::shrinkage::operator::{identity_operator, rotation_operator, BoxDomain, OperatorSpec};
use crate::shrinkage::scalar::{scalar_operator, ScalarRule};
use crate::shrinkage::social::{social_operator, NeighborhoodSystem, SocialShrinkageSpec};

/// One catalog row for listings.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub parameters: &'static str,
    pub origin: &'static str,
    pub example_id: &'static str,
}

/// Every built-in operator family.
pub fn catalog() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            name: "identity",
            parameters: "n (default 1)",
            origin: "identity map; prox of the zero penalty",
            example_id: "identity:n=2",
        },
        CatalogEntry {
            name: "soft",
            parameters: "lambda >= 0 (default 1)",
            origin: "soft thresholding; prox of the absolute value",
            example_id: "soft:lambda=1",
        },
        CatalogEntry {
            name: "hard",
            parameters: "lambda >= 0 (default 1)",
            origin: "hard thresholding; a prox selection of the weighted l0 penalty",
            example_id: "hard:lambda=2",
        },
        CatalogEntry {
            name: "scaled_soft",
            parameters: "c > 0 (default 2); unit threshold",
            origin: "scaled soft thresholding; expansive for c > 1, prox of a nonconvex penalty",
            example_id: "scaled_soft:c=2",
        },
        CatalogEntry {
            name: "quantizer",
            parameters: "q cells on [0,1) (default 4)",
            origin: "nondecreasing step function; prox of a discrete-support penalty",
            example_id: "quantizer:q=4",
        },
        CatalogEntry {
            name: "group_lasso",
            parameters: "groups=<label per coordinate>, lambda (default 1)",
            origin: "block shrinkage of the l21 mixed norm (group lasso, Yuan & Lin)",
            example_id: "group_lasso:groups=1,1,2,2:lambda=1",
        },
        CatalogEntry {
            name: "group_ew",
            parameters: "groups=<label per coordinate>, lambda (default 1)",
            origin: "group empirical Wiener / nonnegative garrote shrinkage",
            example_id: "group_ew:groups=1,1,2,2:lambda=1",
        },
        CatalogEntry {
            name: "wglasso",
            parameters: "n, window (default 1) or blocks=k, lambda (default 1)",
            origin: "windowed group lasso social shrinkage (Kowalski et al.)",
            example_id: "wglasso:n=3:window=1:lambda=1",
        },
        CatalogEntry {
            name: "pew",
            parameters: "n, window (default 1) or blocks=k, lambda (default 1)",
            origin: "persistent empirical Wiener social shrinkage (Siedenburg & Doerfler)",
            example_id: "pew:n=3:window=1:lambda=1",
        },
        CatalogEntry {
            name: "rotation",
            parameters: "none (n = 2)",
            origin: "planar rotation field; non-conservative refutation control",
            example_id: "rotation",
        },
    ]
}

/// A parsed catalog operator, keeping the structured form so commands can
/// reach the underlying rule or neighborhood system.
#[derive(Debug, Clone)]
pub enum CatalogOperator {
    Scalar(ScalarRule),
    Identity { n: usize },
    GroupLasso { gs: GroupStructure, lambda: f64 },
    GroupEw { gs: GroupStructure, lambda: f64 },
    Social(SocialShrinkageSpec),
    Rotation,
}

fn ensure_group_threshold(lambda: f64) -> Result<f64> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidSpec(format!(
            "threshold must be finite and >= 0, got {lambda}"
        )));
    }
    Ok(lambda)
}

fn ensure_dimension(n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidSpec("dimension must be at least 1".into()));
    }
    Ok(n)
}

impl CatalogOperator {
    pub fn parse(id: &str) -> Result<Self> {
        let mut parts = id.split(':');
        let name = parts.next().unwrap_or("").trim().to_lowercase();
        let mut kv = KeyValues::default();
        for part in parts {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (k, v) = part.split_once('=').ok_or_else(|| {
                Error::InvalidSpec(format!("expected key=value, got '{part}' in '{id}'"))
            })?;
            kv.push(k, v)?;
        }
        match name.as_str() {
            "identity" => Ok(Self::Identity {
                n: ensure_dimension(kv.usize_or("n", 1)?)?,
            }),
            "soft" => Ok(Self::Scalar(ScalarRule::soft(kv.f64_or("lambda", 1.0)?)?)),
            "hard" => Ok(Self::Scalar(ScalarRule::hard(kv.f64_or("lambda", 1.0)?)?)),
            "scaled_soft" => Ok(Self::Scalar(ScalarRule::scaled_soft(kv.f64_or("c", 2.0)?)?)),
            "quantizer" => Ok(Self::Scalar(ScalarRule::uniform_quantizer(
                kv.usize_or("q", 4)?,
            )?)),
            "group_lasso" | "group_ew" => {
                let labels = kv.labels("groups")?;
                let gs = GroupStructure::from_labels(&labels)?;
                let lambda = ensure_group_threshold(kv.f64_or("lambda", 1.0)?)?;
                if name == "group_lasso" {
                    Ok(Self::GroupLasso { gs, lambda })
                } else {
                    Ok(Self::GroupEw { gs, lambda })
                }
            }
            "wglasso" | "pew" => {
                let n = ensure_dimension(kv.usize_req("n")?)?;
                let lambda = kv.f64_or("lambda", 1.0)?;
                let system = if let Some(blocks) = kv.usize_opt("blocks")? {
                    if blocks == 0 || n % blocks != 0 {
                        return Err(Error::InvalidSpec(format!(
                            "blocks={blocks} must divide n={n}"
                        )));
                    }
                    let size = n / blocks;
                    let groups: Vec<Vec<usize>> = (0..blocks)
                        .map(|b| (b * size..(b + 1) * size).collect())
                        .collect();
                    NeighborhoodSystem::from_groups(&GroupStructure::new(n, groups)?)?
                } else {
                    NeighborhoodSystem::sliding_window(n, kv.usize_or("window", 1)?)?
                };
                if name == "wglasso" {
                    Ok(Self::Social(SocialShrinkageSpec::wglasso(system, lambda)?))
                } else {
                    Ok(Self::Social(SocialShrinkageSpec::pew(system, lambda)?))
                }
            }
            "rotation" => Ok(Self::Rotation),
            other => Err(Error::InvalidSpec(format!("unknown operator '{other}'"))),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Scalar(rule) => rule.name(),
            Self::Identity { .. } => "identity",
            Self::GroupLasso { .. } => "group_lasso",
            Self::GroupEw { .. } => "group_ew",
            Self::Social(spec) => spec.profile.name(),
            Self::Rotation => "rotation",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Scalar(_) => 1,
            Self::Identity { n } => *n,
            Self::GroupLasso { gs, .. } | Self::GroupEw { gs, .. } => gs.dim(),
            Self::Social(spec) => spec.dim(),
            Self::Rotation => 2,
        }
    }

    /// The social shrinkage spec, for witness-style commands.
    pub fn social(&self) -> Option<&SocialShrinkageSpec> {
        match self {
            Self::Social(spec) => Some(spec),
            _ => None,
        }
    }

    pub fn scalar(&self) -> Option<&ScalarRule> {
        match self {
            Self::Scalar(rule) => Some(rule),
            _ => None,
        }
    }

    pub fn operator(&self) -> OperatorSpec {
        match self {
            Self::Scalar(rule) => scalar_operator(rule.clone()),
            Self::Identity { n } => identity_operator(*n),
            Self::GroupLasso { gs, lambda } => group_lasso_operator(gs.clone(), *lambda),
            Self::GroupEw { gs, lambda } => group_ew_operator(gs.clone(), *lambda),
            Self::Social(spec) => social_operator(spec.clone()),
            Self::Rotation => rotation_operator(),
        }
    }

    /// A finite box suitable for sampling when the caller supplies none.
    pub fn default_box(&self) -> BoxDomain {
        match self {
            Self::Scalar(ScalarRule::Quantizer { breakpoints, .. }) => {
                let lo = breakpoints[0];
                let hi = *breakpoints.last().unwrap();
                let pad = 1e-9 * (hi - lo);
                BoxDomain::new(vec![lo], vec![hi - pad]).expect("valid quantizer box")
            }
            _ => BoxDomain::cube(self.dim(), -5.0, 5.0).expect("valid default box"),
        }
    }
}

#[derive(Default)]
struct KeyValues {
    entries: Vec<(String, String)>,
}

impl KeyValues {
    fn push(&mut self, key: &str, value: &str) -> Result<()> {
        let key = match key.trim() {
            "λ" => "lambda".to_string(),
            "C" => "c".to_string(),
            other => other.to_lowercase(),
        };
        self.entries.push((key, value.trim().to_string()));
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::InvalidSpec(format!("bad number for {key}: '{v}'"))),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.usize_opt(key)? {
            Some(v) => Ok(v),
            None => Ok(default),
        }
    }

    fn usize_req(&self, key: &str) -> Result<usize> {
        self.usize_opt(key)?
            .ok_or_else(|| Error::InvalidSpec(format!("missing required key '{key}'")))
    }

    fn usize_opt(&self, key: &str) -> Result<Option<usize>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::InvalidSpec(format!("bad integer for {key}: '{v}'"))),
        }
    }

    fn labels(&self, key: &str) -> Result<Vec<String>> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::InvalidSpec(format!("missing required key '{key}'")))?;
        Ok(raw.split(',').map(|s| s.trim().to_string()).collect())
    }
}

/// JSON schema for user-supplied operators: scalar rules, group structures
/// (one label per coordinate), and neighborhood systems (full weight matrix).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpecFile {
    Scalar {
        #[serde(flatten)]
        rule: ScalarRule,
    },
    Identity {
        n: usize,
    },
    GroupLasso {
        groups: Vec<String>,
        lambda: f64,
    },
    GroupEw {
        groups: Vec<String>,
        lambda: f64,
    },
    Social {
        profile: String,
        lambda: f64,
        weights: Vec<Vec<f64>>,
    },
}

/// Parse a JSON operator spec into a catalog operator.
pub fn operator_from_json(text: &str) -> Result<CatalogOperator> {
    let file: OperatorSpecFile = serde_json::from_str(text)
        .map_err(|e| Error::InvalidSpec(format!("bad operator spec file: {e}")))?;
    match file {
        OperatorSpecFile::Scalar { rule } => {
            validate_rule(&rule)?;
            Ok(CatalogOperator::Scalar(rule))
        }
        OperatorSpecFile::Identity { n } => Ok(CatalogOperator::Identity {
            n: ensure_dimension(n)?,
        }),
        OperatorSpecFile::GroupLasso { groups, lambda } => Ok(CatalogOperator::GroupLasso {
            gs: GroupStructure::from_labels(&groups)?,
            lambda: ensure_group_threshold(lambda)?,
        }),
        OperatorSpecFile::GroupEw { groups, lambda } => Ok(CatalogOperator::GroupEw {
            gs: GroupStructure::from_labels(&groups)?,
            lambda: ensure_group_threshold(lambda)?,
        }),
        OperatorSpecFile::Social {
            profile,
            lambda,
            weights,
        } => {
            let system = NeighborhoodSystem::new(weights)?;
            let spec = match profile.as_str() {
                "wglasso" => SocialShrinkageSpec::wglasso(system, lambda)?,
                "pew" => SocialShrinkageSpec::pew(system, lambda)?,
                other => {
                    return Err(Error::InvalidSpec(format!(
                        "unknown social profile '{other}' (custom profiles are in-process only)"
                    )))
                }
            };
            Ok(CatalogOperator::Social(spec))
        }
    }
}

/// Serde-deserialized rules bypass the validating constructors; re-validate.
fn validate_rule(rule: &ScalarRule) -> Result<()> {
    match rule {
        ScalarRule::Identity => Ok(()),
        ScalarRule::Soft { lambda } => ScalarRule::soft(*lambda).map(|_| ()),
        ScalarRule::Hard { lambda } => ScalarRule::hard(*lambda).map(|_| ()),
        ScalarRule::ScaledSoft { c } => ScalarRule::scaled_soft(*c).map(|_| ()),
        ScalarRule::Quantizer {
            breakpoints,
            levels,
        } => ScalarRule::quantizer(breakpoints.clone(), levels.clone()).map(|_| ()),
    }
}
